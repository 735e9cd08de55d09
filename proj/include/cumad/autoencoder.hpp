#pragma once

// Dense undercomplete autoencoder: rectifier hidden layers, linear output,
// trained with mini-batch Adam on the reconstruction MSE. Inputs are
// standardized per feature with statistics fitted on the training set, and
// all losses/scores live in that standardized space.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cumad/dataset.hpp"
#include "cumad/stats.hpp"

namespace cumad {

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

struct AutoencoderModel {
  std::vector<std::size_t> layer_dims;      // e.g. 115,87,58,38,29,38,58,87,115
  std::vector<Matrix> weights;              // weights[l]: layer_dims[l] x layer_dims[l+1]
  std::vector<std::vector<double>> biases;  // biases[l]: layer_dims[l+1]
  std::vector<double> norm_mean;            // per-feature standardization
  std::vector<double> norm_std;             // entries > 0
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return layer_dims.empty() ? 0 : layer_dims.front(); }
  std::size_t layer_count() const { return weights.size(); }
};

/// Seeded fan-in/fan-out uniform initialization; biases zero; identity
/// normalization until fitted. Dims must be symmetric around the code
/// dimension with first = last = feature dimension.
inline AutoencoderModel make_autoencoder(std::span<const std::size_t> layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 3 || layer_dims.size() % 2 == 0)
    throw std::invalid_argument("layer_dims must have odd length >= 3");
  for (std::size_t i = 0; i < layer_dims.size(); ++i) {
    if (layer_dims[i] == 0) throw std::invalid_argument("layer dims must be positive");
    if (layer_dims[i] != layer_dims[layer_dims.size() - 1 - i])
      throw std::invalid_argument("layer_dims must be symmetric around the code dimension");
  }

  AutoencoderModel m;
  m.layer_dims.assign(layer_dims.begin(), layer_dims.end());
  m.seed = seed;
  m.norm_mean.assign(layer_dims.front(), 0.0);
  m.norm_std.assign(layer_dims.front(), 1.0);

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t fan_in = layer_dims[l], fan_out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> uni(-limit, limit);
    Matrix w(fan_in, fan_out);
    for (double& v : w.a) v = uni(rng);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 0.0);
  }
  return m;
}

namespace detail {

inline void standardize(const AutoencoderModel& m, std::span<const double> x, std::vector<double>& out) {
  out.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - m.norm_mean[i]) / m.norm_std[i];
}

/// Forward pass from a standardized input; fills one activation vector per
/// layer (activations[0] is the input) and the hidden pre-activations.
inline void forward_standardized(const AutoencoderModel& m, std::span<const double> x_std,
                                 std::vector<std::vector<double>>& activations,
                                 std::vector<std::vector<double>>* pre_activations = nullptr) {
  const std::size_t layers = m.layer_count();
  activations.resize(layers + 1);
  activations[0].assign(x_std.begin(), x_std.end());
  if (pre_activations) pre_activations->resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& w = m.weights[l];
    const auto& b = m.biases[l];
    std::vector<double>& out = activations[l + 1];
    out.assign(w.cols, 0.0);
    const std::vector<double>& in = activations[l];
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double v = in[r];
      if (v == 0.0) continue;
      const double* wrow = w.a.data() + r * w.cols;
      for (std::size_t c = 0; c < w.cols; ++c) out[c] += v * wrow[c];
    }
    for (std::size_t c = 0; c < w.cols; ++c) out[c] += b[c];
    if (pre_activations) (*pre_activations)[l] = out;
    if (l + 1 < layers)  // rectifier on hidden layers, linear output
      for (double& v : out) v = v > 0.0 ? v : 0.0;
  }
}

}  // namespace detail

/// Reconstruction of `x`, returned in standardized feature space.
inline std::vector<double> forward(const AutoencoderModel& m, std::span<const double> x) {
  if (x.size() != m.input_dim())
    throw std::invalid_argument("forward: input dim " + std::to_string(x.size()) +
                                " != model dim " + std::to_string(m.input_dim()));
  std::vector<double> x_std;
  detail::standardize(m, x, x_std);
  std::vector<std::vector<double>> acts;
  detail::forward_standardized(m, x_std, acts);
  return std::move(acts.back());
}

/// Anomaly score: mean squared reconstruction error in standardized space.
inline double reconstruction_error(const AutoencoderModel& m, std::span<const double> x) {
  if (x.size() != m.input_dim())
    throw std::invalid_argument("reconstruction_error: input dim mismatch");
  std::vector<double> x_std;
  detail::standardize(m, x, x_std);
  std::vector<std::vector<double>> acts;
  detail::forward_standardized(m, x_std, acts);
  const std::vector<double>& rec = acts.back();
  double ss = 0.0;
  for (std::size_t i = 0; i < x_std.size(); ++i) {
    const double d = rec[i] - x_std[i];
    ss += d * d;
  }
  return ss / static_cast<double>(x_std.size());
}

inline std::vector<double> score_all(const AutoencoderModel& m, const FeatureMatrix& data) {
  std::vector<double> scores(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) scores[i] = reconstruction_error(m, data.row(i));
  return scores;
}

inline double mean_score(const AutoencoderModel& m, const FeatureMatrix& data) {
  if (data.empty()) return 0.0;
  const auto scores = score_all(m, data);
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

namespace detail {

inline Gradients zero_gradients(const AutoencoderModel& m) {
  Gradients g;
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    g.weights.emplace_back(m.weights[l].rows, m.weights[l].cols);
    g.biases.emplace_back(m.biases[l].size(), 0.0);
  }
  return g;
}

/// Backpropagation of the batch-mean MSE for the rows named by `indices`.
inline Gradients gradient_impl(const AutoencoderModel& m, const FeatureMatrix& data,
                               std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("gradient: empty batch");
  const std::size_t layers = m.layer_count();
  const double dim = static_cast<double>(m.input_dim());
  const double batch = static_cast<double>(indices.size());

  Gradients g = zero_gradients(m);
  std::vector<double> x_std;
  std::vector<std::vector<double>> acts, preacts;
  std::vector<double> delta, delta_prev;

  for (std::size_t idx : indices) {
    standardize(m, data.row(idx), x_std);
    forward_standardized(m, x_std, acts, &preacts);

    // d(mean MSE)/d(output) for this sample's share of the batch mean
    const std::vector<double>& rec = acts[layers];
    delta.resize(rec.size());
    for (std::size_t i = 0; i < rec.size(); ++i)
      delta[i] = 2.0 * (rec[i] - x_std[i]) / (dim * batch);

    for (std::size_t l = layers; l-- > 0;) {
      Matrix& gw = g.weights[l];
      const std::vector<double>& in = acts[l];
      for (std::size_t r = 0; r < gw.rows; ++r) {
        const double v = in[r];
        if (v == 0.0) continue;
        double* grow = gw.a.data() + r * gw.cols;
        for (std::size_t c = 0; c < gw.cols; ++c) grow[c] += v * delta[c];
      }
      auto& gb = g.biases[l];
      for (std::size_t c = 0; c < gb.size(); ++c) gb[c] += delta[c];

      if (l == 0) break;
      const Matrix& w = m.weights[l];
      delta_prev.assign(w.rows, 0.0);
      for (std::size_t r = 0; r < w.rows; ++r) {
        if (preacts[l - 1][r] <= 0.0) continue;  // rectifier gate
        const double* wrow = w.a.data() + r * w.cols;
        double s = 0.0;
        for (std::size_t c = 0; c < w.cols; ++c) s += wrow[c] * delta[c];
        delta_prev[r] = s;
      }
      delta.swap(delta_prev);
    }
  }
  return g;
}

}  // namespace detail

/// Exact gradients of the batch-mean MSE with respect to all parameters.
inline Gradients gradient(const AutoencoderModel& m, const FeatureMatrix& batch) {
  if (batch.empty()) throw std::invalid_argument("gradient: empty batch");
  if (batch.width != m.input_dim()) throw std::invalid_argument("gradient: width mismatch");
  std::vector<std::size_t> all(batch.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return detail::gradient_impl(m, batch, all);
}

/// Fits norm_mean/norm_std from `data` (population std; zero-variance
/// features keep std = 1).
inline void fit_normalization(AutoencoderModel& m, const FeatureMatrix& data) {
  if (data.empty()) throw std::invalid_argument("fit_normalization: empty data");
  if (data.width != m.input_dim()) throw std::invalid_argument("fit_normalization: width mismatch");
  const std::size_t dim = m.input_dim();
  const double n = static_cast<double>(data.size());
  m.norm_mean.assign(dim, 0.0);
  m.norm_std.assign(dim, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto r = data.row(i);
    for (std::size_t j = 0; j < dim; ++j) m.norm_mean[j] += r[j];
  }
  for (double& v : m.norm_mean) v /= n;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto r = data.row(i);
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = r[j] - m.norm_mean[j];
      m.norm_std[j] += d * d;
    }
  }
  for (double& v : m.norm_std) {
    v = std::sqrt(v / n);
    if (v == 0.0) v = 1.0;
  }
}

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  }
};

struct TrainReport {
  std::vector<double> train_mse;       // one entry per epoch run
  std::vector<double> validation_mse;  // same length
  std::size_t best_epoch = 0;          // 1-based
  std::string stopping_reason;         // "early_stopping" | "max_epochs"

  std::size_t epochs_run() const { return train_mse.size(); }
};

/// Stops once the validation loss has failed to improve for `patience`
/// consecutive epochs; tracks the best epoch seen.
struct EarlyStopper {
  std::size_t patience;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t stale = 0;

  bool observe(std::size_t epoch, double validation_loss) {
    if (validation_loss < best) {
      best = validation_loss;
      best_epoch = epoch;
      stale = 0;
      return false;
    }
    return ++stale >= patience;
  }
};

namespace detail {

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<std::vector<double>> mb, vb;
  std::uint64_t step = 0;
};

inline void adam_update(AutoencoderModel& m, const Gradients& g, AdamState& st, const TrainConfig& cfg) {
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.step));
  auto apply = [&](double& param, double grad, double& mom, double& vel) {
    mom = cfg.adam_beta1 * mom + (1.0 - cfg.adam_beta1) * grad;
    vel = cfg.adam_beta2 * vel + (1.0 - cfg.adam_beta2) * grad * grad;
    param -= cfg.learning_rate * (mom / c1) / (std::sqrt(vel / c2) + cfg.adam_epsilon);
  };
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    for (std::size_t i = 0; i < m.weights[l].a.size(); ++i)
      apply(m.weights[l].a[i], g.weights[l].a[i], st.mw[l].a[i], st.vw[l].a[i]);
    for (std::size_t i = 0; i < m.biases[l].size(); ++i)
      apply(m.biases[l][i], g.biases[l][i], st.mb[l][i], st.vb[l][i]);
  }
}

}  // namespace detail

/// Mini-batch Adam on the reconstruction MSE with seeded epoch shuffling
/// and early stopping on validation MSE. Fits normalization from the
/// training set first. Returns parameters from the best validation epoch.
/// Falls back to the training loss for stopping when `validation` is empty.
inline std::pair<AutoencoderModel, TrainReport> train(const AutoencoderModel& initial,
                                                      const FeatureMatrix& training,
                                                      const FeatureMatrix& validation,
                                                      const TrainConfig& cfg) {
  cfg.validate();
  if (training.empty()) throw std::invalid_argument("train: empty training set");
  if (training.width != initial.input_dim()) throw std::invalid_argument("train: width mismatch");
  if (!validation.empty() && validation.width != initial.input_dim())
    throw std::invalid_argument("train: validation width mismatch");

  AutoencoderModel model = initial;
  fit_normalization(model, training);

  detail::AdamState adam;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    adam.mw.emplace_back(model.weights[l].rows, model.weights[l].cols);
    adam.vw.emplace_back(model.weights[l].rows, model.weights[l].cols);
    adam.mb.emplace_back(model.biases[l].size(), 0.0);
    adam.vb.emplace_back(model.biases[l].size(), 0.0);
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(training.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport report;
  EarlyStopper stopper{cfg.patience};
  std::vector<Matrix> best_weights = model.weights;
  std::vector<std::vector<double>> best_biases = model.biases;
  report.stopping_reason = "max_epochs";

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0, batch_idx = 0; start < order.size();
         start += cfg.batch_size, ++batch_idx) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const Gradients g =
          detail::gradient_impl(model, training, std::span(order).subspan(start, len));
      detail::adam_update(model, g, adam, cfg);
      if (!std::isfinite(g.biases.back().empty() ? 0.0 : g.biases.back().front()) ||
          !std::isfinite(model.biases.back().front()))
        throw std::runtime_error("train: non-finite parameters at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_idx));
    }

    const double train_mse = mean_score(model, training);
    const double val_mse = validation.empty() ? train_mse : mean_score(model, validation);
    if (!std::isfinite(train_mse) || !std::isfinite(val_mse))
      throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
    report.train_mse.push_back(train_mse);
    report.validation_mse.push_back(val_mse);

    const bool improved = val_mse < stopper.best;
    const bool stop = stopper.observe(epoch, val_mse);
    if (improved) {
      best_weights = model.weights;
      best_biases = model.biases;
    }
    if (stop) {
      report.stopping_reason = "early_stopping";
      break;
    }
  }

  report.best_epoch = stopper.best_epoch;
  model.weights = std::move(best_weights);
  model.biases = std::move(best_biases);
  return {std::move(model), std::move(report)};
}

}  // namespace cumad
