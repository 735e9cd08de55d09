#pragma once

// Evaluation protocols: per-point detector metrics, sequential-trial
// metrics over homogeneous benign/attack streams (the test restarts fresh
// after every accept decision; each accept is one trial), and the
// fixed-window majority-vote baseline.

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cumad/autoencoder.hpp"
#include "cumad/calibration.hpp"
#include "cumad/sprt.hpp"

namespace cumad {

struct MetricsReport {
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double fpr = 0.0;
  double mean_observations = 0.0;  // sequential trials only
  std::vector<std::pair<std::uint64_t, double>> observation_cdf;
  std::uint64_t trials_h1 = 0;  // trials taken from the attack stream
  std::uint64_t trials_h0 = 0;  // trials taken from the benign stream
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

namespace detail {

inline void fill_confusion_metrics(MetricsReport& r) {
  const double total = static_cast<double>(r.tp + r.fp + r.tn + r.fn);
  r.accuracy = total > 0 ? static_cast<double>(r.tp + r.tn) / total : 0.0;
  r.recall = (r.tp + r.fn) > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.f1 = (r.precision + r.recall) > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.fpr = (r.fp + r.tn) > 0 ? static_cast<double>(r.fp) / static_cast<double>(r.fp + r.tn) : 0.0;
}

struct TrialOutcome {
  bool accepted_h1;
  std::uint64_t n_used;
};

/// Runs the sequential test over one homogeneous score stream, restarting
/// after every accept. Trailing undecided observations are discarded.
inline std::vector<TrialOutcome> run_trials(std::span<const double> scores, double t_as,
                                            const SprtConfig& cfg) {
  std::vector<TrialOutcome> trials;
  SprtState state = make_sprt(cfg);
  for (double s : scores) {
    const Decision d = observe(state, classify(s, t_as));
    if (d.kind == DecisionKind::accept_h1) {
      trials.push_back({true, d.n_used});
      state = make_sprt(cfg);
    } else if (d.kind == DecisionKind::accept_h0) {
      trials.push_back({false, d.n_used});  // state already reset
    }
  }
  return trials;
}

}  // namespace detail

/// Per-point classification metrics over a labeled test matrix.
inline MetricsReport point_metrics(const AutoencoderModel& model, double t_as,
                                   const FeatureMatrix& test) {
  if (test.empty()) throw std::invalid_argument("point_metrics: empty test set");
  if (!test.labeled()) throw std::invalid_argument("point_metrics: unlabeled test matrix");
  MetricsReport r;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int flagged = classify(reconstruction_error(model, test.row(i)), t_as);
    const bool attack = test.labels[i] == Label::attack;
    if (attack)
      flagged ? ++r.tp : ++r.fn;
    else
      flagged ? ++r.fp : ++r.tn;
  }
  r.trials_h1 = r.tp + r.fn;
  r.trials_h0 = r.fp + r.tn;
  detail::fill_confusion_metrics(r);
  return r;
}

/// Sequential-trial metrics: attack-stream trials count as true positives
/// when H1 is accepted and false negatives on H0; benign-stream trials
/// symmetrically. Mean observations and the CDF cover H1-accepting trials
/// on the attack stream.
inline MetricsReport cumad_trial_metrics(const AutoencoderModel& model, const DetectorProfile& profile,
                                         const SprtConfig& sprt_cfg, const FeatureMatrix& benign_stream,
                                         const FeatureMatrix& attack_stream) {
  if (benign_stream.empty() || attack_stream.empty())
    throw std::invalid_argument("cumad_trial_metrics: empty stream");

  const auto benign_scores = score_all(model, benign_stream);
  const auto attack_scores = score_all(model, attack_stream);
  const auto benign_trials = detail::run_trials(benign_scores, profile.t_as, sprt_cfg);
  const auto attack_trials = detail::run_trials(attack_scores, profile.t_as, sprt_cfg);

  MetricsReport r;
  std::vector<std::uint64_t> detection_sizes;
  for (const auto& t : attack_trials) {
    if (t.accepted_h1) {
      ++r.tp;
      detection_sizes.push_back(t.n_used);
    } else {
      ++r.fn;
    }
  }
  for (const auto& t : benign_trials) t.accepted_h1 ? ++r.fp : ++r.tn;
  r.trials_h1 = attack_trials.size();
  r.trials_h0 = benign_trials.size();
  detail::fill_confusion_metrics(r);

  if (!detection_sizes.empty()) {
    std::uint64_t sum = 0;
    for (std::uint64_t n : detection_sizes) sum += n;
    r.mean_observations = static_cast<double>(sum) / static_cast<double>(detection_sizes.size());
    std::sort(detection_sizes.begin(), detection_sizes.end());
    std::uint64_t seen = 0;
    for (std::size_t i = 0; i < detection_sizes.size();) {
      std::size_t j = i;
      while (j < detection_sizes.size() && detection_sizes[j] == detection_sizes[i]) ++j;
      seen += j - i;
      r.observation_cdf.emplace_back(detection_sizes[i],
                                     static_cast<double>(seen) /
                                         static_cast<double>(detection_sizes.size()));
      i = j;
    }
  }
  return r;
}

/// Majority-vote baseline: each class's scores are cut into consecutive
/// non-overlapping windows; a window is flagged iff strictly more than half
/// of its points exceed T_as. Windows are the trials; a trailing partial
/// window is discarded.
inline MetricsReport window_majority_baseline(std::span<const double> scores,
                                              std::span<const Label> labels, double t_as,
                                              std::size_t window_size) {
  if (window_size < 1) throw std::invalid_argument("window_majority_baseline: window_size must be >= 1");
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("window_majority_baseline: scores and labels must align and be nonempty");

  std::vector<double> benign, attack;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (labels[i] == Label::attack ? attack : benign).push_back(scores[i]);
  if ((!benign.empty() && benign.size() < window_size) ||
      (!attack.empty() && attack.size() < window_size) || (benign.empty() && attack.empty()))
    throw std::invalid_argument("window_majority_baseline: stream shorter than one window");

  MetricsReport r;
  auto run_windows = [&](const std::vector<double>& stream, bool is_attack) {
    for (std::size_t start = 0; start + window_size <= stream.size(); start += window_size) {
      std::size_t anomalous = 0;
      for (std::size_t k = 0; k < window_size; ++k)
        anomalous += static_cast<std::size_t>(classify(stream[start + k], t_as));
      const bool flagged = 2 * anomalous > window_size;
      if (is_attack)
        flagged ? ++r.tp : ++r.fn;
      else
        flagged ? ++r.fp : ++r.tn;
    }
  };
  run_windows(attack, true);
  run_windows(benign, false);
  r.trials_h1 = r.tp + r.fn;
  r.trials_h0 = r.fp + r.tn;
  detail::fill_confusion_metrics(r);
  return r;
}

/// Point-vs-sequential false-positive improvement; a floor of half a count
/// over the benign trials keeps the ratio finite when no false positive
/// occurred.
inline double fpr_comparison_ratio(const MetricsReport& point, const MetricsReport& cumad) {
  if (cumad.trials_h0 == 0) throw std::invalid_argument("fpr_comparison_ratio: no benign trials");
  const double floor = 1.0 / (2.0 * static_cast<double>(cumad.trials_h0));
  return point.fpr / std::max(cumad.fpr, floor);
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json cdf = nlohmann::json::array();
  for (const auto& [n, frac] : r.observation_cdf) cdf.push_back({n, frac});
  return {{"accuracy", r.accuracy},
          {"recall", r.recall},
          {"precision", r.precision},
          {"f1", r.f1},
          {"fpr", r.fpr},
          {"mean_observations", r.mean_observations},
          {"observation_cdf", std::move(cdf)},
          {"trials_h1", r.trials_h1},
          {"trials_h0", r.trials_h0},
          {"tp", r.tp},
          {"fp", r.fp},
          {"tn", r.tn},
          {"fn", r.fn}};
}

}  // namespace cumad
