#pragma once

// Feature-matrix container plus dataset tooling: CSV ingestion, benign
// three-way partitioning, balanced test-set assembly, and a synthetic
// correlated generator for desk-scale experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cumad/csv.hpp"

namespace cumad {

inline constexpr std::size_t kFeatureDim = 115;

enum class Label : int { benign = 0, attack = 1 };

/// Row-major matrix of behavioral snapshots for one device.
/// `labels` is either empty (unlabeled) or holds one entry per row.
struct FeatureMatrix {
  std::string device_id;
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<Label> labels;

  std::size_t size() const { return width == 0 ? 0 : values.size() / width; }
  bool empty() const { return values.empty(); }
  bool labeled() const { return !labels.empty(); }

  std::span<const double> row(std::size_t i) const { return {values.data() + i * width, width}; }

  void push_row(std::span<const double> r) {
    if (width == 0) width = r.size();
    if (r.size() != width)
      throw std::invalid_argument("row width " + std::to_string(r.size()) +
                                  " does not match matrix width " + std::to_string(width));
    values.insert(values.end(), r.begin(), r.end());
  }

  void push_row(std::span<const double> r, Label label) {
    push_row(r);
    labels.push_back(label);
  }

  std::size_t count(Label label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
  }
};

struct DatasetSplit {
  FeatureMatrix train;           // D_t
  FeatureMatrix validation;      // D_v
  FeatureMatrix holdout_benign;  // reserved for the balanced test set
  FeatureMatrix test;            // D_tst, filled by build_balanced_test
};

struct SyntheticSpec {
  std::size_t n_benign = 0;
  std::size_t n_attack = 0;
  std::size_t dim = kFeatureDim;
  double benign_correlation = 0.0;  // pairwise feature correlation, in [0, 1)
  double attack_shift = 0.0;        // per-feature mean offset in benign-std units
  std::uint64_t seed = 0;

  void validate() const {
    if (n_benign == 0 || n_attack == 0) throw std::invalid_argument("synthetic: row counts must be > 0");
    if (dim == 0) throw std::invalid_argument("synthetic: dim must be > 0");
    if (!(benign_correlation >= 0.0 && benign_correlation < 1.0))
      throw std::invalid_argument("synthetic: correlation must lie in [0, 1)");
    if (!(attack_shift >= 0.0)) throw std::invalid_argument("synthetic: attack_shift must be >= 0");
  }
};

namespace detail {

inline void parse_data_row(const std::vector<std::string_view>& fields, std::size_t width,
                           const std::string& path, std::size_t lineno, std::vector<double>& out) {
  if (fields.size() != width)
    throw std::runtime_error(path + ": row " + std::to_string(lineno) + ": expected " +
                             std::to_string(width) + " columns, got " + std::to_string(fields.size()));
  out.clear();
  for (std::size_t c = 0; c < fields.size(); ++c) {
    double v;
    if (!csv::parse_double(fields[c], v) || !std::isfinite(v))
      throw std::runtime_error(path + ": row " + std::to_string(lineno) + ", column " +
                               std::to_string(c + 1) + ": not a finite number: '" +
                               std::string(fields[c]) + "'");
    out.push_back(v);
  }
}

inline bool row_is_numeric(const std::vector<std::string_view>& fields) {
  double v;
  for (const auto& f : fields)
    if (!csv::parse_double(f, v)) return false;
  return true;
}

}  // namespace detail

/// Reads a feature CSV (optional one-line header, `width` numeric columns)
/// and labels every row with `label`.
inline FeatureMatrix load_feature_csv(const std::string& path, Label label,
                                      const std::string& device_id,
                                      std::size_t width = kFeatureDim) {
  csv::LineReader reader(path);
  FeatureMatrix m;
  m.device_id = device_id;
  m.width = width;
  std::string line;
  std::vector<double> row;
  bool first_content = true;
  while (reader.next(line)) {
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split_fields(line);
    if (first_content) {
      first_content = false;
      if (!detail::row_is_numeric(fields)) {
        // Header row: permitted and skipped, but it must name every column.
        if (fields.size() != width)
          throw std::runtime_error(path + ": header has " + std::to_string(fields.size()) +
                                   " columns, expected " + std::to_string(width));
        continue;
      }
    }
    detail::parse_data_row(fields, width, path, reader.lineno(), row);
    m.push_row(row, label);
  }
  if (m.empty()) throw std::runtime_error(path + ": no data rows");
  return m;
}

/// Reads a feature CSV with a trailing label column (0 benign, 1 attack).
inline FeatureMatrix load_labeled_csv(const std::string& path, const std::string& device_id,
                                      std::size_t width = kFeatureDim) {
  csv::LineReader reader(path);
  FeatureMatrix m;
  m.device_id = device_id;
  m.width = width;
  std::string line;
  std::vector<double> row;
  bool first_content = true;
  while (reader.next(line)) {
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split_fields(line);
    if (first_content) {
      first_content = false;
      if (!detail::row_is_numeric(fields)) {
        if (fields.size() != width + 1 || csv::trim(fields.back()) != "label")
          throw std::runtime_error(path + ": label column missing (expected " +
                                   std::to_string(width) + " feature columns plus 'label')");
        continue;
      }
    }
    detail::parse_data_row(fields, width + 1, path, reader.lineno(), row);
    const double lab = row.back();
    row.pop_back();
    if (lab != 0.0 && lab != 1.0)
      throw std::runtime_error(path + ": row " + std::to_string(reader.lineno()) +
                               ": label must be 0 or 1, got " + csv::format_double(lab));
    m.push_row(row, lab == 0.0 ? Label::benign : Label::attack);
  }
  if (m.empty()) throw std::runtime_error(path + ": no data rows");
  return m;
}

/// Writes rows (plus a trailing `label` column when the matrix is labeled).
/// `names` overrides the generated f1..fN header; pass header=false to omit.
inline void write_feature_csv(const FeatureMatrix& m, std::ostream& out,
                              const std::vector<std::string>& names = {}, bool header = true) {
  if (header) {
    for (std::size_t c = 0; c < m.width; ++c) {
      if (c) out << ',';
      out << (names.empty() ? "f" + std::to_string(c + 1) : names.at(c));
    }
    if (m.labeled()) out << ",label";
    out << '\n';
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto r = m.row(i);
    for (std::size_t c = 0; c < m.width; ++c) {
      if (c) out << ',';
      out << csv::format_double(r[c]);
    }
    if (m.labeled()) out << ',' << (m.labels[i] == Label::attack ? '1' : '0');
    out << '\n';
  }
}

/// Splits benign rows into three near-equal disjoint parts (train,
/// validation, holdout). Remainder rows go to the earlier parts. A seeded
/// uniform shuffle precedes the split unless chronological order is asked.
inline DatasetSplit partition_benign(const FeatureMatrix& benign, std::uint64_t seed,
                                     bool chronological = false) {
  const std::size_t n = benign.size();
  if (n < 3) throw std::invalid_argument("partition_benign: need at least 3 rows, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!chronological) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  const std::size_t base = n / 3, rem = n % 3;
  const std::size_t sizes[3] = {base + (rem > 0 ? 1 : 0), base + (rem > 1 ? 1 : 0), base};

  DatasetSplit split;
  FeatureMatrix* parts[3] = {&split.train, &split.validation, &split.holdout_benign};
  std::size_t pos = 0;
  for (int p = 0; p < 3; ++p) {
    parts[p]->device_id = benign.device_id;
    parts[p]->width = benign.width;
    for (std::size_t k = 0; k < sizes[p]; ++k, ++pos) {
      const std::size_t i = order[pos];
      if (benign.labeled())
        parts[p]->push_row(benign.row(i), benign.labels[i]);
      else
        parts[p]->push_row(benign.row(i));
    }
  }
  return split;
}

/// All holdout benign rows plus a seeded uniform sample of equally many
/// attack rows; relative order within each class is preserved.
inline FeatureMatrix build_balanced_test(const FeatureMatrix& holdout_benign,
                                         const FeatureMatrix& attack, std::uint64_t seed) {
  const std::size_t nb = holdout_benign.size();
  const std::size_t na = attack.size();
  if (na < nb)
    throw std::invalid_argument("build_balanced_test: " + std::to_string(na) +
                                " attack rows < " + std::to_string(nb) + " benign rows");
  if (holdout_benign.width != attack.width)
    throw std::invalid_argument("build_balanced_test: width mismatch");

  std::vector<std::size_t> all(na), picked;
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), nb, rng);

  FeatureMatrix test;
  test.device_id = holdout_benign.device_id;
  test.width = holdout_benign.width;
  for (std::size_t i = 0; i < nb; ++i) test.push_row(holdout_benign.row(i), Label::benign);
  for (std::size_t i : picked) test.push_row(attack.row(i), Label::attack);
  return test;
}

/// Correlated synthetic traffic features from a shared latent factor.
/// Feature j of a benign row is s_j*sqrt(c)*f + sqrt(1-c)*tau*e_j with
/// seeded random loading signs s_j, factor f ~ N(0,1), noise e_j ~ N(0,1),
/// and a per-row burst scale tau (a small fraction of rows carries inflated
/// noise, giving the right-skewed anomaly scores real traffic shows).
/// Marginal variances are 1 and every feature pair correlates with
/// magnitude c. Attack rows add `attack_shift` to every feature, which the
/// sign-mixed loadings keep off the factor direction.
inline std::pair<FeatureMatrix, FeatureMatrix> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution burst(0.1);
  const double indiv = std::sqrt(1.0 - spec.benign_correlation);
  // E[tau^2] = 0.9*low^2 + 0.1*high^2 = 1 with high/low = 3
  const double tau_low = std::sqrt(1.0 / 1.8);
  const double tau_high = std::sqrt(9.0 / 1.8);

  std::vector<double> loading(spec.dim);
  for (double& l : loading)
    l = (rng() & 1 ? 1.0 : -1.0) * std::sqrt(spec.benign_correlation);

  auto draw_rows = [&](std::size_t n, double shift, Label label) {
    FeatureMatrix m;
    m.device_id = "synthetic";
    m.width = spec.dim;
    std::vector<double> row(spec.dim);
    for (std::size_t i = 0; i < n; ++i) {
      const double factor = gauss(rng);
      const double tau = burst(rng) ? tau_high : tau_low;
      for (std::size_t j = 0; j < spec.dim; ++j)
        row[j] = loading[j] * factor + indiv * tau * gauss(rng) + shift;
      m.push_row(row, label);
    }
    return m;
  };

  FeatureMatrix benign = draw_rows(spec.n_benign, 0.0, Label::benign);
  FeatureMatrix attack = draw_rows(spec.n_attack, spec.attack_shift, Label::attack);
  return {std::move(benign), std::move(attack)};
}

}  // namespace cumad
