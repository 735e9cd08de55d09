#pragma once

// Threshold calibration from benign reconstruction errors: T_as is the
// mean plus one (population) standard deviation of the scores, and theta0
// is the proportion of benign points scoring above it, clamped away from
// {0, 1} so the SPRT log-ratio steps stay finite.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "cumad/autoencoder.hpp"
#include "cumad/stats.hpp"

namespace cumad {

struct DetectorProfile {
  double t_as = 0.0;
  double mu = 0.0;          // mean benign score
  double sigma = 0.0;       // population std of benign scores
  double theta0 = 0.0;      // clamped anomaly proportion
  double theta0_raw = 0.0;  // proportion before clamping
  std::string device_id;
};

struct ThresholdEstimate {
  double t_as = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
};

inline ThresholdEstimate calibrate_threshold(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("calibrate_threshold: empty score set");
  const MeanVariance mv = population_stats(scores);
  const double sigma = std::sqrt(mv.variance);
  return {mv.mean + sigma, mv.mean, sigma};
}

inline ThresholdEstimate calibrate_threshold(const AutoencoderModel& model, const FeatureMatrix& benign) {
  if (benign.empty()) throw std::invalid_argument("calibrate_threshold: empty benign set");
  return calibrate_threshold(score_all(model, benign));
}

/// Proportion of scores strictly above t_as, clamped to
/// [1/(2n), 1 - 1/(2n)]. The raw proportion is reported via `raw`.
inline double estimate_theta0(std::span<const double> scores, double t_as, double* raw = nullptr) {
  if (scores.empty()) throw std::invalid_argument("estimate_theta0: empty score set");
  std::size_t flagged = 0;
  for (double s : scores)
    if (s > t_as) ++flagged;
  const double n = static_cast<double>(scores.size());
  const double proportion = static_cast<double>(flagged) / n;
  if (raw) *raw = proportion;
  const double floor = 1.0 / (2.0 * n);
  return std::clamp(proportion, floor, 1.0 - floor);
}

inline double estimate_theta0(const AutoencoderModel& model, const FeatureMatrix& data, double t_as,
                              double* raw = nullptr) {
  if (data.empty()) throw std::invalid_argument("estimate_theta0: empty data set");
  return estimate_theta0(score_all(model, data), t_as, raw);
}

/// Single anomaly verdict: 1 iff the score strictly exceeds the threshold.
inline int classify(double score, double t_as) {
  if (!std::isfinite(score)) throw std::invalid_argument("classify: score must be finite");
  return score > t_as ? 1 : 0;
}

/// Full calibration pass over a benign set: threshold, score moments, and
/// the theta0 estimate, all computed on the same scores.
inline DetectorProfile calibrate(const AutoencoderModel& model, const FeatureMatrix& benign,
                                 const std::string& device_id) {
  if (benign.empty()) throw std::invalid_argument("calibrate: empty benign set");
  const auto scores = score_all(model, benign);
  const ThresholdEstimate th = calibrate_threshold(scores);
  DetectorProfile p;
  p.t_as = th.t_as;
  p.mu = th.mu;
  p.sigma = th.sigma;
  p.theta0 = estimate_theta0(scores, th.t_as, &p.theta0_raw);
  p.device_id = device_id;
  return p;
}

}  // namespace cumad
