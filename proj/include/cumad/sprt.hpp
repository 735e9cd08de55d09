#pragma once

// Wald's sequential probability ratio test over a Bernoulli observation
// stream. The cumulative log-likelihood ratio performs a random walk with
// precomputed step constants; hitting the upper bound accepts H1 (device
// compromised, terminal until re-armed), hitting the lower bound accepts
// H0 and silently resets the walk so monitoring continues.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace cumad {

struct SprtConfig {
  double theta0 = 0.2;  // anomaly probability under H0 (device normal)
  double theta1 = 0.8;  // anomaly probability under H1 (device compromised)
  double alpha = 0.01;  // desired false positive rate
  double beta = 0.01;   // desired false negative rate

  void validate() const {
    if (!(theta0 > 0.0 && theta0 < theta1 && theta1 < 1.0))
      throw std::invalid_argument("sprt: require 0 < theta0 < theta1 < 1, got theta0=" +
                                  std::to_string(theta0) + " theta1=" + std::to_string(theta1));
    if (!(alpha > 0.0 && alpha < 0.5) || !(beta > 0.0 && beta < 0.5))
      throw std::invalid_argument("sprt: require alpha, beta in (0, 0.5)");
  }
};

/// Decision bounds (A, B) with A = ln(beta/(1-alpha)), B = ln((1-beta)/alpha).
inline std::pair<double, double> sprt_bounds(double alpha, double beta) {
  if (!(alpha > 0.0 && alpha < 0.5) || !(beta > 0.0 && beta < 0.5))
    throw std::invalid_argument("sprt_bounds: require alpha, beta in (0, 0.5)");
  return {std::log(beta / (1.0 - alpha)), std::log((1.0 - beta) / alpha)};
}

enum class SprtStatus { active, accepted_h1 };

enum class DecisionKind { continue_observing, accept_h0, accept_h1 };

struct Decision {
  DecisionKind kind = DecisionKind::continue_observing;
  double lambda_at_decision = 0.0;
  std::uint64_t n_used = 0;
};

struct SprtState {
  SprtConfig config;
  double lambda = 0.0;               // cumulative log-likelihood ratio
  std::uint64_t n_observations = 0;  // since last reset
  double step_anom = 0.0;            // ln(theta1/theta0), added on observation 1
  double step_norm = 0.0;            // ln((1-theta1)/(1-theta0)), added on observation 0
  double bound_lo = 0.0;             // A
  double bound_hi = 0.0;             // B
  SprtStatus status = SprtStatus::active;
};

inline SprtState make_sprt(const SprtConfig& cfg) {
  cfg.validate();
  SprtState st;
  st.config = cfg;
  st.step_anom = std::log(cfg.theta1 / cfg.theta0);
  st.step_norm = std::log((1.0 - cfg.theta1) / (1.0 - cfg.theta0));
  auto [a, b] = sprt_bounds(cfg.alpha, cfg.beta);
  st.bound_lo = a;
  st.bound_hi = b;
  return st;
}

/// Folds one Bernoulli observation into the walk. Accepting H1 leaves the
/// state terminal; accepting H0 resets lambda and the observation count.
inline Decision observe(SprtState& state, int observation) {
  if (state.status != SprtStatus::active)
    throw std::logic_error("sprt: observation on a terminated test; re-arm first");
  if (observation != 0 && observation != 1)
    throw std::invalid_argument("sprt: observation must be 0 or 1");

  state.lambda += observation == 1 ? state.step_anom : state.step_norm;
  ++state.n_observations;

  if (state.lambda >= state.bound_hi) {
    state.status = SprtStatus::accepted_h1;
    return {DecisionKind::accept_h1, state.lambda, state.n_observations};
  }
  if (state.lambda <= state.bound_lo) {
    Decision d{DecisionKind::accept_h0, state.lambda, state.n_observations};
    state.lambda = 0.0;
    state.n_observations = 0;
    return d;
  }
  return {DecisionKind::continue_observing, state.lambda, state.n_observations};
}

struct SprtSimulation {
  double h1_rate = 0.0;           // fraction of trials accepting H1
  double h0_rate = 0.0;           // fraction of trials accepting H0
  double mean_observations = 0.0; // observations per trial until first accept
};

/// Runs seeded Bernoulli(true_theta) streams until each reaches a decision.
inline SprtSimulation simulate_error_rates(const SprtConfig& cfg, double true_theta,
                                           std::size_t trials, std::uint64_t seed) {
  cfg.validate();
  if (trials < 1) throw std::invalid_argument("sprt: trials must be >= 1");
  if (!(true_theta >= 0.0 && true_theta <= 1.0))
    throw std::invalid_argument("sprt: true_theta must lie in [0, 1]");

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution draw(true_theta);
  std::uint64_t h1 = 0;
  std::uint64_t total_n = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    SprtState st = make_sprt(cfg);
    while (true) {
      Decision d = observe(st, draw(rng) ? 1 : 0);
      if (d.kind == DecisionKind::continue_observing) continue;
      total_n += d.n_used;
      if (d.kind == DecisionKind::accept_h1) ++h1;
      break;
    }
  }
  SprtSimulation sim;
  sim.h1_rate = static_cast<double>(h1) / static_cast<double>(trials);
  sim.h0_rate = static_cast<double>(trials - h1) / static_cast<double>(trials);
  sim.mean_observations = static_cast<double>(total_n) / static_cast<double>(trials);
  return sim;
}

}  // namespace cumad
