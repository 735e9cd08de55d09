#pragma once

// Per-device detection sessions wiring the pipeline of score -> classify ->
// sequential test -> alert. A session that accepted H1 stays terminal until
// explicitly re-armed; H0 acceptances silently reset the test and
// monitoring continues.

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cumad/model_io.hpp"
#include "cumad/sprt.hpp"

namespace cumad {

// Operating point from the evaluation studies; theta0 defaults to the
// calibrated per-device estimate instead.
inline constexpr double kDefaultTheta1 = 0.8;
inline constexpr double kDefaultAlpha = 0.01;
inline constexpr double kDefaultBeta = 0.01;

struct Alert {
  std::string device_id;
  std::uint64_t index = 0;  // per-device input index at the decision (1-based)
  double lambda = 0.0;
  std::uint64_t n_observations = 0;
  std::string verdict = "compromised";
};

inline std::string to_jsonl(const Alert& a) {
  nlohmann::json j{{"device_id", a.device_id},
                   {"index", a.index},
                   {"lambda", a.lambda},
                   {"n_observations", a.n_observations},
                   {"verdict", a.verdict}};
  return j.dump();
}

struct SprtOverrides {
  std::optional<double> theta0, theta1, alpha, beta;

  SprtConfig apply(SprtConfig base) const {
    if (theta0) base.theta0 = *theta0;
    if (theta1) base.theta1 = *theta1;
    if (alpha) base.alpha = *alpha;
    if (beta) base.beta = *beta;
    return base;
  }

  void merge_missing_from(const SprtOverrides& other) {
    if (!theta0) theta0 = other.theta0;
    if (!theta1) theta1 = other.theta1;
    if (!alpha) alpha = other.alpha;
    if (!beta) beta = other.beta;
  }
};

struct DeviceSession {
  std::string device_id;
  AutoencoderModel model;
  DetectorProfile profile;
  SprtState sprt;
  std::uint64_t packets_seen = 0;
  std::uint64_t alerts_emitted = 0;
};

class DeviceRegistry {
 public:
  /// Loads a calibrated model file and creates a fresh session. The SPRT
  /// runs with the profile's theta0 and the default operating point unless
  /// overridden.
  DeviceSession& register_device(const std::string& device_id, const std::string& model_path,
                                 const SprtOverrides& overrides = {}) {
    if (sessions_.contains(device_id))
      throw std::invalid_argument("device already registered: " + device_id);
    SavedModel sm = load_model(model_path);
    if (!sm.calibration)
      throw std::runtime_error("uncalibrated model (no calibration block): " + model_path);
    return register_device(device_id, std::move(sm.model), std::move(*sm.calibration), overrides);
  }

  DeviceSession& register_device(const std::string& device_id, AutoencoderModel model,
                                 DetectorProfile profile, const SprtOverrides& overrides = {}) {
    if (sessions_.contains(device_id))
      throw std::invalid_argument("device already registered: " + device_id);
    SprtConfig cfg;
    cfg.theta0 = profile.theta0;
    cfg.theta1 = kDefaultTheta1;
    cfg.alpha = kDefaultAlpha;
    cfg.beta = kDefaultBeta;
    cfg = overrides.apply(cfg);
    DeviceSession session;
    session.device_id = device_id;
    session.model = std::move(model);
    session.profile = std::move(profile);
    session.sprt = make_sprt(cfg);
    return sessions_.emplace(device_id, std::move(session)).first->second;
  }

  DeviceSession* find(const std::string& device_id) {
    auto it = sessions_.find(device_id);
    return it == sessions_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, DeviceSession>& sessions() const { return sessions_; }

 private:
  std::map<std::string, DeviceSession> sessions_;
};

/// One detection step: score the snapshot, classify it against T_as, and
/// feed the verdict to the sequential test. Returns an alert exactly when
/// the test accepts H1, leaving the session terminal until re-armed.
inline std::optional<Alert> process(DeviceSession& session, std::span<const double> x) {
  if (session.sprt.status != SprtStatus::active)
    throw std::logic_error("device " + session.device_id + " is terminal; re-arm before processing");
  const double score = reconstruction_error(session.model, x);
  const int observation = classify(score, session.profile.t_as);
  const Decision decision = observe(session.sprt, observation);
  ++session.packets_seen;
  if (decision.kind != DecisionKind::accept_h1) return std::nullopt;
  Alert alert;
  alert.device_id = session.device_id;
  alert.index = session.packets_seen;
  alert.lambda = decision.lambda_at_decision;
  alert.n_observations = decision.n_used;
  ++session.alerts_emitted;
  return alert;
}

/// Re-arms a terminal session with a fresh test; alert counters persist.
inline void re_arm(DeviceSession& session) {
  if (session.sprt.status == SprtStatus::active)
    throw std::logic_error("device " + session.device_id + " is active; nothing to re-arm");
  session.sprt = make_sprt(session.sprt.config);
}

struct StreamRecord {
  std::string device_id;
  std::vector<double> features;
};

enum class UnknownDevicePolicy { fail, skip };

struct StreamSummary {
  std::uint64_t processed = 0;
  std::uint64_t skipped_unknown = 0;
  std::uint64_t skipped_terminal = 0;  // records for devices already detected
  std::vector<Alert> alerts;
};

/// Dispatches records in order to their device sessions, appending alerts
/// to `alert_log` (JSON lines) as they occur.
inline StreamSummary run_stream(DeviceRegistry& registry, std::span<const StreamRecord> records,
                                std::ostream* alert_log = nullptr,
                                UnknownDevicePolicy policy = UnknownDevicePolicy::fail) {
  StreamSummary summary;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const StreamRecord& rec = records[i];
    DeviceSession* session = registry.find(rec.device_id);
    if (!session) {
      if (policy == UnknownDevicePolicy::fail)
        throw std::runtime_error("record " + std::to_string(i) + ": unknown device id '" +
                                 rec.device_id + "'");
      ++summary.skipped_unknown;
      continue;
    }
    if (session->sprt.status != SprtStatus::active) {
      ++summary.skipped_terminal;
      continue;
    }
    std::optional<Alert> alert = process(*session, rec.features);
    ++summary.processed;
    if (alert) {
      if (alert_log) *alert_log << to_jsonl(*alert) << '\n';
      summary.alerts.push_back(std::move(*alert));
    }
  }
  return summary;
}

struct DetectorConfigEntry {
  std::string device_id;
  std::string model_path;
  SprtOverrides overrides;
};

struct DetectorConfig {
  SprtOverrides global;
  std::vector<DetectorConfigEntry> devices;
};

/// Key-value config: `theta0|theta1|alpha|beta = v` globally, and
/// `device.<id>.model|theta0|theta1|alpha|beta = v` per device. Lines
/// starting with '#' and blank lines are ignored.
inline DetectorConfig parse_detector_config(const std::string& path) {
  csv::LineReader reader(path);
  DetectorConfig cfg;
  std::map<std::string, std::size_t> device_index;

  auto entry_for = [&](const std::string& id) -> DetectorConfigEntry& {
    auto [it, inserted] = device_index.try_emplace(id, cfg.devices.size());
    if (inserted) cfg.devices.push_back({id, "", {}});
    return cfg.devices[it->second];
  };
  auto set_param = [](SprtOverrides& o, std::string_view key, double v) {
    if (key == "theta0") o.theta0 = v;
    else if (key == "theta1") o.theta1 = v;
    else if (key == "alpha") o.alpha = v;
    else if (key == "beta") o.beta = v;
    else return false;
    return true;
  };

  std::string line;
  while (reader.next(line)) {
    std::string_view s = csv::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const std::string where = path + ": line " + std::to_string(reader.lineno());
    const std::size_t eq = s.find('=');
    if (eq == std::string_view::npos) throw std::runtime_error(where + ": expected key = value");
    std::string_view key = csv::trim(s.substr(0, eq));
    std::string_view value = csv::trim(s.substr(eq + 1));

    if (key.starts_with("device.")) {
      std::string_view rest = key.substr(7);
      const std::size_t dot = rest.rfind('.');
      if (dot == std::string_view::npos || dot == 0)
        throw std::runtime_error(where + ": expected device.<id>.<param>");
      const std::string id(rest.substr(0, dot));
      std::string_view param = rest.substr(dot + 1);
      DetectorConfigEntry& entry = entry_for(id);
      if (param == "model") {
        entry.model_path = std::string(value);
        continue;
      }
      double v;
      if (!csv::parse_double(value, v))
        throw std::runtime_error(where + ": bad number '" + std::string(value) + "'");
      if (!set_param(entry.overrides, param, v))
        throw std::runtime_error(where + ": unknown per-device key '" + std::string(param) + "'");
    } else {
      double v;
      if (!csv::parse_double(value, v))
        throw std::runtime_error(where + ": bad number '" + std::string(value) + "'");
      if (!set_param(cfg.global, key, v))
        throw std::runtime_error(where + ": unknown key '" + std::string(key) + "'");
    }
  }
  for (const auto& d : cfg.devices)
    if (d.model_path.empty())
      throw std::runtime_error(path + ": device '" + d.device_id + "' has no model path");
  return cfg;
}

}  // namespace cumad
