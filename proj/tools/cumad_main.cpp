// Command-line entry point: extract features from packet traces, train and
// calibrate per-device models, run detection over feature streams, evaluate
// against labeled test data, and generate synthetic datasets.

#include <cstdint>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cumad/cumad.hpp"

namespace {

constexpr std::uint64_t kDefaultSeed = 1;

bool g_no_timestamps = false;

void log_line(const std::string& msg) {
  if (!g_no_timestamps) {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    std::cout << '[' << buf << "] ";
  }
  std::cout << msg << '\n';
}

struct SprtFlags {
  std::optional<double> theta0, theta1, alpha, beta;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--theta0", theta0, "anomaly probability under H0 (default: calibrated estimate)");
    cmd->add_option("--theta1", theta1, "anomaly probability under H1 (default: 0.8)");
    cmd->add_option("--alpha", alpha, "desired false positive rate (default: 0.01)");
    cmd->add_option("--beta", beta, "desired false negative rate (default: 0.01)");
  }

  cumad::SprtOverrides overrides() const { return {theta0, theta1, alpha, beta}; }
};

cumad::SprtConfig config_for(const cumad::DetectorProfile& profile, const cumad::SprtOverrides& o) {
  cumad::SprtConfig cfg;
  cfg.theta0 = profile.theta0;
  cfg.theta1 = cumad::kDefaultTheta1;
  cfg.alpha = cumad::kDefaultAlpha;
  cfg.beta = cumad::kDefaultBeta;
  return o.apply(cfg);
}

/// Benign training input: plain 115-column feature CSV, or a labeled CSV
/// from which only the benign rows are kept.
cumad::FeatureMatrix load_benign_csv(const std::string& path, const std::string& device_id) {
  std::ifstream probe(path);
  if (!probe) throw std::runtime_error("cannot open file: " + path);
  std::string first_line;
  std::getline(probe, first_line);
  const std::size_t cols = cumad::csv::split_fields(first_line).size();
  probe.close();

  if (cols == cumad::kFeatureDim)
    return cumad::load_feature_csv(path, cumad::Label::benign, device_id);
  cumad::FeatureMatrix labeled = cumad::load_labeled_csv(path, device_id);
  cumad::FeatureMatrix benign;
  benign.device_id = device_id;
  benign.width = labeled.width;
  for (std::size_t i = 0; i < labeled.size(); ++i)
    if (labeled.labels[i] == cumad::Label::benign) benign.push_row(labeled.row(i), cumad::Label::benign);
  if (benign.empty()) throw std::runtime_error(path + ": no benign rows");
  return benign;
}

/// Homogeneous labeled stream for evaluation; every row must carry the
/// expected class label.
cumad::FeatureMatrix load_class_csv(const std::string& path, cumad::Label expected) {
  cumad::FeatureMatrix m = cumad::load_labeled_csv(path, "");
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.labels[i] != expected)
      throw std::runtime_error(path + ": row " + std::to_string(i + 1) + " is not labeled " +
                               (expected == cumad::Label::benign ? "benign (0)" : "attack (1)"));
  return m;
}

std::vector<cumad::StreamRecord> load_stream_csv(const std::string& path,
                                                 const std::string& default_device) {
  cumad::csv::LineReader reader(path);
  std::string line;
  if (!reader.next(line)) throw std::runtime_error(path + ": empty file, header row required");
  auto header = cumad::csv::split_fields(line);
  const bool has_device = !header.empty() && cumad::csv::trim(header.front()) == "device_id";
  const bool has_label = !header.empty() && cumad::csv::trim(header.back()) == "label";
  const std::size_t feature_cols = header.size() - (has_device ? 1 : 0) - (has_label ? 1 : 0);
  if (feature_cols != cumad::kFeatureDim)
    throw std::runtime_error(path + ": header names " + std::to_string(feature_cols) +
                             " feature columns, expected " + std::to_string(cumad::kFeatureDim));
  if (!has_device && default_device.empty())
    throw std::runtime_error(path + ": stream has no device_id column; pass --device");

  std::vector<cumad::StreamRecord> records;
  while (reader.next(line)) {
    if (cumad::csv::trim(line).empty()) continue;
    auto fields = cumad::csv::split_fields(line);
    if (fields.size() != header.size())
      throw std::runtime_error(path + ": line " + std::to_string(reader.lineno()) + ": expected " +
                               std::to_string(header.size()) + " columns, got " +
                               std::to_string(fields.size()));
    cumad::StreamRecord rec;
    rec.device_id = has_device ? std::string(cumad::csv::trim(fields.front())) : default_device;
    rec.features.reserve(cumad::kFeatureDim);
    const std::size_t first = has_device ? 1 : 0;
    for (std::size_t c = first; c < first + cumad::kFeatureDim; ++c) {
      double v;
      if (!cumad::csv::parse_double(fields[c], v) || !std::isfinite(v))
        throw std::runtime_error(path + ": line " + std::to_string(reader.lineno()) + ", column " +
                                 std::to_string(c + 1) + ": not a finite number");
      rec.features.push_back(v);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// --- subcommands -----------------------------------------------------------

int cmd_simulate(const cumad::SyntheticSpec& spec, const std::string& benign_out,
                 const std::string& attack_out) {
  auto [benign, attack] = cumad::generate_synthetic(spec);
  std::ofstream bo(benign_out), ao(attack_out);
  if (!bo) throw std::runtime_error("cannot write " + benign_out);
  if (!ao) throw std::runtime_error("cannot write " + attack_out);
  cumad::write_feature_csv(benign, bo);
  cumad::write_feature_csv(attack, ao);
  log_line("wrote " + std::to_string(benign.size()) + " benign rows to " + benign_out);
  log_line("wrote " + std::to_string(attack.size()) + " attack rows to " + attack_out);
  return 0;
}

int cmd_extract(const std::string& packets_path, const std::string& out_path) {
  const auto packets = cumad::load_packet_csv(packets_path);
  const cumad::FeatureMatrix features = cumad::extract_stream(packets, {}, "");
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  cumad::write_feature_csv(features, out, cumad::feature_names());
  log_line("extracted " + std::to_string(features.size()) + " feature rows to " + out_path);
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& model_out, const std::string& device,
              std::uint64_t seed, const cumad::TrainConfig& cfg, bool chronological,
              std::optional<double> theta0_override) {
  cumad::TrainConfig train_cfg = cfg;
  train_cfg.seed = seed;
  const cumad::FeatureMatrix benign = load_benign_csv(data_path, device);
  const cumad::DatasetSplit split = cumad::partition_benign(benign, seed, chronological);
  log_line("partitioned " + std::to_string(benign.size()) + " benign rows into " +
           std::to_string(split.train.size()) + "/" + std::to_string(split.validation.size()) + "/" +
           std::to_string(split.holdout_benign.size()));

  std::vector<std::size_t> dims = {115, 87, 58, 38, 29, 38, 58, 87, 115};
  cumad::AutoencoderModel model = cumad::make_autoencoder(dims, seed);
  auto [trained, report] = cumad::train(model, split.train, split.validation, train_cfg);

  cumad::FeatureMatrix calibration_set = split.train;
  for (std::size_t i = 0; i < split.validation.size(); ++i)
    calibration_set.push_row(split.validation.row(i), cumad::Label::benign);
  cumad::DetectorProfile profile = cumad::calibrate(trained, calibration_set, device);
  if (theta0_override) profile.theta0 = *theta0_override;
  cumad::save_model(model_out, trained, &profile);

  log_line("epochs run: " + std::to_string(report.epochs_run()) + " (best epoch " +
           std::to_string(report.best_epoch) + ", " + report.stopping_reason + ")");
  log_line("train mse: first " + cumad::csv::format_double(report.train_mse.front()) + ", best val " +
           cumad::csv::format_double(report.validation_mse[report.best_epoch - 1]));
  log_line("T_as = " + cumad::csv::format_double(profile.t_as) + " (mu " +
           cumad::csv::format_double(profile.mu) + ", sigma " + cumad::csv::format_double(profile.sigma) +
           "), theta0 = " + cumad::csv::format_double(profile.theta0) + " (raw " +
           cumad::csv::format_double(profile.theta0_raw) + ")");
  log_line("model written to " + model_out);
  return 0;
}

int cmd_calibrate(const std::string& model_path, const std::string& data_path,
                  const std::string& out_path, const std::string& device,
                  std::optional<double> theta0_override) {
  cumad::SavedModel sm = cumad::load_model(model_path);
  const std::string device_id =
      !device.empty() ? device : (sm.calibration ? sm.calibration->device_id : "");
  const cumad::FeatureMatrix benign = load_benign_csv(data_path, device_id);
  cumad::DetectorProfile profile = cumad::calibrate(sm.model, benign, device_id);
  if (theta0_override) profile.theta0 = *theta0_override;
  cumad::save_model(out_path.empty() ? model_path : out_path, sm.model, &profile);
  log_line("T_as = " + cumad::csv::format_double(profile.t_as) + ", theta0 = " +
           cumad::csv::format_double(profile.theta0) + " (raw " +
           cumad::csv::format_double(profile.theta0_raw) + ")");
  return 0;
}

int cmd_detect(const std::vector<std::string>& model_paths, const std::string& config_path,
               const std::string& stream_path, const std::string& alerts_path,
               const std::string& default_device, const cumad::SprtOverrides& cli_overrides,
               bool skip_unknown) {
  cumad::DeviceRegistry registry;
  if (!config_path.empty()) {
    const cumad::DetectorConfig cfg = cumad::parse_detector_config(config_path);
    for (const auto& entry : cfg.devices) {
      cumad::SprtOverrides o = cli_overrides;  // CLI flag > config file > default
      o.merge_missing_from(entry.overrides);
      o.merge_missing_from(cfg.global);
      registry.register_device(entry.device_id, entry.model_path, o);
    }
  }
  for (const auto& path : model_paths) {
    cumad::SavedModel sm = cumad::load_model(path);
    if (!sm.calibration)
      throw std::runtime_error("uncalibrated model (no calibration block): " + path);
    const std::string id = sm.calibration->device_id.empty() ? path : sm.calibration->device_id;
    registry.register_device(id, std::move(sm.model), std::move(*sm.calibration), cli_overrides);
  }
  if (registry.sessions().empty()) throw std::runtime_error("no devices registered");

  const auto records = load_stream_csv(stream_path, default_device);
  std::ofstream alert_log(alerts_path);
  if (!alert_log) throw std::runtime_error("cannot write " + alerts_path);
  const cumad::StreamSummary summary =
      cumad::run_stream(registry, records, &alert_log,
                        skip_unknown ? cumad::UnknownDevicePolicy::skip
                                     : cumad::UnknownDevicePolicy::fail);
  log_line("processed " + std::to_string(summary.processed) + " records (" +
           std::to_string(summary.skipped_unknown) + " unknown skipped, " +
           std::to_string(summary.skipped_terminal) + " post-detection skipped)");
  std::cout << "alerts: " << summary.alerts.size() << '\n';
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& benign_path,
                 const std::string& attack_path, const std::string& report_path,
                 const std::string& cdf_path, std::vector<std::size_t> windows,
                 const cumad::SprtOverrides& overrides, unsigned workers) {
  cumad::SavedModel sm = cumad::load_model(model_path);
  if (!sm.calibration)
    throw std::runtime_error("uncalibrated model (no calibration block): " + model_path);
  const cumad::AutoencoderModel& model = sm.model;
  const cumad::DetectorProfile& profile = *sm.calibration;

  const cumad::FeatureMatrix benign = load_class_csv(benign_path, cumad::Label::benign);
  const cumad::FeatureMatrix attack = load_class_csv(attack_path, cumad::Label::attack);

  cumad::FeatureMatrix combined = benign;
  for (std::size_t i = 0; i < attack.size(); ++i) combined.push_row(attack.row(i), cumad::Label::attack);

  const cumad::MetricsReport point = cumad::point_metrics(model, profile.t_as, combined);
  const cumad::SprtConfig sprt_cfg = config_for(profile, overrides);
  const cumad::MetricsReport cumad_metrics =
      cumad::cumad_trial_metrics(model, profile, sprt_cfg, benign, attack);

  const std::vector<double> scores = cumad::score_all(model, combined);
  if (windows.empty()) windows.push_back(5);
  std::vector<cumad::MetricsReport> baseline(windows.size());
  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      baseline[i] =
          cumad::window_majority_baseline(scores, combined.labels, profile.t_as, windows[i]);
  };
  if (workers <= 1 || windows.size() <= 1) {
    run_range(0, windows.size());
  } else {
    const std::size_t n_threads = std::min<std::size_t>(workers, windows.size());
    std::vector<std::thread> pool;
    const std::size_t chunk = (windows.size() + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t)
      pool.emplace_back(run_range, t * chunk, std::min(windows.size(), (t + 1) * chunk));
    for (auto& th : pool) th.join();
  }

  nlohmann::json report;
  report["device_id"] = profile.device_id;
  report["config"] = {{"model", model_path},
                      {"benign", benign_path},
                      {"attack", attack_path},
                      {"t_as", profile.t_as},
                      {"theta0", sprt_cfg.theta0},
                      {"theta1", sprt_cfg.theta1},
                      {"alpha", sprt_cfg.alpha},
                      {"beta", sprt_cfg.beta},
                      {"windows", windows}};
  report["point"] = cumad::to_json(point);
  report["cumad"] = cumad::to_json(cumad_metrics);
  nlohmann::json baselines = nlohmann::json::object();
  for (std::size_t i = 0; i < windows.size(); ++i)
    baselines[std::to_string(windows[i])] = cumad::to_json(baseline[i]);
  report["baseline"] = std::move(baselines);
  report["fpr_improvement_ratio"] = cumad::fpr_comparison_ratio(point, cumad_metrics);
  if (!g_no_timestamps) {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    report["generated_at"] = buf;
  }

  std::ofstream out(report_path);
  if (!out) throw std::runtime_error("cannot write " + report_path);
  out << report.dump(1) << '\n';

  if (!cdf_path.empty()) {
    std::ofstream cdf(cdf_path);
    if (!cdf) throw std::runtime_error("cannot write " + cdf_path);
    cdf << "observations,cumulative_fraction\n";
    for (const auto& [n, frac] : cumad_metrics.observation_cdf)
      cdf << n << ',' << cumad::csv::format_double(frac) << '\n';
  }

  log_line("point fpr " + cumad::csv::format_double(point.fpr) + ", cumad fpr " +
           cumad::csv::format_double(cumad_metrics.fpr) + ", cumad recall " +
           cumad::csv::format_double(cumad_metrics.recall) + ", mean observations " +
           cumad::csv::format_double(cumad_metrics.mean_observations));
  log_line("report written to " + report_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CUMAD: per-device autoencoder anomaly scoring with sequential hypothesis testing"};
  app.require_subcommand(1);
  app.add_flag("--no-timestamps", g_no_timestamps, "omit timestamps from log output");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate synthetic benign/attack feature data");
  cumad::SyntheticSpec spec;
  spec.n_benign = 1000;
  spec.n_attack = 1000;
  spec.benign_correlation = 0.8;
  spec.attack_shift = 4.0;
  spec.seed = kDefaultSeed;
  std::string sim_benign_out = "benign.csv", sim_attack_out = "attack.csv";
  sim->add_option("--benign-rows", spec.n_benign, "benign rows to generate");
  sim->add_option("--attack-rows", spec.n_attack, "attack rows to generate");
  sim->add_option("--dim", spec.dim, "feature dimension");
  sim->add_option("--corr", spec.benign_correlation, "pairwise benign feature correlation in [0,1)");
  sim->add_option("--shift", spec.attack_shift, "attack mean offset in benign-std units");
  sim->add_option("--seed", spec.seed, "random seed");
  sim->add_option("--benign-out", sim_benign_out, "benign output CSV (labeled)");
  sim->add_option("--attack-out", sim_attack_out, "attack output CSV (labeled)");

  // extract
  auto* ext = app.add_subcommand("extract", "packet-record CSV -> 115-feature CSV");
  std::string ext_packets, ext_out = "features.csv";
  ext->add_option("--packets", ext_packets, "packet-record CSV input")->required();
  ext->add_option("--out", ext_out, "feature CSV output");

  // train
  auto* trn = app.add_subcommand("train", "partition benign data, train and calibrate a model");
  std::string trn_data, trn_out = "model.json", trn_device = "device-0";
  std::uint64_t trn_seed = kDefaultSeed;
  cumad::TrainConfig trn_cfg;
  bool trn_chrono = false;
  std::optional<double> trn_theta0;
  trn->add_option("--data", trn_data, "benign feature CSV (plain or labeled)")->required();
  trn->add_option("--model-out", trn_out, "output model file");
  trn->add_option("--device", trn_device, "device id stored in the calibration block");
  trn->add_option("--seed", trn_seed, "random seed (partitioning, init, batches)");
  trn->add_option("--epochs", trn_cfg.max_epochs, "maximum training epochs");
  trn->add_option("--lr", trn_cfg.learning_rate, "Adam learning rate");
  trn->add_option("--batch", trn_cfg.batch_size, "mini-batch size");
  trn->add_option("--patience", trn_cfg.patience, "early-stopping patience (epochs)");
  trn->add_flag("--chronological", trn_chrono, "partition in input order instead of shuffling");
  trn->add_option("--theta0", trn_theta0, "override the stored theta0 estimate");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "recompute the calibration block of a model");
  std::string cal_model, cal_data, cal_out, cal_device;
  std::optional<double> cal_theta0;
  cal->add_option("--model", cal_model, "model file")->required();
  cal->add_option("--data", cal_data, "benign feature CSV")->required();
  cal->add_option("--out", cal_out, "output model file (default: overwrite input)");
  cal->add_option("--device", cal_device, "device id for the calibration block");
  cal->add_option("--theta0", cal_theta0, "override the stored theta0 estimate");

  // detect
  auto* det = app.add_subcommand("detect", "run detection sessions over a feature stream");
  std::vector<std::string> det_models;
  std::string det_config, det_stream, det_alerts = "alerts.jsonl", det_device;
  bool det_skip_unknown = false;
  SprtFlags det_sprt;
  det->add_option("--model", det_models, "calibrated model file (repeatable)");
  det->add_option("--config", det_config, "detector config file (per-device models and overrides)");
  det->add_option("--stream", det_stream, "feature stream CSV (device_id column or --device)")->required();
  det->add_option("--alerts", det_alerts, "alert log output (JSON lines)");
  det->add_option("--device", det_device, "device id for streams without a device_id column");
  det->add_flag("--skip-unknown", det_skip_unknown, "skip records with unknown device ids");
  det_sprt.add_to(det);

  // evaluate
  auto* evl = app.add_subcommand("evaluate", "point, sequential, and baseline metrics");
  std::string evl_model, evl_benign, evl_attack, evl_report = "report.json", evl_cdf;
  std::vector<std::size_t> evl_windows;
  unsigned evl_workers = 1;
  SprtFlags evl_sprt;
  evl->add_option("--model", evl_model, "calibrated model file")->required();
  evl->add_option("--benign", evl_benign, "labeled benign test CSV")->required();
  evl->add_option("--attack", evl_attack, "labeled attack test CSV")->required();
  evl->add_option("--report", evl_report, "JSON report output");
  evl->add_option("--cdf-out", evl_cdf, "observation CDF as two-column CSV");
  evl->add_option("--window", evl_windows, "baseline window size (repeatable; default 5)");
  evl->add_option("--workers", evl_workers, "worker threads for the baseline window sweep");
  evl_sprt.add_to(evl);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(spec, sim_benign_out, sim_attack_out);
    if (*ext) return cmd_extract(ext_packets, ext_out);
    if (*trn) return cmd_train(trn_data, trn_out, trn_device, trn_seed, trn_cfg, trn_chrono, trn_theta0);
    if (*cal) return cmd_calibrate(cal_model, cal_data, cal_out, cal_device, cal_theta0);
    if (*det)
      return cmd_detect(det_models, det_config, det_stream, det_alerts, det_device,
                        det_sprt.overrides(), det_skip_unknown);
    if (*evl)
      return cmd_evaluate(evl_model, evl_benign, evl_attack, evl_report, evl_cdf, evl_windows,
                          evl_sprt.overrides(), evl_workers);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
