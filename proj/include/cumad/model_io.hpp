#pragma once

// Model file format: one self-describing JSON document holding the layer
// dimensions, activations, normalization vectors, parameters in row-major
// layer order, and (when calibrated) the detector calibration block.
// Doubles are serialized with round-trip precision.

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

#include "cumad/autoencoder.hpp"
#include "cumad/calibration.hpp"

namespace cumad {

inline constexpr int kModelFormatVersion = 1;

struct SavedModel {
  AutoencoderModel model;
  std::optional<DetectorProfile> calibration;
};

inline void save_model(const std::string& path, const AutoencoderModel& model,
                       const DetectorProfile* calibration = nullptr) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["layer_dims"] = model.layer_dims;
  j["hidden_activation"] = "rectifier";
  j["output_activation"] = "linear";
  j["seed"] = model.seed;
  j["norm_mean"] = model.norm_mean;
  j["norm_std"] = model.norm_std;
  nlohmann::json weights = nlohmann::json::array();
  for (const Matrix& w : model.weights) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < w.rows; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t c = 0; c < w.cols; ++c) row.push_back(w(r, c));
      rows.push_back(std::move(row));
    }
    weights.push_back(std::move(rows));
  }
  j["weights"] = std::move(weights);
  j["biases"] = model.biases;
  if (calibration) {
    j["calibration"] = {{"t_as", calibration->t_as},
                        {"mu", calibration->mu},
                        {"sigma", calibration->sigma},
                        {"theta0", calibration->theta0},
                        {"theta0_raw", calibration->theta0_raw},
                        {"device_id", calibration->device_id}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << j.dump(1) << '\n';
}

inline SavedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("model file " + path + " is not valid JSON: " + e.what());
  }

  auto fail = [&](const std::string& why) -> std::runtime_error {
    return std::runtime_error("model file " + path + ": " + why);
  };

  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw fail("unsupported format version " + std::to_string(version) + " (supported: " +
                 std::to_string(kModelFormatVersion) + ")");
    if (j.at("hidden_activation").get<std::string>() != "rectifier" ||
        j.at("output_activation").get<std::string>() != "linear")
      throw fail("unsupported activation");

    SavedModel sm;
    AutoencoderModel& m = sm.model;
    m.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    if (m.layer_dims.size() < 3) throw fail("layer_dims too short");
    m.seed = j.value("seed", std::uint64_t{0});
    m.norm_mean = j.at("norm_mean").get<std::vector<double>>();
    m.norm_std = j.at("norm_std").get<std::vector<double>>();
    if (m.norm_mean.size() != m.layer_dims.front() || m.norm_std.size() != m.layer_dims.front())
      throw fail("normalization vectors do not match the input dimension");
    for (double s : m.norm_std)
      if (!(s > 0.0)) throw fail("norm_std entries must be positive");

    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != m.layer_dims.size() - 1 || biases.size() != m.layer_dims.size() - 1)
      throw fail("parameter count does not match layer_dims");
    for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
      const std::size_t rows = m.layer_dims[l], cols = m.layer_dims[l + 1];
      const auto& wl = weights.at(l);
      if (wl.size() != rows) throw fail("weight matrix " + std::to_string(l) + " row count mismatch");
      Matrix w(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        const auto& row = wl.at(r);
        if (row.size() != cols)
          throw fail("weight matrix " + std::to_string(l) + " column count mismatch");
        for (std::size_t c = 0; c < cols; ++c) w(r, c) = row.at(c).get<double>();
      }
      m.weights.push_back(std::move(w));
      auto b = biases.at(l).get<std::vector<double>>();
      if (b.size() != cols) throw fail("bias vector " + std::to_string(l) + " size mismatch");
      m.biases.push_back(std::move(b));
    }

    if (j.contains("calibration")) {
      const auto& c = j.at("calibration");
      DetectorProfile p;
      p.t_as = c.at("t_as").get<double>();
      p.mu = c.at("mu").get<double>();
      p.sigma = c.at("sigma").get<double>();
      p.theta0 = c.at("theta0").get<double>();
      p.theta0_raw = c.value("theta0_raw", p.theta0);
      p.device_id = c.value("device_id", std::string{});
      sm.calibration = std::move(p);
    }
    return sm;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("model file " + path + " is malformed: " + e.what());
  }
}

}  // namespace cumad
