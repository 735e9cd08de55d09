#pragma once

// Streaming extraction of the 115-feature behavioral snapshot emitted for
// every packet: 23 statistics per window over 5 sliding windows, kept for
// four traffic aggregations (source IP, source MAC-IP, channel, socket).
//
// Per-window block layout (window-major, windows ascending):
//   [0..2]   srcip    count, mean, variance          (outgoing sizes only)
//   [3..5]   srcmacip count, mean, variance          (outgoing sizes only)
//   [6..15]  channel  count, mean, variance,
//                     iat_mean, iat_variance, iat_count,
//                     magnitude, radius, covariance, correlation
//   [16..22] socket   count, mean, variance,
//                     magnitude, radius, covariance, correlation
//
// Conventions: population variance; statistics over an empty direction or
// with a zero stddev denominator emit 0. The two-direction statistics are
//   magnitude   = sqrt(mean_out^2 + mean_in^2)
//   radius      = sqrt(var_out^2 + var_in^2)
//   covariance  = (1/m) * sum_k (out_k - mean_out)(in_k - mean_in) over the
//                 m = min(n_out, n_in) most recent index-paired packets
//   correlation = covariance / (std_out * std_in), 0 when either std is 0,
//                 clamped to [-1, 1] (the index-paired covariance ranges
//                 over a subset of the window, so the raw ratio can
//                 overshoot the Pearson bounds).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cumad/dataset.hpp"
#include "cumad/packet.hpp"

namespace cumad {

/// The five sliding-window spans in seconds, ascending.
struct WindowSpec {
  std::array<double, 5> durations{0.1, 0.5, 1.5, 10.0, 60.0};

  void validate() const {
    if (!(durations[0] > 0.0)) throw std::invalid_argument("window durations must be positive");
    for (std::size_t i = 1; i < durations.size(); ++i)
      if (!(durations[i] > durations[i - 1]))
        throw std::invalid_argument("window durations must be strictly increasing");
  }

  double largest() const { return durations.back(); }
};

inline constexpr std::size_t kStatsPerWindow = 23;
static_assert(5 * kStatsPerWindow == kFeatureDim);

/// Column names for feature CSV headers, matching the emitted order.
inline std::vector<std::string> feature_names(const WindowSpec& spec = {}) {
  static const char* kStatNames[kStatsPerWindow] = {
      "srcip_count",      "srcip_mean",      "srcip_variance",
      "srcmacip_count",   "srcmacip_mean",   "srcmacip_variance",
      "channel_count",    "channel_mean",    "channel_variance",
      "channel_iat_mean", "channel_iat_variance", "channel_iat_count",
      "channel_magnitude", "channel_radius", "channel_covariance", "channel_correlation",
      "socket_count",     "socket_mean",     "socket_variance",
      "socket_magnitude", "socket_radius",   "socket_covariance", "socket_correlation"};
  std::vector<std::string> names;
  names.reserve(kFeatureDim);
  for (double w : spec.durations) {
    std::string suffix = "_w" + csv::format_double(w) + "s";
    for (const char* s : kStatNames) names.push_back(std::string(s) + suffix);
  }
  return names;
}

/// Maintains per-aggregation event deques for one device stream and emits
/// the 115-entry snapshot for each ingested packet. Single writer per
/// stream; timestamps must be nondecreasing up to a 1 ms clamping tolerance.
class FeatureExtractor {
 public:
  static constexpr double kRegressionTolerance = 1e-3;  // seconds

  explicit FeatureExtractor(WindowSpec spec = {}) : spec_(spec) { spec_.validate(); }

  /// Ingests the next packet and returns its feature vector.
  std::vector<double> update(const PacketRecord& pkt) {
    if (pkt.size < 1) throw std::invalid_argument("packet size must be >= 1");
    if (!std::isfinite(pkt.timestamp)) throw std::invalid_argument("packet timestamp must be finite");

    double ts = pkt.timestamp;
    if (seen_any_) {
      if (ts < last_ts_) {
        if (last_ts_ - ts > kRegressionTolerance)
          throw std::runtime_error("time regression: packet timestamp " +
                                   csv::format_double(pkt.timestamp) + " is behind " +
                                   csv::format_double(last_ts_) + " by more than 1 ms");
        ts = last_ts_;  // clamp small jitter
      }
    }
    last_ts_ = ts;
    seen_any_ = true;

    const Event ev{ts, static_cast<double>(pkt.size), pkt.direction};
    const std::array<std::string, 4> keys = {srcip_key(pkt), srcmacip_key(pkt), channel_key(pkt),
                                             socket_key(pkt)};
    for (const auto& key : keys) {
      streams_[key].push_back(ev);
      expiry_.emplace_back(ts, key);
    }
    prune(ts - spec_.largest());

    std::vector<double> out(kFeatureDim, 0.0);
    const std::deque<Event>* deques[4];
    for (int k = 0; k < 4; ++k) deques[k] = &streams_.at(keys[static_cast<std::size_t>(k)]);

    std::size_t pos = 0;
    for (double w : spec_.durations) {
      const Aggregate srcip = window_aggregate(*deques[0], ts, w);
      const Aggregate srcmacip = window_aggregate(*deques[1], ts, w);
      const Aggregate channel = window_aggregate(*deques[2], ts, w);
      const Aggregate socket = window_aggregate(*deques[3], ts, w);
      out[pos++] = srcip.count;
      out[pos++] = srcip.mean;
      out[pos++] = srcip.variance;
      out[pos++] = srcmacip.count;
      out[pos++] = srcmacip.mean;
      out[pos++] = srcmacip.variance;
      out[pos++] = channel.count;
      out[pos++] = channel.mean;
      out[pos++] = channel.variance;
      out[pos++] = channel.iat_mean;
      out[pos++] = channel.iat_variance;
      out[pos++] = channel.iat_count;
      out[pos++] = channel.magnitude;
      out[pos++] = channel.radius;
      out[pos++] = channel.covariance;
      out[pos++] = channel.correlation;
      out[pos++] = socket.count;
      out[pos++] = socket.mean;
      out[pos++] = socket.variance;
      out[pos++] = socket.magnitude;
      out[pos++] = socket.radius;
      out[pos++] = socket.covariance;
      out[pos++] = socket.correlation;
    }
    return out;
  }

  const WindowSpec& spec() const { return spec_; }

  // State introspection used by the pruning-invariant tests.
  std::size_t retained_events() const {
    std::size_t n = 0;
    for (const auto& [key, dq] : streams_) n += dq.size();
    return n;
  }
  double oldest_event_timestamp() const {
    double oldest = std::numeric_limits<double>::infinity();
    for (const auto& [key, dq] : streams_)
      if (!dq.empty()) oldest = std::min(oldest, dq.front().ts);
    return oldest;
  }
  double latest_timestamp() const { return last_ts_; }

  static std::string srcip_key(const PacketRecord& p) { return "ip|" + p.src_ip; }
  static std::string srcmacip_key(const PacketRecord& p) { return "mi|" + p.src_mac + "|" + p.src_ip; }
  static std::string channel_key(const PacketRecord& p) {
    return p.src_ip <= p.dst_ip ? "ch|" + p.src_ip + "|" + p.dst_ip
                                : "ch|" + p.dst_ip + "|" + p.src_ip;
  }
  static std::string socket_key(const PacketRecord& p) {
    std::string a = p.src_ip + ":" + std::to_string(p.src_port);
    std::string b = p.dst_ip + ":" + std::to_string(p.dst_port);
    return a <= b ? "sk|" + a + "|" + b : "sk|" + b + "|" + a;
  }

 private:
  struct Event {
    double ts;
    double size;
    Direction dir;
  };

  struct Aggregate {
    double count = 0, mean = 0, variance = 0;
    double iat_mean = 0, iat_variance = 0, iat_count = 0;
    double magnitude = 0, radius = 0, covariance = 0, correlation = 0;
  };

  static Aggregate window_aggregate(const std::deque<Event>& events, double now, double window) {
    const double cutoff = now - window;
    auto first = std::upper_bound(events.begin(), events.end(), cutoff,
                                  [](double v, const Event& e) { return v < e.ts; });

    std::vector<double> out_sizes, in_sizes, out_ts;
    for (auto it = first; it != events.end(); ++it) {
      if (it->dir == Direction::outgoing) {
        out_sizes.push_back(it->size);
        out_ts.push_back(it->ts);
      } else {
        in_sizes.push_back(it->size);
      }
    }

    Aggregate agg;
    agg.count = static_cast<double>(out_sizes.size());
    const auto [mean_out, var_out] = mean_variance(out_sizes);
    agg.mean = mean_out;
    agg.variance = var_out;

    if (out_ts.size() >= 2) {
      std::vector<double> gaps(out_ts.size() - 1);
      for (std::size_t i = 0; i + 1 < out_ts.size(); ++i) gaps[i] = out_ts[i + 1] - out_ts[i];
      const auto [gm, gv] = mean_variance(gaps);
      agg.iat_mean = gm;
      agg.iat_variance = gv;
      agg.iat_count = static_cast<double>(gaps.size());
    }

    const auto [mean_in, var_in] = mean_variance(in_sizes);
    agg.magnitude = std::sqrt(mean_out * mean_out + mean_in * mean_in);
    agg.radius = std::sqrt(var_out * var_out + var_in * var_in);

    const std::size_t m = std::min(out_sizes.size(), in_sizes.size());
    if (m > 0) {
      double cov = 0.0;
      for (std::size_t k = 1; k <= m; ++k)
        cov += (out_sizes[out_sizes.size() - k] - mean_out) * (in_sizes[in_sizes.size() - k] - mean_in);
      agg.covariance = cov / static_cast<double>(m);
      const double sd_out = std::sqrt(var_out), sd_in = std::sqrt(var_in);
      if (sd_out > 0.0 && sd_in > 0.0)
        agg.correlation = std::clamp(agg.covariance / (sd_out * sd_in), -1.0, 1.0);
    }
    return agg;
  }

  static std::pair<double, double> mean_variance(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, ss / static_cast<double>(xs.size())};
  }

  void prune(double cutoff) {
    while (!expiry_.empty() && expiry_.front().first <= cutoff) {
      const std::string key = std::move(expiry_.front().second);
      expiry_.pop_front();
      auto it = streams_.find(key);
      if (it == streams_.end()) continue;
      auto& dq = it->second;
      while (!dq.empty() && dq.front().ts <= cutoff) dq.pop_front();
      if (dq.empty()) streams_.erase(it);
    }
  }

  WindowSpec spec_;
  bool seen_any_ = false;
  double last_ts_ = 0.0;
  std::unordered_map<std::string, std::deque<Event>> streams_;
  std::deque<std::pair<double, std::string>> expiry_;
};

/// One feature row per packet, in input order. Update failures are
/// rethrown with the offending packet index.
inline FeatureMatrix extract_stream(std::span<const PacketRecord> packets,
                                    const WindowSpec& spec = {},
                                    const std::string& device_id = "") {
  FeatureExtractor extractor(spec);
  FeatureMatrix m;
  m.device_id = device_id;
  m.width = kFeatureDim;
  for (std::size_t i = 0; i < packets.size(); ++i) {
    try {
      m.push_row(extractor.update(packets[i]));
    } catch (const std::exception& e) {
      throw std::runtime_error("packet " + std::to_string(i) + ": " + e.what());
    }
  }
  return m;
}

}  // namespace cumad
