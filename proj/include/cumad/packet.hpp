#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cumad/csv.hpp"

namespace cumad {

enum class Protocol { tcp, udp, other };
enum class Direction { outgoing, incoming };

/// One observed packet; direction is relative to the monitored device.
struct PacketRecord {
  double timestamp = 0.0;  // fractional seconds since epoch
  std::string src_mac;
  std::string src_ip;
  std::string dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::other;
  std::uint32_t size = 0;  // bytes, >= 1
  Direction direction = Direction::outgoing;
};

inline std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::tcp: return "tcp";
    case Protocol::udp: return "udp";
    default: return "other";
  }
}

inline std::string_view to_string(Direction d) {
  return d == Direction::outgoing ? "outgoing" : "incoming";
}

namespace detail {

inline const char* kPacketColumns[9] = {"timestamp", "src_mac", "src_ip",   "dst_ip", "src_port",
                                        "dst_port",  "protocol", "size",     "direction"};

inline Protocol parse_protocol(std::string_view s) {
  if (s == "tcp") return Protocol::tcp;
  if (s == "udp") return Protocol::udp;
  if (s == "other") return Protocol::other;
  throw std::runtime_error("unknown protocol '" + std::string(s) + "'");
}

inline Direction parse_direction(std::string_view s) {
  if (s == "outgoing") return Direction::outgoing;
  if (s == "incoming") return Direction::incoming;
  throw std::runtime_error("unknown direction '" + std::string(s) + "'");
}

}  // namespace detail

/// Parses a packet-record CSV. Header row is required and must name the
/// columns timestamp,src_mac,src_ip,dst_ip,src_port,dst_port,protocol,size,direction.
inline std::vector<PacketRecord> load_packet_csv(const std::string& path) {
  csv::LineReader reader(path);
  std::string line;
  if (!reader.next(line))
    throw std::runtime_error(path + ": empty file, header row required");
  {
    auto fields = csv::split_fields(line);
    if (fields.size() != 9)
      throw std::runtime_error(path + ": line 1: header must have 9 columns");
    for (std::size_t i = 0; i < 9; ++i)
      if (csv::trim(fields[i]) != detail::kPacketColumns[i])
        throw std::runtime_error(path + ": line 1: expected header column '" +
                                 std::string(detail::kPacketColumns[i]) + "', got '" +
                                 std::string(fields[i]) + "'");
  }

  std::vector<PacketRecord> packets;
  while (reader.next(line)) {
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split_fields(line);
    const std::string where = path + ": line " + std::to_string(reader.lineno());
    if (fields.size() != 9)
      throw std::runtime_error(where + ": expected 9 columns, got " + std::to_string(fields.size()));
    try {
      PacketRecord pkt;
      if (!csv::parse_double(fields[0], pkt.timestamp) || !std::isfinite(pkt.timestamp))
        throw std::runtime_error("bad timestamp '" + std::string(fields[0]) + "'");
      pkt.src_mac = std::string(csv::trim(fields[1]));
      pkt.src_ip = std::string(csv::trim(fields[2]));
      pkt.dst_ip = std::string(csv::trim(fields[3]));
      std::uint64_t port;
      if (!csv::parse_u64(fields[4], port) || port > 65535)
        throw std::runtime_error("bad src_port '" + std::string(fields[4]) + "'");
      pkt.src_port = static_cast<std::uint16_t>(port);
      if (!csv::parse_u64(fields[5], port) || port > 65535)
        throw std::runtime_error("bad dst_port '" + std::string(fields[5]) + "'");
      pkt.dst_port = static_cast<std::uint16_t>(port);
      pkt.protocol = detail::parse_protocol(csv::trim(fields[6]));
      std::uint64_t sz;
      if (!csv::parse_u64(fields[7], sz) || sz == 0 || sz > UINT32_MAX)
        throw std::runtime_error("bad size '" + std::string(fields[7]) + "' (positive bytes required)");
      pkt.size = static_cast<std::uint32_t>(sz);
      pkt.direction = detail::parse_direction(csv::trim(fields[8]));
      packets.push_back(std::move(pkt));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  return packets;
}

}  // namespace cumad
