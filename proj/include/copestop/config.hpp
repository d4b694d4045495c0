#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "copestop/errors.hpp"
#include "copestop/simulator.hpp"

namespace copestop {

/// A parsed scenario: the simulation parameters plus the master seed.
struct ScenarioConfig {
  SimConfig sim;
  std::uint64_t seed = 1;
};

inline PolicyKind parse_policy(const std::string& value) {
  if (value == "optimal-stopping") return PolicyKind::OptimalStopping;
  if (value == "immediate-send") return PolicyKind::ImmediateSend;
  if (value == "no-coding") return PolicyKind::NoCoding;
  throw ConfigError("policy",
                    "must be one of optimal-stopping | immediate-send | no-coding, got '" +
                        value + "'");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_number(const std::string& key, std::string_view value) {
  try {
    std::size_t used = 0;
    const std::string text(value);
    const double parsed = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError(key, "not a number: '" + std::string(value) + "'");
  }
}

inline long long parse_integer(const std::string& key, std::string_view value) {
  long long parsed = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw ConfigError(key, "not an integer: '" + std::string(value) + "'");
  return parsed;
}

inline std::string shortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace detail

/// Parses the flat `key = value` format (one pair per line, `#` comments).
/// Unknown and duplicate keys are rejected; omitted keys keep their
/// defaults. node_count is the one mandatory key.
inline ScenarioConfig parse_config(std::string_view text) {
  ScenarioConfig out;
  SimConfig& sim = out.sim;
  std::set<std::string> seen;
  bool have_node_count = false;

  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? text.size() - start
                                                                             : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(std::string(line), "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (!seen.insert(key).second) throw ConfigError(key, "duplicate key");

    if (key == "node_count") {
      sim.node_count = static_cast<int>(detail::parse_integer(key, value));
      have_node_count = true;
    } else if (key == "field_width") {
      sim.field_width = detail::parse_number(key, value);
    } else if (key == "field_height") {
      sim.field_height = detail::parse_number(key, value);
    } else if (key == "radius") {
      sim.radius = detail::parse_number(key, value);
    } else if (key == "flow_count") {
      sim.flow_count = static_cast<int>(detail::parse_integer(key, value));
    } else if (key == "packet_rate") {
      sim.packet_rate = detail::parse_number(key, value);
    } else if (key == "opportunity_rate") {
      sim.opportunity_rate = detail::parse_number(key, value);
    } else if (key == "report_rate") {
      sim.report_rate = detail::parse_number(key, value);
    } else if (key == "policy") {
      sim.policy = parse_policy(value);
    } else if (key == "delay_discount") {
      sim.delay_discount = detail::parse_number(key, value);
    } else if (key == "buffer_size") {
      sim.buffer_size = static_cast<int>(detail::parse_integer(key, value));
    } else if (key == "gain_slope") {
      sim.gain_slope = detail::parse_number(key, value);
    } else if (key == "gain_intercept") {
      sim.gain_intercept = detail::parse_number(key, value);
    } else if (key == "lms_taps") {
      sim.lms_taps = static_cast<int>(detail::parse_integer(key, value));
    } else if (key == "lms_step") {
      sim.lms_step = detail::parse_number(key, value);
    } else if (key == "measurement_tick") {
      sim.measurement_tick = detail::parse_number(key, value);
    } else if (key == "loss_probability") {
      sim.loss_probability = detail::parse_number(key, value);
    } else if (key == "horizon") {
      sim.horizon = detail::parse_number(key, value);
    } else if (key == "arrival_stop") {
      sim.arrival_stop = detail::parse_number(key, value);
    } else if (key == "bitrate_bps") {
      sim.bitrate_bps = detail::parse_number(key, value);
    } else if (key == "packet_size_bytes") {
      sim.packet_size_bytes = static_cast<int>(detail::parse_integer(key, value));
    } else if (key == "seed") {
      const long long s = detail::parse_integer(key, value);
      if (s < 0) throw ConfigError(key, "must be >= 0");
      out.seed = static_cast<std::uint64_t>(s);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  if (!have_node_count) throw ConfigError("node_count", "missing required key");
  sim.validate();
  return out;
}

inline ScenarioConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

/// Canonical echo of the effective configuration, defaults included.
inline std::string echo_config(const ScenarioConfig& cfg) {
  const SimConfig& s = cfg.sim;
  std::ostringstream out;
  out << "node_count = " << s.node_count << '\n'
      << "field_width = " << detail::shortest(s.field_width) << '\n'
      << "field_height = " << detail::shortest(s.field_height) << '\n'
      << "radius = " << detail::shortest(s.radius) << '\n'
      << "flow_count = " << s.flow_count << '\n'
      << "packet_rate = " << detail::shortest(s.packet_rate) << '\n'
      << "opportunity_rate = " << detail::shortest(s.opportunity_rate) << '\n'
      << "report_rate = " << detail::shortest(s.report_rate) << '\n'
      << "policy = " << policy_name(s.policy) << '\n'
      << "delay_discount = " << detail::shortest(s.delay_discount) << '\n'
      << "buffer_size = " << s.buffer_size << '\n'
      << "gain_slope = " << detail::shortest(s.gain_slope) << '\n'
      << "gain_intercept = " << detail::shortest(s.gain_intercept) << '\n'
      << "lms_taps = " << s.lms_taps << '\n'
      << "lms_step = " << detail::shortest(s.lms_step) << '\n'
      << "measurement_tick = " << detail::shortest(s.measurement_tick) << '\n'
      << "loss_probability = " << detail::shortest(s.loss_probability) << '\n'
      << "horizon = " << detail::shortest(s.horizon) << '\n'
      << "arrival_stop = " << detail::shortest(s.arrival_stop) << '\n'
      << "bitrate_bps = " << detail::shortest(s.bitrate_bps) << '\n'
      << "packet_size_bytes = " << s.packet_size_bytes << '\n'
      << "seed = " << cfg.seed << '\n';
  return out.str();
}

}  // namespace copestop
