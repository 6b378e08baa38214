#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "windrom/core.hpp"
#include "windrom/kde.hpp"
#include "windrom/kle.hpp"

namespace windrom {

/// Flat key=value pipeline configuration.  Every field has a default and the
/// full effective set is echoed into the model file.
struct PipelineConfig {
  double interval_s = 600.0;
  int inner_product_type = 0;
  double bd_energy_threshold = 0.90;
  double kle_energy_threshold = 0.90;
  std::string bandwidth_rule = "approx";  // approx | exact
  int welch_segment = 256;
  double welch_overlap = 0.5;
  std::uint64_t seed = 1;
  int levels = 20;            // vertical levels after interpolation
  bool kle_unbiased = false;  // divisor n-1 instead of n
  bool global_dx = false;     // day-mean snapshot spacing instead of per-interval
  bool dump_covariance = false;

  BandwidthRule bandwidth() const {
    if (bandwidth_rule == "approx") return BandwidthRule::approx;
    if (bandwidth_rule == "exact") return BandwidthRule::exact;
    raise(errc::invalid_argument, "bandwidth_rule must be approx or exact");
  }

  CovarianceEstimator kle_estimator() const {
    return kle_unbiased ? CovarianceEstimator::unbiased : CovarianceEstimator::population;
  }

  void validate() const {
    if (!(interval_s > 0.0) || std::fmod(86400.0, interval_s) != 0.0)
      raise(errc::invalid_argument, "interval must divide 86400 s");
    if (inner_product_type < 0 || inner_product_type > 2)
      raise(errc::invalid_argument, "inner_product_type must be 0, 1, or 2");
    if (!(bd_energy_threshold > 0.0) || bd_energy_threshold > 1.0)
      raise(errc::invalid_argument, "bd_energy_threshold must lie in (0, 1]");
    if (!(kle_energy_threshold > 0.0) || kle_energy_threshold > 1.0)
      raise(errc::invalid_argument, "kle_energy_threshold must lie in (0, 1]");
    if (welch_segment < 2) raise(errc::invalid_argument, "welch_segment must be >= 2");
    if (!(welch_overlap >= 0.0) || welch_overlap >= 1.0)
      raise(errc::invalid_argument, "welch_overlap must lie in [0, 1)");
    if (levels < 2) raise(errc::invalid_argument, "levels must be >= 2");
    bandwidth();
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Serialize in a fixed key order so identical configs give identical text.
inline std::string config_to_text(const PipelineConfig& c) {
  std::string out;
  out += "interval_s=" + detail::format_double(c.interval_s) + "\n";
  out += "inner_product_type=" + std::to_string(c.inner_product_type) + "\n";
  out += "bd_energy_threshold=" + detail::format_double(c.bd_energy_threshold) + "\n";
  out += "kle_energy_threshold=" + detail::format_double(c.kle_energy_threshold) + "\n";
  out += "bandwidth_rule=" + c.bandwidth_rule + "\n";
  out += "welch_segment=" + std::to_string(c.welch_segment) + "\n";
  out += "welch_overlap=" + detail::format_double(c.welch_overlap) + "\n";
  out += "seed=" + std::to_string(c.seed) + "\n";
  out += "levels=" + std::to_string(c.levels) + "\n";
  out += std::string("kle_unbiased=") + (c.kle_unbiased ? "true" : "false") + "\n";
  out += std::string("global_dx=") + (c.global_dx ? "true" : "false") + "\n";
  out += std::string("dump_covariance=") + (c.dump_covariance ? "true" : "false") + "\n";
  return out;
}

inline void apply_config_line(PipelineConfig& c, const std::string& key,
                              const std::string& value) {
  const auto as_double = [&] {
    try {
      return std::stod(value);
    } catch (const std::exception&) {
      raise(errc::invalid_argument, "bad numeric value for " + key);
    }
  };
  const auto as_bool = [&] {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    raise(errc::invalid_argument, "bad boolean value for " + key);
  };
  if (key == "interval_s") c.interval_s = as_double();
  else if (key == "inner_product_type") c.inner_product_type = static_cast<int>(as_double());
  else if (key == "bd_energy_threshold") c.bd_energy_threshold = as_double();
  else if (key == "kle_energy_threshold") c.kle_energy_threshold = as_double();
  else if (key == "bandwidth_rule") c.bandwidth_rule = value;
  else if (key == "welch_segment") c.welch_segment = static_cast<int>(as_double());
  else if (key == "welch_overlap") c.welch_overlap = as_double();
  else if (key == "seed") c.seed = std::stoull(value);
  else if (key == "levels") c.levels = static_cast<int>(as_double());
  else if (key == "kle_unbiased") c.kle_unbiased = as_bool();
  else if (key == "global_dx") c.global_dx = as_bool();
  else if (key == "dump_covariance") c.dump_covariance = as_bool();
  else raise(errc::invalid_argument, "unknown config key: " + key);
}

inline PipelineConfig parse_config_text(const std::string& text) {
  PipelineConfig config;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      raise(errc::invalid_argument, "config line " + std::to_string(line_no) + " lacks '='");
    apply_config_line(config, line.substr(0, eq), line.substr(eq + 1));
  }
  return config;
}

inline PipelineConfig load_config_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) raise(errc::io_error, "cannot open config " + path);
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace windrom
