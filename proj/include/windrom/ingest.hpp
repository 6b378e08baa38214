#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "windrom/core.hpp"

namespace windrom {

/// Tower measurement record: one speed series per sensor height, sampled on a
/// uniform clock.
struct TowerSeries {
  std::vector<double> timestamps;      // s since day start, uniform step
  std::vector<double> sensor_heights;  // m, strictly increasing
  Eigen::MatrixXd speeds;              // n_sensors x n_samples, m/s

  int samples() const { return static_cast<int>(timestamps.size()); }
  int sensors() const { return static_cast<int>(sensor_heights.size()); }

  double step() const {
    if (samples() < 2) raise(errc::invalid_argument, "series needs at least 2 samples");
    return timestamps[1] - timestamps[0];
  }

  void validate() const {
    if (sensors() < 2) raise(errc::missing_column, "need at least 2 sensor columns");
    if (samples() < 2) raise(errc::invalid_argument, "series needs at least 2 samples");
    for (int s = 1; s < sensors(); ++s)
      if (!(sensor_heights[s] > sensor_heights[s - 1]))
        raise(errc::invalid_argument, "sensor heights must be strictly increasing");
    const double dt = step();
    if (!(dt > 0.0)) raise(errc::non_uniform_timestep, "timestamps must increase");
    const double tol = 1e-9 * std::max(1.0, std::abs(dt));
    for (int i = 1; i < samples(); ++i)
      if (std::abs((timestamps[i] - timestamps[i - 1]) - dt) > tol)
        raise(errc::non_uniform_timestep, "timestep breaks at row " + std::to_string(i + 1));
    for (int s = 0; s < sensors(); ++s)
      for (int i = 0; i < samples(); ++i) {
        const double v = speeds(s, i);
        if (!std::isfinite(v) || v < 0.0)
          raise(errc::non_finite_value, "invalid speed at row " + std::to_string(i + 1));
      }
  }
};

/// Column map for tower CSV files.  Header row is
/// `t_s,u_<h1>m,u_<h2>m,...`; when `speed_columns` is empty the heights are
/// parsed out of the `u_<h>m` column names.
struct CsvSchema {
  std::string time_column = "t_s";
  std::vector<std::pair<std::string, double>> speed_columns;  // (name, height m)
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    std::size_t start = 0;
    while (start < field.size() && field[start] == ' ') ++start;
    fields.push_back(field.substr(start));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline bool parse_speed_header(const std::string& name, double& height) {
  // u_<h>m, e.g. u_4.5m
  if (name.size() < 4 || name.compare(0, 2, "u_") != 0 || name.back() != 'm') return false;
  const std::string num = name.substr(2, name.size() - 3);
  try {
    std::size_t used = 0;
    height = std::stod(num, &used);
    return used == num.size();
  } catch (const std::exception&) {
    return false;
  }
}

inline double parse_field(const std::string& text, int row, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size())
      raise(errc::non_finite_value,
            "unparseable value in column " + column + " at row " + std::to_string(row));
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    raise(errc::non_finite_value,
          "unparseable value in column " + column + " at row " + std::to_string(row));
  }
}

}  // namespace detail

/// Load a tower CSV file (UTF-8, LF, `.` decimal).  Rejects NaN and negative
/// speeds, non-uniform timestamps, and missing columns, naming the offending
/// row or column.
inline TowerSeries load_tower_csv(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream file(path);
  if (!file) raise(errc::io_error, "cannot open " + path);

  std::string header_line;
  if (!std::getline(file, header_line))
    raise(errc::missing_column, "empty file, header row missing: " + path);
  const auto header = detail::split_csv_line(header_line);

  int time_col = -1;
  std::vector<std::pair<int, double>> speed_cols;  // (column index, height)
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == schema.time_column) time_col = static_cast<int>(c);
  }
  if (time_col < 0)
    raise(errc::missing_column, "time column '" + schema.time_column + "' not found in " + path);

  if (schema.speed_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      double h = 0.0;
      if (detail::parse_speed_header(header[c], h)) speed_cols.emplace_back(static_cast<int>(c), h);
    }
  } else {
    for (const auto& [name, height] : schema.speed_columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end())
        raise(errc::missing_column, "speed column '" + name + "' not found in " + path);
      speed_cols.emplace_back(static_cast<int>(it - header.begin()), height);
    }
  }
  if (speed_cols.size() < 2)
    raise(errc::missing_column, "need at least 2 speed columns in " + path);
  std::sort(speed_cols.begin(), speed_cols.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });

  std::vector<double> timestamps;
  std::vector<std::vector<double>> speeds(speed_cols.size());
  std::string line;
  int row = 1;  // data rows, 1-based
  while (std::getline(file, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() < header.size())
      raise(errc::missing_column, "row " + std::to_string(row) + " has too few fields");
    timestamps.push_back(detail::parse_field(fields[time_col], row, schema.time_column));
    for (std::size_t s = 0; s < speed_cols.size(); ++s) {
      const auto& [col, height] = speed_cols[s];
      const double v = detail::parse_field(fields[col], row, header[col]);
      if (std::isnan(v) || std::isinf(v))
        raise(errc::non_finite_value,
              "non-finite speed in column " + header[col] + " at row " + std::to_string(row));
      if (v < 0.0)
        raise(errc::non_finite_value,
              "negative speed in column " + header[col] + " at row " + std::to_string(row));
      speeds[s].push_back(v);
    }
    ++row;
  }

  TowerSeries series;
  series.timestamps = std::move(timestamps);
  series.sensor_heights.reserve(speed_cols.size());
  for (const auto& [col, height] : speed_cols) series.sensor_heights.push_back(height);
  series.speeds.resize(static_cast<Eigen::Index>(speed_cols.size()),
                       static_cast<Eigen::Index>(series.timestamps.size()));
  for (std::size_t s = 0; s < speeds.size(); ++s)
    for (std::size_t i = 0; i < speeds[s].size(); ++i)
      series.speeds(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = speeds[s][i];
  series.validate();
  return series;
}

/// Speed series resolved at a set of vertical levels.
struct LevelSeries {
  std::vector<double> heights;  // m, strictly increasing
  Eigen::MatrixXd data;         // n_levels x n_samples
  double step = 0.0;            // s

  int levels() const { return static_cast<int>(heights.size()); }
  int samples() const { return static_cast<int>(data.cols()); }
};

/// Pointwise linear interpolation between bracketing sensors.  Levels must lie
/// within the sensor-height span; no extrapolation.
inline LevelSeries interpolate_vertical(const TowerSeries& series,
                                        const std::vector<double>& target_levels) {
  series.validate();
  if (target_levels.empty()) raise(errc::invalid_argument, "no target levels given");

  const double lo = series.sensor_heights.front();
  const double hi = series.sensor_heights.back();

  LevelSeries out;
  out.heights = target_levels;
  out.step = series.step();
  out.data.resize(static_cast<Eigen::Index>(target_levels.size()), series.speeds.cols());

  for (std::size_t li = 0; li < target_levels.size(); ++li) {
    const double h = target_levels[li];
    if (h < lo || h > hi)
      raise(errc::level_out_of_range,
            "level " + std::to_string(h) + " outside sensor span [" + std::to_string(lo) + ", " +
                std::to_string(hi) + "]");
    // bracketing sensors; exact hits copy the sensor row bit-for-bit
    auto it = std::lower_bound(series.sensor_heights.begin(), series.sensor_heights.end(), h);
    if (it != series.sensor_heights.end() && *it == h) {
      out.data.row(static_cast<Eigen::Index>(li)) =
          series.speeds.row(it - series.sensor_heights.begin());
      continue;
    }
    const auto upper = it - series.sensor_heights.begin();
    const auto lower = upper - 1;
    const double h0 = series.sensor_heights[lower];
    const double h1 = series.sensor_heights[upper];
    const double w = (h - h0) / (h1 - h0);
    for (Eigen::Index c = 0; c < series.speeds.cols(); ++c)
      out.data(static_cast<Eigen::Index>(li), c) =
          std::lerp(series.speeds(lower, c), series.speeds(upper, c), w);
  }
  return out;
}

enum class DxRule { per_interval, global_mean };

/// Stack one day of level series into snapshots: each interval's consecutive
/// samples become the along-wind axis (frozen-turbulence stacking).  Snapshot
/// spacing follows the interval's own mean speed unless the global rule is
/// selected.
inline VelocityEnsemble build_snapshots(const LevelSeries& levels, double interval_s,
                                        DxRule rule = DxRule::per_interval) {
  if (levels.levels() < 2) raise(errc::invalid_argument, "need at least 2 levels");
  if (!(levels.step > 0.0)) raise(errc::invalid_argument, "sample step must be positive");
  if (!(interval_s > 0.0)) raise(errc::invalid_argument, "interval must be positive");
  for (int i = 1; i < levels.levels(); ++i)
    if (!(levels.heights[i] > levels.heights[i - 1]))
      raise(errc::invalid_argument, "levels must be strictly increasing");

  const double day_s = levels.samples() * levels.step;
  const double nx_f = interval_s / levels.step;
  const double n_int_f = day_s / interval_s;
  const auto nx = static_cast<int>(std::llround(nx_f));
  const auto n_intervals = static_cast<int>(std::llround(n_int_f));
  if (nx < 1 || std::abs(nx_f - nx) > 1e-9)
    raise(errc::interval_not_divisor, "interval is not a multiple of the sample step");
  if (n_intervals < 1 || std::abs(n_int_f - n_intervals) > 1e-9)
    raise(errc::interval_not_divisor,
          "day of " + std::to_string(day_s) + " s is not divisible by interval " +
              std::to_string(interval_s) + " s");

  const int nz = levels.levels();
  VelocityEnsemble day;
  day.grid.z_levels = levels.heights;
  day.grid.nx = nx;
  day.grid.interval_s = interval_s;
  day.n_realizations = 1;
  day.n_intervals = n_intervals;
  day.data.resize(static_cast<std::size_t>(n_intervals) * nz * nx);
  day.interval_dx.resize(n_intervals);

  const double global_mean = levels.data.mean();
  for (int t = 0; t < n_intervals; ++t) {
    double interval_sum = 0.0;
    for (int z = 0; z < nz; ++z)
      for (int x = 0; x < nx; ++x) {
        const double v = levels.data(z, static_cast<Eigen::Index>(t) * nx + x);
        day.at(0, t, z, x) = v;
        interval_sum += v;
      }
    const double mean_speed = rule == DxRule::global_mean
                                  ? global_mean
                                  : interval_sum / static_cast<double>(nz * nx);
    day.interval_dx[t] = mean_speed * interval_s / nx;
  }
  double dx_sum = 0.0;
  for (double d : day.interval_dx) dx_sum += d;
  day.grid.dx = dx_sum / n_intervals;
  day.validate();
  return day;
}

/// Stack conforming one-day slices along the realization axis.
inline VelocityEnsemble assemble_ensemble(const std::vector<VelocityEnsemble>& days) {
  if (days.empty()) raise(errc::invalid_argument, "no days to assemble");
  const auto& first = days.front();
  for (const auto& day : days) {
    if (!day.grid.same_layout(first.grid))
      raise(errc::shape_mismatch, "day grids differ (z levels, nx, or interval)");
    if (day.n_intervals != first.n_intervals)
      raise(errc::shape_mismatch, "day interval counts differ");
  }

  VelocityEnsemble ens;
  ens.grid = first.grid;
  ens.n_intervals = first.n_intervals;
  ens.n_realizations = 0;
  for (const auto& day : days) ens.n_realizations += day.n_realizations;
  ens.data.reserve(static_cast<std::size_t>(ens.n_realizations) * ens.n_intervals *
                   ens.grid.points());
  ens.interval_dx.reserve(static_cast<std::size_t>(ens.n_realizations) * ens.n_intervals);
  double dx_sum = 0.0;
  for (const auto& day : days) {
    ens.data.insert(ens.data.end(), day.data.begin(), day.data.end());
    ens.interval_dx.insert(ens.interval_dx.end(), day.interval_dx.begin(),
                           day.interval_dx.end());
    dx_sum += day.grid.dx * day.n_realizations;
  }
  ens.grid.dx = dx_sum / ens.n_realizations;
  ens.validate();
  return ens;
}

}  // namespace windrom
