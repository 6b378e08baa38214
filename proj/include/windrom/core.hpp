#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace windrom {

enum class errc {
  missing_column,
  non_uniform_timestep,
  non_finite_value,
  level_out_of_range,
  interval_not_divisor,
  shape_mismatch,
  not_symmetric,
  indefinite_beyond_tolerance,
  zero_eigenvalue,
  too_few_realizations,
  not_centered,
  singular_weight_matrix,
  too_few_observations,
  degenerate_model,
  series_too_short,
  length_mismatch,
  zero_source_norm,
  corrupt_model,
  unsupported_version,
  io_error,
  invalid_argument,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::missing_column: return "missing_column";
    case errc::non_uniform_timestep: return "non_uniform_timestep";
    case errc::non_finite_value: return "non_finite_value";
    case errc::level_out_of_range: return "level_out_of_range";
    case errc::interval_not_divisor: return "interval_not_divisor";
    case errc::shape_mismatch: return "shape_mismatch";
    case errc::not_symmetric: return "not_symmetric";
    case errc::indefinite_beyond_tolerance: return "indefinite_beyond_tolerance";
    case errc::zero_eigenvalue: return "zero_eigenvalue";
    case errc::too_few_realizations: return "too_few_realizations";
    case errc::not_centered: return "not_centered";
    case errc::singular_weight_matrix: return "singular_weight_matrix";
    case errc::too_few_observations: return "too_few_observations";
    case errc::degenerate_model: return "degenerate_model";
    case errc::series_too_short: return "series_too_short";
    case errc::length_mismatch: return "length_mismatch";
    case errc::zero_source_norm: return "zero_source_norm";
    case errc::corrupt_model: return "corrupt_model";
    case errc::unsupported_version: return "unsupported_version";
    case errc::io_error: return "io_error";
    case errc::invalid_argument: return "invalid_argument";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
  throw Error(code, message);
}

/// Spatial layout of one wind-field snapshot: vertical levels by along-wind
/// samples.  `dx` is the representative along-wind spacing obtained from the
/// mean advection speed over the snapshot interval.
struct SnapshotGrid {
  std::vector<double> z_levels;  // m, strictly increasing
  int nx = 0;                    // along-wind samples per snapshot
  double dx = 0.0;               // m
  double interval_s = 0.0;       // snapshot interval, s

  int nz() const { return static_cast<int>(z_levels.size()); }
  int points() const { return nz() * nx; }

  double dz() const {
    if (nz() < 2) raise(errc::invalid_argument, "grid needs at least 2 vertical levels");
    return (z_levels.back() - z_levels.front()) / static_cast<double>(nz() - 1);
  }

  // layout equality ignores dx, which varies with the recorded wind speed
  bool same_layout(const SnapshotGrid& other) const {
    return z_levels == other.z_levels && nx == other.nx && interval_s == other.interval_s;
  }

  void validate() const {
    if (nz() < 2) raise(errc::invalid_argument, "grid needs at least 2 vertical levels");
    if (nx < 1) raise(errc::invalid_argument, "grid needs nx >= 1");
    if (!(interval_s > 0.0)) raise(errc::invalid_argument, "grid interval must be positive");
    for (std::size_t i = 1; i < z_levels.size(); ++i)
      if (!(z_levels[i] > z_levels[i - 1]))
        raise(errc::invalid_argument, "z levels must be strictly increasing");
  }
};

/// Realization-by-interval ensemble of wind-speed snapshots.
/// Storage is row-major over [realization][interval][z][x]; one snapshot is a
/// contiguous block of nz*nx values, and the flattened spatial index is
/// p = z*nx + x.
struct VelocityEnsemble {
  SnapshotGrid grid;
  int n_realizations = 0;
  int n_intervals = 0;
  std::vector<double> data;
  std::vector<double> interval_dx;  // per (realization, interval) snapshot spacing, m

  std::size_t index(int r, int t, int z, int x) const {
    return ((static_cast<std::size_t>(r) * n_intervals + t) * grid.nz() + z) * grid.nx + x;
  }

  double& at(int r, int t, int z, int x) { return data[index(r, t, z, x)]; }
  double at(int r, int t, int z, int x) const { return data[index(r, t, z, x)]; }

  std::span<const double> snapshot(int r, int t) const {
    return {data.data() + index(r, t, 0, 0), static_cast<std::size_t>(grid.points())};
  }
  std::span<double> snapshot(int r, int t) {
    return {data.data() + index(r, t, 0, 0), static_cast<std::size_t>(grid.points())};
  }

  double dx_at(int r, int t) const {
    return interval_dx[static_cast<std::size_t>(r) * n_intervals + t];
  }

  void validate() const {
    grid.validate();
    if (n_realizations < 1 || n_intervals < 1)
      raise(errc::invalid_argument, "ensemble needs at least one realization and interval");
    const std::size_t expected =
        static_cast<std::size_t>(n_realizations) * n_intervals * grid.points();
    if (data.size() != expected) raise(errc::shape_mismatch, "ensemble data size mismatch");
    if (interval_dx.size() != static_cast<std::size_t>(n_realizations) * n_intervals)
      raise(errc::shape_mismatch, "per-interval dx size mismatch");
    for (double v : data)
      if (!std::isfinite(v)) raise(errc::non_finite_value, "ensemble contains non-finite value");
  }
};

/// Undo the frozen-turbulence stacking: concatenating the x-axis of every
/// interval at a fixed level reproduces the original time series.
inline std::vector<double> ensemble_to_series(const VelocityEnsemble& ens, int r, int z) {
  std::vector<double> series(static_cast<std::size_t>(ens.n_intervals) * ens.grid.nx);
  for (int t = 0; t < ens.n_intervals; ++t)
    for (int x = 0; x < ens.grid.nx; ++x)
      series[static_cast<std::size_t>(t) * ens.grid.nx + x] = ens.at(r, t, z, x);
  return series;
}

/// Deterministic eigenvector orientation: the entry of largest magnitude
/// (first such index) is made positive.
inline void canonicalize_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  double best_abs = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  if (v.size() > 0 && v[best] < 0.0) v = -v;
}

/// Smallest count whose cumulative eigenvalue mass reaches `threshold` of the
/// total.  Eigenvalues must be nonnegative and descending.
inline int energy_truncation(const Eigen::VectorXd& eigenvalues, double threshold) {
  if (!(threshold > 0.0) || threshold > 1.0)
    raise(errc::invalid_argument, "energy threshold must lie in (0, 1]");
  // sequential total so the cumulative sum reaches it bit-exactly once the
  // remaining eigenvalues are zero
  double total = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) total += eigenvalues[i];
  if (!(total > 0.0)) return 0;
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    cumulative += eigenvalues[i];
    if (cumulative >= threshold * total) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(eigenvalues.size());
}

}  // namespace windrom
