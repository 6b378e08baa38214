#pragma once

// Shared fixtures and independent oracles for the test suites.  Oracles here
// deliberately avoid the library's solution paths: the Jacobi eigensolver is
// hand-rolled, covariances are triple loops, reconstruction errors are direct
// summations.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "windrom/bd.hpp"
#include "windrom/core.hpp"
#include "windrom/rng.hpp"

namespace testsup {

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("windrom_" + tag + "_" + std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

/// Cyclic Jacobi rotations; independent of Eigen's tridiagonal QR route.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi_eigen(Eigen::MatrixXd a,
                                                                int max_sweeps = 100) {
  const auto n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n);
        g(p, p) = c;
        g(q, q) = c;
        g(p, q) = s;
        g(q, p) = -s;
        a = g.transpose() * a * g;
        v = v * g;
      }
  }
  // sort descending
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  Eigen::VectorXd eigenvalues(n);
  Eigen::MatrixXd vectors(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    eigenvalues[i] = a(order[i], order[i]);
    vectors.col(i) = v.col(order[i]);
  }
  return {eigenvalues, vectors};
}

/// Smooth vector: a handful of low-order Fourier components.
inline Eigen::VectorXd smooth_vector(int n, int harmonics, windrom::RngStream& rng) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int h = 1; h <= harmonics; ++h) {
    const double amp_c = rng.normal();
    const double amp_s = rng.normal();
    for (int i = 0; i < n; ++i) {
      const double phase = 2.0 * std::numbers::pi * h * (i + 0.5) / n;
      out[i] += amp_c * std::cos(phase) + amp_s * std::sin(phase);
    }
  }
  return out;
}

/// Gram-Schmidt columns orthonormal under the diagonal weight: col' W col = 1.
inline Eigen::MatrixXd orthonormalize(Eigen::MatrixXd cols, const Eigen::VectorXd& weights) {
  for (Eigen::Index j = 0; j < cols.cols(); ++j) {
    for (Eigen::Index k = 0; k < j; ++k) {
      const double proj = cols.col(k).dot(weights.cwiseProduct(cols.col(j)));
      cols.col(j) -= proj * cols.col(k);
    }
    const double norm = std::sqrt(cols.col(j).dot(weights.cwiseProduct(cols.col(j))));
    cols.col(j) /= norm;
  }
  return cols;
}

/// Random ensemble with a fixed grid; values are offset-free Gaussian noise
/// shaped by a few smooth modes plus a base speed.
inline windrom::VelocityEnsemble random_ensemble(int n_realizations, int n_intervals, int nz,
                                                 int nx, std::uint64_t seed,
                                                 double base_speed = 5.0) {
  windrom::RngStream rng(seed);
  windrom::VelocityEnsemble ens;
  ens.grid.nx = nx;
  ens.grid.dx = 1.5;
  ens.grid.interval_s = 60.0;
  ens.grid.z_levels.resize(nz);
  for (int z = 0; z < nz; ++z) ens.grid.z_levels[z] = 4.5 + 0.5 * z;
  ens.n_realizations = n_realizations;
  ens.n_intervals = n_intervals;
  ens.data.resize(static_cast<std::size_t>(n_realizations) * n_intervals * nz * nx);
  ens.interval_dx.assign(static_cast<std::size_t>(n_realizations) * n_intervals, ens.grid.dx);
  for (auto& v : ens.data) v = base_speed + rng.normal();
  return ens;
}

struct SeparableSpec {
  int n_realizations = 8;
  int n_intervals = 16;
  int nz = 4;
  int nx = 10;
  std::vector<double> scales = {3.0, 2.0, 1.0};
  double coeff_mean = 1.5;  // nonzero so the mean-sense covariance keeps every term
  std::uint64_t seed = 42;
  double base_speed = 0.0;
};

/// Ensemble built from exactly `scales.size()` separable terms:
///   v_k(t, p) = base + sum_i coeff(k, i) * spatial(p, i) * temporal(t, i)
/// with temporal factors time-mean-free and orthonormal under the discrete
/// temporal norm, and spatial factors orthonormal under the weighted spatial
/// inner product.  The time-mean-free factors make the grand mean exactly the
/// base field, so mean removal leaves the separable structure intact.
struct SeparableFixture {
  windrom::VelocityEnsemble ensemble;
  Eigen::MatrixXd temporal;  // n_intervals x terms
  Eigen::MatrixXd spatial;   // points x terms
  Eigen::MatrixXd coeff;     // n_realizations x terms
  Eigen::VectorXd weights;   // spatial quadrature weights
};

inline SeparableFixture make_separable(const SeparableSpec& spec) {
  windrom::RngStream rng(spec.seed);
  const int terms = static_cast<int>(spec.scales.size());
  const int points = spec.nz * spec.nx;

  SeparableFixture fx;
  fx.ensemble.grid.nx = spec.nx;
  fx.ensemble.grid.dx = 2.0;
  fx.ensemble.grid.interval_s = 600.0;
  fx.ensemble.grid.z_levels.resize(spec.nz);
  for (int z = 0; z < spec.nz; ++z) fx.ensemble.grid.z_levels[z] = 4.5 + 0.5 * z;
  fx.ensemble.n_realizations = spec.n_realizations;
  fx.ensemble.n_intervals = spec.n_intervals;

  const double dt = fx.ensemble.grid.interval_s;
  const double w = fx.ensemble.grid.dz() * fx.ensemble.grid.dx;
  fx.weights = Eigen::VectorXd::Constant(points, w);

  Eigen::MatrixXd temporal(spec.n_intervals, terms);
  for (int i = 0; i < terms; ++i) {
    Eigen::VectorXd t = smooth_vector(spec.n_intervals, 2 + i, rng);
    t.array() -= t.mean();  // time-mean-free
    temporal.col(i) = t;
  }
  fx.temporal =
      orthonormalize(temporal, Eigen::VectorXd::Constant(spec.n_intervals, dt));

  Eigen::MatrixXd spatial(points, terms);
  for (int i = 0; i < terms; ++i) {
    windrom::RngStream mode_rng(windrom::mix_seed(spec.seed, 100 + i));
    spatial.col(i) = smooth_vector(points, 3 + i, mode_rng);
  }
  fx.spatial = orthonormalize(spatial, fx.weights);

  fx.coeff.resize(spec.n_realizations, terms);
  for (int k = 0; k < spec.n_realizations; ++k)
    for (int i = 0; i < terms; ++i)
      fx.coeff(k, i) = spec.scales[i] * (spec.coeff_mean + rng.normal());

  fx.ensemble.data.assign(
      static_cast<std::size_t>(spec.n_realizations) * spec.n_intervals * points, 0.0);
  fx.ensemble.interval_dx.assign(
      static_cast<std::size_t>(spec.n_realizations) * spec.n_intervals, fx.ensemble.grid.dx);
  for (int k = 0; k < spec.n_realizations; ++k)
    for (int t = 0; t < spec.n_intervals; ++t)
      for (int p = 0; p < points; ++p) {
        double v = spec.base_speed;
        for (int i = 0; i < terms; ++i)
          v += fx.coeff(k, i) * fx.spatial(p, i) * fx.temporal(t, i);
        fx.ensemble.data[(static_cast<std::size_t>(k) * spec.n_intervals + t) * points + p] = v;
      }
  return fx;
}

/// Relative squared reconstruction error of the leading-M expansion in the
/// mean-sense norm, by direct summation.
inline double bd_mean_norm_error(const windrom::FluctuationEnsemble& fluct,
                                 const windrom::BdModel& bd, int M) {
  const int n = fluct.n_realizations;
  const int m = fluct.n_intervals;
  const int points = fluct.grid.points();
  const double w = fluct.point_weight();

  // ensemble mean of the data and of the reconstruction
  Eigen::MatrixXd ubar = Eigen::MatrixXd::Zero(m, points);
  for (int r = 0; r < n; ++r) ubar += fluct.realization(r);
  ubar /= static_cast<double>(n);

  Eigen::MatrixXd recon = Eigen::MatrixXd::Zero(m, points);
  for (int i = 0; i < M; ++i) {
    Eigen::VectorXd abar = bd.realization_modes[i].colwise().mean().transpose();
    recon += bd.temporal_modes.col(i) * abar.transpose();
  }

  double err = 0.0, total = 0.0;
  for (int t = 0; t < m; ++t)
    for (int p = 0; p < points; ++p) {
      const double d = ubar(t, p) - recon(t, p);
      err += w * d * d * bd.dt;
      total += w * ubar(t, p) * ubar(t, p) * bd.dt;
    }
  return total > 0 ? err / total : 0.0;
}

}  // namespace testsup
