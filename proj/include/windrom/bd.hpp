#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windrom/core.hpp"

namespace windrom {

struct MeanField {
  Eigen::VectorXd values;  // flattened nz*nx
};

/// Ensemble with the grand space-field mean removed: u = v - vbar, where vbar
/// averages over every realization and interval.
struct FluctuationEnsemble {
  SnapshotGrid grid;
  int n_realizations = 0;
  int n_intervals = 0;
  std::vector<double> data;  // same layout as VelocityEnsemble
  MeanField mean;

  std::size_t index(int r, int t, int z, int x) const {
    return ((static_cast<std::size_t>(r) * n_intervals + t) * grid.nz() + z) * grid.nx + x;
  }
  double at(int r, int t, int z, int x) const { return data[index(r, t, z, x)]; }

  /// n_intervals x points matrix view of one realization
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  realization(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * n_intervals * grid.points(),
            n_intervals, grid.points()};
  }

  double point_weight() const { return grid.dz() * grid.dx; }
};

inline FluctuationEnsemble remove_mean(const VelocityEnsemble& ensemble) {
  ensemble.validate();
  const int P = ensemble.grid.points();
  const std::size_t fields = static_cast<std::size_t>(ensemble.n_realizations) * ensemble.n_intervals;

  FluctuationEnsemble fluct;
  fluct.grid = ensemble.grid;
  fluct.n_realizations = ensemble.n_realizations;
  fluct.n_intervals = ensemble.n_intervals;
  fluct.mean.values = Eigen::VectorXd::Zero(P);

  for (std::size_t f = 0; f < fields; ++f)
    for (int p = 0; p < P; ++p)
      fluct.mean.values[p] += ensemble.data[f * P + p];
  fluct.mean.values /= static_cast<double>(fields);

  fluct.data.resize(ensemble.data.size());
  for (std::size_t f = 0; f < fields; ++f)
    for (int p = 0; p < P; ++p)
      fluct.data[f * P + p] = ensemble.data[f * P + p] - fluct.mean.values[p];
  return fluct;
}

/// Temporal covariance of the fluctuation field under one of three
/// space-stochastic averaging variants:
///   type 0 - spatial integral of the product of ensemble means
///   type 1 - ensemble mean of the spatial integral
///   type 2 - their difference
struct TemporalCovariance {
  Eigen::MatrixXd C;          // n_intervals x n_intervals
  int inner_product_type = 0;
  double dt = 0.0;            // temporal quadrature weight, s
  double point_weight = 0.0;  // spatial quadrature weight dz*dx, m^2
};

inline TemporalCovariance temporal_covariance(const FluctuationEnsemble& fluct, int type = 0) {
  if (type < 0 || type > 2) raise(errc::invalid_argument, "inner product type must be 0, 1, or 2");
  const int m = fluct.n_intervals;
  const int n = fluct.n_realizations;
  const int P = fluct.grid.points();
  const double w = fluct.point_weight();

  TemporalCovariance cov;
  cov.inner_product_type = type;
  cov.dt = fluct.grid.interval_s;
  cov.point_weight = w;

  Eigen::MatrixXd mean_product;  // type-0 term
  if (type == 0 || type == 2) {
    Eigen::MatrixXd ubar = Eigen::MatrixXd::Zero(m, P);
    for (int r = 0; r < n; ++r) ubar += fluct.realization(r);
    ubar /= static_cast<double>(n);
    mean_product.noalias() = w * (ubar * ubar.transpose());
  }
  Eigen::MatrixXd integral_mean;  // type-1 term
  if (type == 1 || type == 2) {
    integral_mean = Eigen::MatrixXd::Zero(m, m);
    for (int r = 0; r < n; ++r) {
      const auto u = fluct.realization(r);
      integral_mean.noalias() += u * u.transpose();
    }
    integral_mean *= w / static_cast<double>(n);
  }

  switch (type) {
    case 0: cov.C = std::move(mean_product); break;
    case 1: cov.C = std::move(integral_mean); break;
    default: cov.C = integral_mean - mean_product; break;
  }
  cov.C = 0.5 * (cov.C + cov.C.transpose()).eval();
  return cov;
}

/// Temporal eigenpairs: eigenvalues descending; modes normalized to unit
/// discrete temporal norm (sum T^2 dt = 1) with the canonical sign.
struct TemporalEigen {
  Eigen::VectorXd eigenvalues;  // descending, zero-clamped
  Eigen::MatrixXd modes;        // n_intervals x n_intervals, column per mode
  double dt = 0.0;
};

inline TemporalEigen eigendecompose_temporal(const TemporalCovariance& cov) {
  const auto m = cov.C.rows();
  if (cov.C.cols() != m) raise(errc::shape_mismatch, "covariance must be square");
  const double scale = cov.C.cwiseAbs().maxCoeff();
  const double asym = (cov.C - cov.C.transpose()).cwiseAbs().maxCoeff();
  if (scale > 0.0 && asym > 1e-10 * scale)
    raise(errc::not_symmetric, "covariance asymmetry " + std::to_string(asym));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov.C * cov.dt);
  if (solver.info() != Eigen::Success)
    raise(errc::invalid_argument, "temporal eigensolver failed to converge");

  TemporalEigen eig;
  eig.dt = cov.dt;
  eig.eigenvalues.resize(m);
  eig.modes.resize(m, m);
  const double norm = 1.0 / std::sqrt(cov.dt);
  for (Eigen::Index i = 0; i < m; ++i) {
    eig.eigenvalues[i] = solver.eigenvalues()[m - 1 - i];
    eig.modes.col(i) = solver.eigenvectors().col(m - 1 - i) * norm;
    canonicalize_sign(eig.modes.col(i));
  }

  const double largest = eig.eigenvalues[0];
  const double smallest = eig.eigenvalues[m - 1];
  const double indef_tol = 1e-10 * std::max(std::abs(largest), std::abs(smallest));
  if (smallest < -indef_tol)
    raise(errc::indefinite_beyond_tolerance, "smallest eigenvalue " + std::to_string(smallest));
  for (Eigen::Index i = 0; i < m; ++i)
    if (eig.eigenvalues[i] < 1e-12 * largest) eig.eigenvalues[i] = 0.0;
  return eig;
}

/// Per-realization spatial fields from projecting the fluctuation data onto
/// the leading temporal modes; entry (k, p) of matrix i is the mode-i field of
/// realization k at flattened grid point p.
inline std::vector<Eigen::MatrixXd> spatial_stochastic_modes(const FluctuationEnsemble& fluct,
                                                             const TemporalEigen& eig, int M) {
  if (M < 0 || M > eig.eigenvalues.size())
    raise(errc::invalid_argument, "retained mode count out of range");
  const double largest = eig.eigenvalues.size() > 0 ? eig.eigenvalues[0] : 0.0;
  for (int i = 0; i < M; ++i)
    if (eig.eigenvalues[i] <= 1e-12 * largest || eig.eigenvalues[i] <= 0.0)
      raise(errc::zero_eigenvalue, "mode " + std::to_string(i) + " has vanishing eigenvalue");

  std::vector<Eigen::MatrixXd> modes;
  modes.reserve(M);
  const int n = fluct.n_realizations;
  const int P = fluct.grid.points();
  for (int i = 0; i < M; ++i) {
    Eigen::MatrixXd a(n, P);
    for (int r = 0; r < n; ++r)
      a.row(r) = (fluct.realization(r).transpose() * eig.modes.col(i)).transpose() * eig.dt;
    modes.push_back(std::move(a));
  }
  return modes;
}

/// Stage-1 result: full temporal spectrum plus the retained spatial fields.
struct BdModel {
  Eigen::VectorXd eigenvalues;      // full spectrum, descending
  Eigen::MatrixXd temporal_modes;   // n_intervals x n_intervals
  Eigen::VectorXd energy_fractions; // full spectrum
  int retained = 0;
  std::vector<Eigen::MatrixXd> realization_modes;  // retained, each n_realizations x points
  double dt = 0.0;

  double mode_scale(int i) const { return std::sqrt(eigenvalues[i]); }
};

inline BdModel bd_decompose(const FluctuationEnsemble& fluct, int inner_product_type,
                            double energy_threshold) {
  const auto cov = temporal_covariance(fluct, inner_product_type);
  const auto eig = eigendecompose_temporal(cov);

  BdModel bd;
  bd.eigenvalues = eig.eigenvalues;
  bd.temporal_modes = eig.modes;
  bd.dt = eig.dt;
  const double total = eig.eigenvalues.sum();
  bd.energy_fractions =
      total > 0.0 ? (eig.eigenvalues / total).eval() : Eigen::VectorXd::Zero(eig.eigenvalues.size());
  bd.retained = energy_truncation(eig.eigenvalues, energy_threshold);
  bd.realization_modes = spatial_stochastic_modes(fluct, eig, bd.retained);
  return bd;
}

}  // namespace windrom
