#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "windrom/core.hpp"
#include "windrom/fft.hpp"

namespace windrom {

/// Realization-mean split of one spatial-stochastic mode.
struct CenteredModes {
  Eigen::VectorXd mean;   // points
  Eigen::MatrixXd fluct;  // n_realizations x points, zero realization mean
};

inline CenteredModes center_mode(const Eigen::MatrixXd& realizations) {
  if (realizations.rows() < 2)
    raise(errc::too_few_realizations, "need at least 2 realizations to center");
  CenteredModes out;
  out.mean = realizations.colwise().mean().transpose();
  out.fluct = realizations.rowwise() - out.mean.transpose();
  return out;
}

enum class CovarianceEstimator { population, unbiased };  // divisor n vs n-1

/// Sample spatial covariance of centered realizations.  The dense kernel is
/// materialized only for small grids; the centered snapshots are always kept
/// so large problems can be solved through the Gram matrix without ever
/// forming the points x points kernel.
struct SpatialCovariance {
  Eigen::MatrixXd kernel;     // points x points, possibly empty
  Eigen::MatrixXd snapshots;  // n_realizations x points, centered
  Eigen::VectorXd weights;    // quadrature weight per point
  CovarianceEstimator estimator = CovarianceEstimator::population;

  bool has_dense() const { return kernel.size() > 0; }
  int sample_count() const { return static_cast<int>(snapshots.rows()); }
  double divisor() const {
    return estimator == CovarianceEstimator::population ? sample_count() : sample_count() - 1;
  }
};

namespace detail {

inline void check_centered(const Eigen::MatrixXd& fluct) {
  const double scale = fluct.size() > 0 ? fluct.cwiseAbs().maxCoeff() : 0.0;
  if (scale == 0.0) return;
  const double worst = fluct.colwise().mean().cwiseAbs().maxCoeff();
  if (worst > 1e-8 * scale)
    raise(errc::not_centered, "realization mean " + std::to_string(worst));
}

inline void check_weights(const Eigen::VectorXd& weights) {
  for (Eigen::Index p = 0; p < weights.size(); ++p)
    if (!(weights[p] > 0.0))
      raise(errc::singular_weight_matrix, "nonpositive weight at point " + std::to_string(p));
}

constexpr int kDenseKernelLimit = 2000;

}  // namespace detail

inline SpatialCovariance spatial_covariance(
    const Eigen::MatrixXd& fluct, const Eigen::VectorXd& weights,
    CovarianceEstimator estimator = CovarianceEstimator::population,
    std::optional<bool> materialize = std::nullopt) {
  if (fluct.cols() != weights.size())
    raise(errc::shape_mismatch, "weights do not match grid points");
  if (fluct.rows() < 2) raise(errc::too_few_realizations, "need at least 2 realizations");
  detail::check_centered(fluct);
  detail::check_weights(weights);

  SpatialCovariance cov;
  cov.snapshots = fluct;
  cov.weights = weights;
  cov.estimator = estimator;
  const bool dense = materialize.value_or(fluct.cols() <= detail::kDenseKernelLimit);
  if (dense) {
    cov.kernel.noalias() = fluct.transpose() * fluct / cov.divisor();
    cov.kernel = 0.5 * (cov.kernel + cov.kernel.transpose()).eval();
  }
  return cov;
}

/// Covariance through the circular-autocorrelation route: the flattened field
/// is treated as circularly stationary, the per-realization autocorrelation
/// is taken in the frequency domain, and the kernel is the circulant built
/// from the realization average.  Agrees with the direct estimate when the
/// ensemble is closed under cyclic shifts.
inline SpatialCovariance spatial_covariance_fft(
    const Eigen::MatrixXd& fluct, const Eigen::VectorXd& weights,
    CovarianceEstimator estimator = CovarianceEstimator::population) {
  if (fluct.cols() != weights.size())
    raise(errc::shape_mismatch, "weights do not match grid points");
  if (fluct.rows() < 2) raise(errc::too_few_realizations, "need at least 2 realizations");
  detail::check_centered(fluct);
  detail::check_weights(weights);

  const auto P = fluct.cols();
  const auto n = fluct.rows();
  FftPlan forward(static_cast<std::size_t>(P), false);
  FftPlan backward(static_cast<std::size_t>(P), true);
  std::vector<std::complex<double>> in(P), spectrum(P), corr(P);
  Eigen::VectorXd lag_sum = Eigen::VectorXd::Zero(P);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index p = 0; p < P; ++p) in[p] = {fluct(r, p), 0.0};
    forward.execute(in, spectrum);
    for (Eigen::Index p = 0; p < P; ++p) in[p] = {std::norm(spectrum[p]), 0.0};
    backward.execute(in, corr);
    for (Eigen::Index p = 0; p < P; ++p) lag_sum[p] += corr[p].real();
  }

  SpatialCovariance cov;
  cov.snapshots = fluct;
  cov.weights = weights;
  cov.estimator = estimator;
  lag_sum /= cov.divisor();
  cov.kernel.resize(P, P);
  for (Eigen::Index p = 0; p < P; ++p)
    for (Eigen::Index q = 0; q < P; ++q)
      cov.kernel(p, q) = lag_sum[(q - p + P) % P];
  cov.kernel = 0.5 * (cov.kernel + cov.kernel.transpose()).eval();
  return cov;
}

/// Spatial eigenpairs: eigenvalues descending and zero-clamped; basis columns
/// orthonormal under the weighted spatial inner product.
struct SpatialEigen {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd basis;  // points x n_modes
};

namespace detail {

inline void clamp_and_sign(SpatialEigen& eig) {
  const double largest = eig.eigenvalues.size() > 0 ? eig.eigenvalues[0] : 0.0;
  for (Eigen::Index j = 0; j < eig.eigenvalues.size(); ++j) {
    if (eig.eigenvalues[j] < 1e-12 * largest) eig.eigenvalues[j] = 0.0;
    canonicalize_sign(eig.basis.col(j));
  }
}

/// Dense route: the weight matrix is diagonal, so the generalized problem
/// reduces by the sqrt(W) similarity transform to a symmetric standard one.
inline SpatialEigen solve_dense(const SpatialCovariance& cov) {
  const auto P = cov.kernel.rows();
  const Eigen::VectorXd sqrt_w = cov.weights.cwiseSqrt();
  Eigen::MatrixXd sym = sqrt_w.asDiagonal() * cov.kernel * sqrt_w.asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success)
    raise(errc::invalid_argument, "spatial eigensolver failed to converge");

  SpatialEigen eig;
  eig.eigenvalues.resize(P);
  eig.basis.resize(P, P);
  for (Eigen::Index j = 0; j < P; ++j) {
    eig.eigenvalues[j] = solver.eigenvalues()[P - 1 - j];
    eig.basis.col(j) = solver.eigenvectors().col(P - 1 - j).cwiseQuotient(sqrt_w);
  }
  clamp_and_sign(eig);
  return eig;
}

/// Snapshot route: eigenvectors of the sample covariance lie in the span of
/// the centered snapshots, so the n x n Gram matrix carries the whole nonzero
/// spectrum.  Never forms the points x points kernel.
inline SpatialEigen solve_snapshots(const SpatialCovariance& cov) {
  const auto n = cov.snapshots.rows();
  const auto P = cov.snapshots.cols();
  const Eigen::VectorXd sqrt_w = cov.weights.cwiseSqrt();
  Eigen::MatrixXd weighted = cov.snapshots * sqrt_w.asDiagonal();  // n x P
  Eigen::MatrixXd gram = weighted * weighted.transpose() / cov.divisor();
  gram = 0.5 * (gram + gram.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success)
    raise(errc::invalid_argument, "gram eigensolver failed to converge");

  const double largest = solver.eigenvalues()[n - 1];
  int rank = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    if (solver.eigenvalues()[n - 1 - j] >= 1e-12 * largest && solver.eigenvalues()[n - 1 - j] > 0.0)
      ++rank;
    else
      break;

  SpatialEigen eig;
  eig.eigenvalues = Eigen::VectorXd::Zero(n);
  eig.basis.resize(P, rank);
  for (int j = 0; j < rank; ++j) {
    const double lambda = solver.eigenvalues()[n - 1 - j];
    eig.eigenvalues[j] = lambda;
    const Eigen::VectorXd y =
        weighted.transpose() * solver.eigenvectors().col(n - 1 - j) / std::sqrt(cov.divisor() * lambda);
    eig.basis.col(j) = y.cwiseQuotient(sqrt_w);
    canonicalize_sign(eig.basis.col(j));
  }
  return eig;
}

}  // namespace detail

inline SpatialEigen solve_spatial_eigen(const SpatialCovariance& cov) {
  detail::check_weights(cov.weights);
  if (cov.has_dense()) return detail::solve_dense(cov);
  return detail::solve_snapshots(cov);
}

/// Galerkin solve in a user-supplied basis (column b of `basis` holds basis
/// function b sampled on the grid): A D = B D Lambda with A the doubly
/// weighted kernel and B the basis Gram matrix.  With indicator columns this
/// reproduces the default grid-point solve.
inline SpatialEigen solve_spatial_eigen_basis(const SpatialCovariance& cov,
                                              const Eigen::MatrixXd& basis) {
  if (!cov.has_dense())
    raise(errc::invalid_argument, "basis solve needs the materialized kernel");
  if (basis.rows() != cov.kernel.rows())
    raise(errc::shape_mismatch, "basis rows do not match grid points");
  detail::check_weights(cov.weights);

  const Eigen::MatrixXd weighted_basis = cov.weights.asDiagonal() * basis;  // W H
  Eigen::MatrixXd a_mat = weighted_basis.transpose() * cov.kernel * weighted_basis;
  Eigen::MatrixXd b_mat = basis.transpose() * weighted_basis;
  a_mat = 0.5 * (a_mat + a_mat.transpose()).eval();
  b_mat = 0.5 * (b_mat + b_mat.transpose()).eval();

  Eigen::LLT<Eigen::MatrixXd> llt(b_mat);
  if (llt.info() != Eigen::Success)
    raise(errc::singular_weight_matrix, "basis Gram matrix is not positive definite");

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(a_mat, b_mat);
  if (solver.info() != Eigen::Success)
    raise(errc::invalid_argument, "generalized eigensolver failed to converge");

  const auto k = a_mat.rows();
  SpatialEigen eig;
  eig.eigenvalues.resize(k);
  eig.basis.resize(basis.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    eig.eigenvalues[j] = solver.eigenvalues()[k - 1 - j];
    eig.basis.col(j) = basis * solver.eigenvectors().col(k - 1 - j);
  }
  detail::clamp_and_sign(eig);
  return eig;
}

/// Realization observations of the expansion variables:
/// xi[k][j] = <fluct_k, X_j>_W / sqrt(lambda_j).
inline Eigen::MatrixXd project_xi(const Eigen::MatrixXd& fluct, const Eigen::VectorXd& eigenvalues,
                                  const Eigen::MatrixXd& basis, const Eigen::VectorXd& weights,
                                  int count) {
  if (count < 0 || count > basis.cols())
    raise(errc::invalid_argument, "requested mode count out of range");
  if (fluct.cols() != basis.rows() || weights.size() != basis.rows())
    raise(errc::shape_mismatch, "fluctuations, basis, and weights disagree");
  const double largest = eigenvalues.size() > 0 ? eigenvalues[0] : 0.0;
  for (int j = 0; j < count; ++j)
    if (eigenvalues[j] <= 1e-12 * largest || eigenvalues[j] <= 0.0)
      raise(errc::zero_eigenvalue, "mode " + std::to_string(j) + " has vanishing eigenvalue");

  Eigen::MatrixXd xi(fluct.rows(), count);
  const Eigen::MatrixXd weighted = fluct * weights.asDiagonal();  // n x P
  for (int j = 0; j < count; ++j)
    xi.col(j) = weighted * basis.col(j) / std::sqrt(eigenvalues[j]);
  return xi;
}

/// Same rule as the temporal truncation, applied per spatial spectrum.
inline int kle_truncation(const Eigen::VectorXd& eigenvalues, double threshold) {
  return energy_truncation(eigenvalues, threshold);
}

/// Full second-stage result for one spatial-stochastic mode.
struct KleMode {
  Eigen::VectorXd mean;         // points
  Eigen::VectorXd eigenvalues;  // descending
  Eigen::MatrixXd basis;        // points x n_available
  Eigen::MatrixXd xi;           // n_realizations x n_available
  int retained = 0;
};

inline KleMode kle_decompose(const Eigen::MatrixXd& realizations, const Eigen::VectorXd& weights,
                             double threshold,
                             CovarianceEstimator estimator = CovarianceEstimator::population,
                             std::optional<bool> materialize = std::nullopt) {
  const auto centered = center_mode(realizations);
  const auto cov = spatial_covariance(centered.fluct, weights, estimator, materialize);
  auto eig = solve_spatial_eigen(cov);

  KleMode mode;
  mode.mean = centered.mean;
  int available = 0;
  for (Eigen::Index j = 0; j < eig.eigenvalues.size() && j < eig.basis.cols(); ++j)
    if (eig.eigenvalues[j] > 0.0) ++available;
  mode.eigenvalues = eig.eigenvalues;
  mode.basis = eig.basis.leftCols(available);
  mode.xi = project_xi(centered.fluct, eig.eigenvalues, eig.basis, weights, available);
  mode.retained = std::min(kle_truncation(eig.eigenvalues, threshold), available);
  return mode;
}

}  // namespace windrom
