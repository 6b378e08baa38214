#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windrom/bd.hpp"
#include "windrom/core.hpp"
#include "windrom/ingest.hpp"
#include "windrom/kde.hpp"
#include "windrom/kle.hpp"
#include "windrom/rng.hpp"

namespace windrom {

/// One retained temporal mode's spatial expansion: mean field plus weighted
/// spatial functions with their fitted variable densities.
struct ModeBundle {
  Eigen::VectorXd mean;          // points
  Eigen::VectorXd eigenvalues;   // retained terms
  Eigen::MatrixXd basis;         // points x retained terms
  std::vector<KdeModel> xi_pdfs; // one per retained term

  int terms() const { return static_cast<int>(eigenvalues.size()); }
};

/// Self-contained synthesis bundle: everything needed to generate new
/// realizations without the source data.
struct ReducedModel {
  SnapshotGrid grid;
  int n_intervals = 0;
  Eigen::VectorXd mean_field;      // points
  Eigen::MatrixXd temporal_modes;  // n_intervals x retained
  Eigen::VectorXd bd_eigenvalues;  // retained
  Eigen::VectorXd bd_spectrum;     // full spectrum, for reporting
  std::vector<ModeBundle> modes;
  std::string config_echo;
  std::uint64_t source_checksum = 0;
  Eigen::MatrixXd temporal_covariance;  // optional dump, empty unless requested

  int retained() const { return static_cast<int>(modes.size()); }

  int stochastic_terms() const {
    int total = 0;
    for (const auto& mode : modes) total += mode.terms();
    return total;
  }

  void validate() const {
    grid.validate();
    const int P = grid.points();
    if (mean_field.size() != P) raise(errc::shape_mismatch, "mean field does not match grid");
    if (temporal_modes.rows() != n_intervals || temporal_modes.cols() != retained())
      raise(errc::shape_mismatch, "temporal modes do not match interval count");
    if (bd_eigenvalues.size() != retained())
      raise(errc::shape_mismatch, "bd eigenvalue count mismatch");
    for (const auto& mode : modes) {
      if (mode.mean.size() != P) raise(errc::shape_mismatch, "mode mean does not match grid");
      if (mode.basis.rows() != P || mode.basis.cols() != mode.terms())
        raise(errc::shape_mismatch, "mode basis does not match grid");
      if (static_cast<int>(mode.xi_pdfs.size()) != mode.terms())
        raise(errc::shape_mismatch, "mode density count mismatch");
    }
  }
};

/// Package decomposition results into a synthesis model.  Each mode keeps its
/// leading `retained` spatial terms together with the fitted densities.
inline ReducedModel build_model(const BdModel& bd, const std::vector<KleMode>& kle,
                                const std::vector<std::vector<KdeModel>>& densities,
                                const SnapshotGrid& grid, const Eigen::VectorXd& mean_field,
                                int n_intervals) {
  if (static_cast<int>(kle.size()) != bd.retained)
    raise(errc::shape_mismatch, "one spatial decomposition needed per retained temporal mode");
  if (densities.size() != kle.size())
    raise(errc::shape_mismatch, "one density set needed per retained temporal mode");
  const int P = grid.points();
  if (mean_field.size() != P) raise(errc::shape_mismatch, "mean field does not match grid");
  if (bd.temporal_modes.rows() != n_intervals)
    raise(errc::shape_mismatch, "temporal modes do not match interval count");

  ReducedModel model;
  model.grid = grid;
  model.n_intervals = n_intervals;
  model.mean_field = mean_field;
  model.bd_spectrum = bd.eigenvalues;
  model.temporal_modes = bd.temporal_modes.leftCols(bd.retained);
  model.bd_eigenvalues = bd.eigenvalues.head(bd.retained);
  model.modes.reserve(kle.size());
  for (std::size_t i = 0; i < kle.size(); ++i) {
    const auto& mode = kle[i];
    if (mode.mean.size() != P) raise(errc::shape_mismatch, "mode mean does not match grid");
    const int n = mode.retained;
    if (n > mode.basis.cols()) raise(errc::shape_mismatch, "retained terms exceed available basis");
    if (static_cast<int>(densities[i].size()) != n)
      raise(errc::shape_mismatch, "density count does not match retained terms");
    ModeBundle bundle;
    bundle.mean = mode.mean;
    bundle.eigenvalues = mode.eigenvalues.head(n);
    bundle.basis = mode.basis.leftCols(n);
    bundle.xi_pdfs = densities[i];
    model.modes.push_back(std::move(bundle));
  }
  model.validate();
  return model;
}

/// Deterministic evaluation of the expansion for given variable values; one
/// vector of xi values per retained temporal mode.
inline VelocityEnsemble reconstruct_realization(const ReducedModel& model,
                                                const std::vector<Eigen::VectorXd>& xi) {
  model.validate();
  if (static_cast<int>(xi.size()) != model.retained())
    raise(errc::shape_mismatch, "xi vectors do not match retained modes");
  const int P = model.grid.points();

  VelocityEnsemble day;
  day.grid = model.grid;
  day.n_realizations = 1;
  day.n_intervals = model.n_intervals;
  day.data.assign(static_cast<std::size_t>(model.n_intervals) * P, 0.0);
  day.interval_dx.assign(model.n_intervals, model.grid.dx);

  Eigen::MatrixXd fields(P, model.retained());  // column i holds mode i's field
  for (int i = 0; i < model.retained(); ++i) {
    const auto& mode = model.modes[i];
    if (xi[i].size() != mode.terms())
      raise(errc::shape_mismatch, "xi count does not match mode terms");
    Eigen::VectorXd field = mode.mean;
    for (int j = 0; j < mode.terms(); ++j)
      field += std::sqrt(mode.eigenvalues[j]) * xi[i][j] * mode.basis.col(j);
    fields.col(i) = field;
  }

  for (int t = 0; t < model.n_intervals; ++t) {
    Eigen::Map<Eigen::VectorXd> snapshot(day.data.data() + static_cast<std::size_t>(t) * P, P);
    snapshot = model.mean_field;
    for (int i = 0; i < model.retained(); ++i)
      snapshot += fields.col(i) * model.temporal_modes(t, i);
  }
  return day;
}

/// Draw one synthetic day.  Every (mode, term) pair owns an independent
/// substream derived from the seed with the documented mixer, so draws do not
/// shift when other terms are added or removed.
inline VelocityEnsemble generate_realization(const ReducedModel& model, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> xi(model.retained());
  for (int i = 0; i < model.retained(); ++i) {
    const auto& mode = model.modes[i];
    xi[i].resize(mode.terms());
    const std::uint64_t mode_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    for (int j = 0; j < mode.terms(); ++j) {
      RngStream stream(mix_seed(mode_seed, static_cast<std::uint64_t>(j)));
      xi[i][j] = kde_sample(mode.xi_pdfs[j], stream);
    }
  }
  return reconstruct_realization(model, xi);
}

/// Batch wrapper: realization r uses seed mix_seed(master_seed, r).
inline VelocityEnsemble generate_ensemble(const ReducedModel& model, int n,
                                          std::uint64_t master_seed) {
  if (n < 1) raise(errc::invalid_argument, "realization count must be positive");
  std::vector<VelocityEnsemble> days;
  days.reserve(n);
  for (int r = 0; r < n; ++r)
    days.push_back(generate_realization(model, mix_seed(master_seed, static_cast<std::uint64_t>(r))));
  return assemble_ensemble(days);
}

}  // namespace windrom
