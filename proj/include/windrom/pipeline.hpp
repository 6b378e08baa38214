#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windrom/bd.hpp"
#include "windrom/config.hpp"
#include "windrom/core.hpp"
#include "windrom/diagnostics.hpp"
#include "windrom/ingest.hpp"
#include "windrom/kde.hpp"
#include "windrom/kle.hpp"
#include "windrom/model_io.hpp"
#include "windrom/synth.hpp"

namespace windrom {

/// Uniform Riemann weights for the snapshot grid.
inline Eigen::VectorXd grid_weights(const SnapshotGrid& grid) {
  return Eigen::VectorXd::Constant(grid.points(), grid.dz() * grid.dx);
}

struct DecomposeResult {
  ReducedModel model;
  BdModel bd;
  std::vector<KleMode> kle;
  Eigen::MatrixXd xi_cross_correlation;  // between leading terms of distinct modes
};

namespace detail {

/// Sample correlation between the first xi column of every retained mode;
/// reported, never enforced.
inline Eigen::MatrixXd cross_mode_correlation(const std::vector<KleMode>& kle) {
  const int m = static_cast<int>(kle.size());
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) {
      if (kle[a].retained < 1 || kle[b].retained < 1) continue;
      const auto& xa = kle[a].xi.col(0);
      const auto& xb = kle[b].xi.col(0);
      const double na = xa.norm(), nb = xb.norm();
      const double c = (na > 0 && nb > 0) ? xa.dot(xb) / (na * nb) : 0.0;
      corr(a, b) = corr(b, a) = c;
    }
  return corr;
}

}  // namespace detail

/// Steps 1-4 of the framework: mean removal, temporal decomposition, spatial
/// decomposition per retained mode, density fitting.  Returns the synthesis
/// model together with the stage outputs.
inline DecomposeResult decompose(const VelocityEnsemble& source, const PipelineConfig& config) {
  source.validate();
  const auto fluct = remove_mean(source);
  const auto cov = temporal_covariance(fluct, config.inner_product_type);
  const auto eig = eigendecompose_temporal(cov);

  DecomposeResult result;
  auto& bd = result.bd;
  bd.eigenvalues = eig.eigenvalues;
  bd.temporal_modes = eig.modes;
  bd.dt = eig.dt;
  const double total = eig.eigenvalues.sum();
  bd.energy_fractions = total > 0.0 ? (eig.eigenvalues / total).eval()
                                    : Eigen::VectorXd::Zero(eig.eigenvalues.size());
  bd.retained = energy_truncation(eig.eigenvalues, config.bd_energy_threshold);
  bd.realization_modes = spatial_stochastic_modes(fluct, eig, bd.retained);

  const Eigen::VectorXd weights = grid_weights(source.grid);
  std::vector<std::vector<KdeModel>> densities;
  result.kle.reserve(bd.retained);
  densities.reserve(bd.retained);
  for (int i = 0; i < bd.retained; ++i) {
    auto mode = kle_decompose(bd.realization_modes[i], weights, config.kle_energy_threshold,
                              config.kle_estimator());
    std::vector<KdeModel> mode_densities;
    mode_densities.reserve(mode.retained);
    for (int j = 0; j < mode.retained; ++j) {
      std::vector<double> obs(mode.xi.rows());
      for (Eigen::Index k = 0; k < mode.xi.rows(); ++k) obs[k] = mode.xi(k, j);
      mode_densities.push_back(fit_kde(std::move(obs), config.bandwidth()));
    }
    result.kle.push_back(std::move(mode));
    densities.push_back(std::move(mode_densities));
  }

  result.model = build_model(bd, result.kle, densities, source.grid, fluct.mean.values,
                             source.n_intervals);
  result.model.config_echo = config_to_text(config);
  result.model.source_checksum = ensemble_checksum(source);
  if (config.dump_covariance) result.model.temporal_covariance = cov.C;
  result.xi_cross_correlation = detail::cross_mode_correlation(result.kle);
  return result;
}

/// Training-day reconstruction: xi fixed at realization k's projected values.
inline VelocityEnsemble reconstruct_training_realization(const ReducedModel& model, int k) {
  std::vector<Eigen::VectorXd> xi(model.retained());
  for (int i = 0; i < model.retained(); ++i) {
    const auto& mode = model.modes[i];
    xi[i].resize(mode.terms());
    for (int j = 0; j < mode.terms(); ++j) {
      const auto& obs = mode.xi_pdfs[j].observations;
      if (k < 0 || k >= static_cast<int>(obs.size()))
        raise(errc::invalid_argument, "training realization index out of range");
      xi[i][j] = obs[k];
    }
  }
  return reconstruct_realization(model, xi);
}

struct DiagnosisReport {
  SpectrumReport psd_source, psd_synth;
  CoherenceReport coherence_source, coherence_synth;
  double covariance_err = 0.0;
  Eigen::VectorXd source_energy_fractions, synth_energy_fractions;
};

/// Statistical comparison of a synthetic ensemble against its source.
inline DiagnosisReport diagnose(const VelocityEnsemble& source, const VelocityEnsemble& synthetic,
                                const PipelineConfig& config) {
  source.validate();
  synthetic.validate();
  if (!source.grid.same_layout(synthetic.grid) || source.n_intervals != synthetic.n_intervals)
    raise(errc::shape_mismatch, "source and synthetic ensembles do not conform");

  const WelchConfig welch{config.welch_segment, config.welch_overlap};
  DiagnosisReport report;
  const int top = source.grid.nz() - 1;
  report.psd_source = ensemble_psd(source, top, welch);
  report.psd_synth = ensemble_psd(synthetic, top, welch);
  report.coherence_source = ensemble_coherence(source, 0, top, welch);
  report.coherence_synth = ensemble_coherence(synthetic, 0, top, welch);

  const auto cov_source = temporal_covariance(remove_mean(source), config.inner_product_type);
  const auto cov_synth = temporal_covariance(remove_mean(synthetic), config.inner_product_type);
  report.covariance_err = covariance_error(cov_source.C, cov_synth.C);

  const auto eig_source = eigendecompose_temporal(cov_source);
  const auto eig_synth = eigendecompose_temporal(cov_synth);
  const double src_total = eig_source.eigenvalues.sum();
  const double syn_total = eig_synth.eigenvalues.sum();
  report.source_energy_fractions =
      src_total > 0 ? (eig_source.eigenvalues / src_total).eval()
                    : Eigen::VectorXd::Zero(eig_source.eigenvalues.size());
  report.synth_energy_fractions =
      syn_total > 0 ? (eig_synth.eigenvalues / syn_total).eval()
                    : Eigen::VectorXd::Zero(eig_synth.eigenvalues.size());
  return report;
}

/// Recover the per-level day series of one realization and restack it at a
/// different snapshot interval.
inline VelocityEnsemble restack_ensemble(const VelocityEnsemble& source, double interval_s,
                                         DxRule rule = DxRule::per_interval) {
  const double step = source.grid.interval_s / source.grid.nx;
  std::vector<VelocityEnsemble> days;
  days.reserve(source.n_realizations);
  for (int r = 0; r < source.n_realizations; ++r) {
    LevelSeries levels;
    levels.heights = source.grid.z_levels;
    levels.step = step;
    levels.data.resize(source.grid.nz(), static_cast<Eigen::Index>(source.n_intervals) *
                                             source.grid.nx);
    for (int z = 0; z < source.grid.nz(); ++z) {
      const auto series = ensemble_to_series(source, r, z);
      for (std::size_t s = 0; s < series.size(); ++s)
        levels.data(z, static_cast<Eigen::Index>(s)) = series[s];
    }
    days.push_back(build_snapshots(levels, interval_s, rule));
  }
  return assemble_ensemble(days);
}

struct IntervalReport {
  double interval_s = 0.0;
  int bd_retained = 0;
  std::vector<int> kle_retained;
  DiagnosisReport diagnosis;
};

/// Run the full pipeline at each snapshot interval and report PSD, coherence,
/// and covariance error side by side.
inline std::vector<IntervalReport> interval_study(const VelocityEnsemble& source,
                                                  const std::vector<double>& intervals,
                                                  const PipelineConfig& config) {
  source.validate();
  const double day_s = source.n_intervals * source.grid.interval_s;
  std::vector<IntervalReport> reports;
  reports.reserve(intervals.size());
  for (std::size_t idx = 0; idx < intervals.size(); ++idx) {
    const double interval = intervals[idx];
    const double ratio = day_s / interval;
    if (!(interval > 0.0) || std::abs(ratio - std::llround(ratio)) > 1e-9)
      raise(errc::interval_not_divisor,
            "interval " + std::to_string(interval) + " does not divide the day");

    PipelineConfig local = config;
    local.interval_s = interval;
    const auto restacked = restack_ensemble(
        source, interval, config.global_dx ? DxRule::global_mean : DxRule::per_interval);
    const auto dec = decompose(restacked, local);
    const auto synthetic = generate_ensemble(
        dec.model, source.n_realizations,
        mix_seed(config.seed, static_cast<std::uint64_t>(std::llround(interval))));

    IntervalReport report;
    report.interval_s = interval;
    report.bd_retained = dec.bd.retained;
    for (const auto& mode : dec.kle) report.kle_retained.push_back(mode.retained);
    report.diagnosis = diagnose(restacked, synthetic, local);
    reports.push_back(std::move(report));
  }
  return reports;
}

inline void write_csv_columns(const std::string& path, const std::string& header,
                              const std::vector<const std::vector<double>*>& columns) {
  std::ofstream out(path);
  if (!out) raise(errc::io_error, "cannot open " + path + " for writing");
  out << header << "\n";
  const std::size_t rows = columns.empty() ? 0 : columns.front()->size();
  char buf[64];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", (*columns[c])[r]);
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) raise(errc::io_error, "write failure on " + path);
}

/// Emit the report CSVs (PSD, coherence, covariance error, energy fractions)
/// into a directory.
inline void write_diagnosis_reports(const std::string& dir, const DiagnosisReport& report) {
  std::filesystem::create_directories(dir);
  write_csv_columns(dir + "/psd.csv", "frequency_hz,source,synth",
                    {&report.psd_source.frequency, &report.psd_source.psd, &report.psd_synth.psd});
  write_csv_columns(dir + "/coherence.csv", "frequency_hz,source,synth",
                    {&report.coherence_source.frequency, &report.coherence_source.coherence,
                     &report.coherence_synth.coherence});
  {
    std::vector<double> eps{report.covariance_err};
    write_csv_columns(dir + "/covariance_error.csv", "epsilon", {&eps});
  }
  {
    const auto n = std::max(report.source_energy_fractions.size(),
                            report.synth_energy_fractions.size());
    std::vector<double> mode(n), source(n, 0.0), synth(n, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) mode[i] = static_cast<double>(i + 1);
    for (Eigen::Index i = 0; i < report.source_energy_fractions.size(); ++i)
      source[i] = report.source_energy_fractions[i];
    for (Eigen::Index i = 0; i < report.synth_energy_fractions.size(); ++i)
      synth[i] = report.synth_energy_fractions[i];
    write_csv_columns(dir + "/energy_fractions.csv", "mode,source,synth",
                      {&mode, &source, &synth});
  }
}

}  // namespace windrom
