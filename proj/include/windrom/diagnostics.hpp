#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windrom/core.hpp"
#include "windrom/fft.hpp"

namespace windrom {

struct WelchConfig {
  int segment_length = 256;
  double overlap = 0.5;  // fraction of segment
};

struct SpectrumReport {
  std::vector<double> frequency;  // Hz, ascending from 0
  std::vector<double> psd;        // (m/s)^2 / Hz
  WelchConfig config;
  double sample_rate = 0.0;
  int segments_averaged = 0;
};

struct CoherenceReport {
  std::vector<double> frequency;
  std::vector<double> coherence;  // magnitude-squared, in [0, 1]
  WelchConfig config;
  double sample_rate = 0.0;
  int segments_averaged = 0;
};

namespace detail {

struct WelchAccumulator {
  // averaged auto/cross spectra over all segments fed in
  Eigen::VectorXd auto_a;
  Eigen::VectorXd auto_b;
  Eigen::VectorXcd cross;
  int segments = 0;
};

inline std::vector<double> hann_window(int length) {
  std::vector<double> w(length);
  for (int i = 0; i < length; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / length));
  return w;
}

inline int welch_step(const WelchConfig& cfg) {
  if (cfg.segment_length < 2) raise(errc::invalid_argument, "segment length must be >= 2");
  if (!(cfg.overlap >= 0.0) || cfg.overlap >= 1.0)
    raise(errc::invalid_argument, "overlap must lie in [0, 1)");
  const int step = static_cast<int>(std::lround(cfg.segment_length * (1.0 - cfg.overlap)));
  return step < 1 ? 1 : step;
}

/// Feed all segments of a pair of equal-length series into the accumulator.
inline void welch_accumulate(WelchAccumulator& acc, std::span<const double> a,
                             std::span<const double> b, const WelchConfig& cfg, FftPlan& plan,
                             const std::vector<double>& window) {
  const int L = cfg.segment_length;
  const int step = welch_step(cfg);
  const int bins = L / 2 + 1;
  if (acc.segments == 0 && acc.auto_a.size() == 0) {
    acc.auto_a = Eigen::VectorXd::Zero(bins);
    acc.auto_b = Eigen::VectorXd::Zero(bins);
    acc.cross = Eigen::VectorXcd::Zero(bins);
  }
  std::vector<std::complex<double>> in(L), spec_a(L), spec_b(L);
  const auto n = static_cast<int>(a.size());
  for (int start = 0; start + L <= n; start += step) {
    double mean_a = 0.0, mean_b = 0.0;
    for (int i = 0; i < L; ++i) {
      mean_a += a[start + i];
      mean_b += b[start + i];
    }
    mean_a /= L;
    mean_b /= L;
    for (int i = 0; i < L; ++i) in[i] = {(a[start + i] - mean_a) * window[i], 0.0};
    plan.execute(in, spec_a);
    for (int i = 0; i < L; ++i) in[i] = {(b[start + i] - mean_b) * window[i], 0.0};
    plan.execute(in, spec_b);
    for (int k = 0; k < bins; ++k) {
      acc.auto_a[k] += std::norm(spec_a[k]);
      acc.auto_b[k] += std::norm(spec_b[k]);
      acc.cross[k] += spec_a[k] * std::conj(spec_b[k]);
    }
    ++acc.segments;
  }
}

inline double window_power(const std::vector<double>& window) {
  double u = 0.0;
  for (double w : window) u += w * w;
  return u;
}

}  // namespace detail

/// Welch-averaged one-sided power spectral density: Hann window, per-segment
/// mean removal, interior bins doubled.  The integral over frequency matches
/// the series variance for stationary inputs.
inline SpectrumReport welch_psd(std::span<const double> series, double sample_rate,
                                WelchConfig cfg = {}) {
  if (!(sample_rate > 0.0)) raise(errc::invalid_argument, "sample rate must be positive");
  if (static_cast<int>(series.size()) < 2 * cfg.segment_length)
    raise(errc::series_too_short, "series length " + std::to_string(series.size()) +
                                      " below 2 x segment " + std::to_string(cfg.segment_length));
  const auto window = detail::hann_window(cfg.segment_length);
  FftPlan plan(cfg.segment_length, false);
  detail::WelchAccumulator acc;
  detail::welch_accumulate(acc, series, series, cfg, plan, window);

  const int bins = cfg.segment_length / 2 + 1;
  const double scale = 1.0 / (sample_rate * detail::window_power(window) * acc.segments);
  SpectrumReport report;
  report.config = cfg;
  report.sample_rate = sample_rate;
  report.segments_averaged = acc.segments;
  report.frequency.resize(bins);
  report.psd.resize(bins);
  for (int k = 0; k < bins; ++k) {
    report.frequency[k] = k * sample_rate / cfg.segment_length;
    double p = acc.auto_a[k] * scale;
    const bool interior = k != 0 && !(cfg.segment_length % 2 == 0 && k == bins - 1);
    if (interior) p *= 2.0;
    report.psd[k] = p;
  }
  return report;
}

/// Magnitude-squared coherence from Welch cross- and auto-spectra.
inline CoherenceReport coherence(std::span<const double> series_a,
                                 std::span<const double> series_b, double sample_rate,
                                 WelchConfig cfg = {}) {
  if (series_a.size() != series_b.size())
    raise(errc::length_mismatch, "series lengths differ");
  if (!(sample_rate > 0.0)) raise(errc::invalid_argument, "sample rate must be positive");
  if (static_cast<int>(series_a.size()) < 2 * cfg.segment_length)
    raise(errc::series_too_short, "series length below 2 x segment");
  const auto window = detail::hann_window(cfg.segment_length);
  FftPlan plan(cfg.segment_length, false);
  detail::WelchAccumulator acc;
  detail::welch_accumulate(acc, series_a, series_b, cfg, plan, window);

  const int bins = cfg.segment_length / 2 + 1;
  CoherenceReport report;
  report.config = cfg;
  report.sample_rate = sample_rate;
  report.segments_averaged = acc.segments;
  report.frequency.resize(bins);
  report.coherence.resize(bins);
  for (int k = 0; k < bins; ++k) {
    report.frequency[k] = k * sample_rate / cfg.segment_length;
    const double denom = acc.auto_a[k] * acc.auto_b[k];
    report.coherence[k] = denom > 0.0 ? std::norm(acc.cross[k]) / denom : 0.0;
  }
  return report;
}

/// Ensemble-averaged PSD of the level-z series across all realizations.
inline SpectrumReport ensemble_psd(const VelocityEnsemble& ens, int z, WelchConfig cfg = {}) {
  const double sample_rate = ens.grid.nx / ens.grid.interval_s;
  SpectrumReport mean_report;
  for (int r = 0; r < ens.n_realizations; ++r) {
    const auto series = ensemble_to_series(ens, r, z);
    auto report = welch_psd(series, sample_rate, cfg);
    if (r == 0) {
      mean_report = std::move(report);
    } else {
      for (std::size_t k = 0; k < mean_report.psd.size(); ++k)
        mean_report.psd[k] += report.psd[k];
      mean_report.segments_averaged += report.segments_averaged;
    }
  }
  for (auto& p : mean_report.psd) p /= ens.n_realizations;
  return mean_report;
}

/// Coherence between two levels with auto/cross spectra averaged over both
/// segments and realizations.
inline CoherenceReport ensemble_coherence(const VelocityEnsemble& ens, int z_a, int z_b,
                                          WelchConfig cfg = {}) {
  const double sample_rate = ens.grid.nx / ens.grid.interval_s;
  const int series_len = ens.n_intervals * ens.grid.nx;
  if (series_len < 2 * cfg.segment_length)
    raise(errc::series_too_short, "series length below 2 x segment");
  const auto window = detail::hann_window(cfg.segment_length);
  FftPlan plan(cfg.segment_length, false);
  detail::WelchAccumulator acc;
  for (int r = 0; r < ens.n_realizations; ++r) {
    const auto a = ensemble_to_series(ens, r, z_a);
    const auto b = ensemble_to_series(ens, r, z_b);
    detail::welch_accumulate(acc, a, b, cfg, plan, window);
  }
  const int bins = cfg.segment_length / 2 + 1;
  CoherenceReport report;
  report.config = cfg;
  report.sample_rate = sample_rate;
  report.segments_averaged = acc.segments;
  report.frequency.resize(bins);
  report.coherence.resize(bins);
  for (int k = 0; k < bins; ++k) {
    report.frequency[k] = k * sample_rate / cfg.segment_length;
    const double denom = acc.auto_a[k] * acc.auto_b[k];
    report.coherence[k] = denom > 0.0 ? std::norm(acc.cross[k]) / denom : 0.0;
  }
  return report;
}

/// Relative entrywise L2 distance between two covariance matrices.
inline double covariance_error(const Eigen::MatrixXd& source, const Eigen::MatrixXd& synthetic) {
  if (source.rows() != synthetic.rows() || source.cols() != synthetic.cols())
    raise(errc::shape_mismatch, "covariance dimensions differ");
  const double denom = source.norm();
  if (!(denom > 0.0)) raise(errc::zero_source_norm, "source covariance has zero norm");
  return (source - synthetic).norm() / denom;
}

}  // namespace windrom
