#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "windrom/core.hpp"
#include "windrom/rng.hpp"

namespace windrom {

enum class BandwidthRule {
  approx,  // 1.06 * sigma * N^(-1/5)
  exact,   // (4*sigma / (3*N))^(1/5)
};

/// Gaussian-kernel density estimate of one expansion variable.  A zero sample
/// deviation collapses to a point mass rather than an error; deterministic
/// variables are legal.
struct KdeModel {
  std::vector<double> observations;
  double bandwidth = 0.0;
  double sigma = 0.0;  // sample std, divisor N-1

  bool degenerate() const { return !(bandwidth > 0.0); }
  int count() const { return static_cast<int>(observations.size()); }
};

inline double sample_std(std::span<const double> obs) {
  double mean = 0.0;
  for (double v : obs) mean += v;
  mean /= static_cast<double>(obs.size());
  double ss = 0.0;
  for (double v : obs) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(obs.size() - 1));
}

inline double silverman_bandwidth(std::span<const double> obs,
                                  BandwidthRule rule = BandwidthRule::approx) {
  if (obs.size() < 2) raise(errc::too_few_observations, "bandwidth needs at least 2 observations");
  const double sigma = sample_std(obs);
  const auto n = static_cast<double>(obs.size());
  if (sigma == 0.0) return 0.0;
  if (rule == BandwidthRule::exact) return std::pow(4.0 * sigma / (3.0 * n), 0.2);
  return 1.06 * sigma * std::pow(n, -0.2);
}

inline KdeModel fit_kde(std::vector<double> observations,
                        BandwidthRule rule = BandwidthRule::approx) {
  KdeModel model;
  model.bandwidth = silverman_bandwidth(observations, rule);
  model.sigma = sample_std(observations);
  model.observations = std::move(observations);
  return model;
}

/// Estimated density (1/(N h)) sum K((x - x_i)/h) with standard Gaussian K.
inline double kde_pdf(const KdeModel& model, double x) {
  if (model.degenerate())
    raise(errc::degenerate_model, "point-mass model has no density");
  const double inv_h = 1.0 / model.bandwidth;
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi));
  double sum = 0.0;
  for (double obs : model.observations) {
    const double z = (x - obs) * inv_h;
    sum += norm * std::exp(-0.5 * z * z);
  }
  return sum * inv_h / static_cast<double>(model.count());
}

/// Smoothed bootstrap: a uniformly chosen observation plus kernel-scaled
/// noise, which is exactly one draw from the estimated mixture.
inline double kde_sample(const KdeModel& model, RngStream& rng) {
  const std::size_t pick = rng.uniform_index(model.observations.size());
  const double z = rng.normal();
  return model.observations[pick] + model.bandwidth * z;
}

inline std::vector<double> kde_sample(const KdeModel& model, std::uint64_t seed, int count) {
  if (count < 1) raise(errc::invalid_argument, "draw count must be positive");
  RngStream rng(seed);
  std::vector<double> draws(count);
  for (int i = 0; i < count; ++i) draws[i] = kde_sample(model, rng);
  return draws;
}

}  // namespace windrom
