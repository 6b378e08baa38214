#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "windrom/pipeline.hpp"
#include "windrom/synth.hpp"
#include "support.hpp"

using windrom::errc;
using windrom::Error;

namespace {

/// Full-rank decomposition of a small random ensemble.
windrom::DecomposeResult full_rank_model(const windrom::VelocityEnsemble& ens) {
  windrom::PipelineConfig config;
  config.bd_energy_threshold = 1.0;
  config.kle_energy_threshold = 1.0;
  config.interval_s = ens.grid.interval_s;
  return windrom::decompose(ens, config);
}

}  // namespace

TEST_CASE("build_model") {
  const auto ens = testsup::random_ensemble(6, 8, 3, 5, 41);
  auto result = full_rank_model(ens);

  SECTION("single-term toy model") {
    windrom::PipelineConfig config;
    config.bd_energy_threshold = 1e-9;   // forces M = 1
    config.kle_energy_threshold = 1e-9;  // forces N = 1
    config.interval_s = ens.grid.interval_s;
    const auto one = windrom::decompose(ens, config);
    CHECK(one.model.retained() == 1);
    CHECK(one.model.stochastic_terms() == 1);
  }

  SECTION("mismatched grid is rejected") {
    auto grid = ens.grid;
    grid.nx += 1;
    std::vector<std::vector<windrom::KdeModel>> densities(result.kle.size());
    for (std::size_t i = 0; i < result.kle.size(); ++i)
      for (int j = 0; j < result.kle[i].retained; ++j)
        densities[i].push_back(windrom::fit_kde(
            std::vector<double>(result.kle[i].xi.col(j).data(),
                                result.kle[i].xi.col(j).data() + result.kle[i].xi.rows())));
    CHECK_THROWS_MATCHES(
        windrom::build_model(result.bd, result.kle, densities, grid,
                             Eigen::VectorXd::Zero(grid.points()), ens.n_intervals),
        Error, Catch::Matchers::Predicate<Error>(
                   [](const Error& e) { return e.code() == errc::shape_mismatch; }));
  }

  SECTION("three modes with three terms each give nine stochastic terms") {
    auto bd = result.bd;
    REQUIRE(bd.retained >= 3);
    bd.retained = 3;
    std::vector<windrom::KleMode> kle(result.kle.begin(), result.kle.begin() + 3);
    std::vector<std::vector<windrom::KdeModel>> densities(3);
    for (int i = 0; i < 3; ++i) {
      REQUIRE(kle[i].basis.cols() >= 3);
      kle[i].retained = 3;
      for (int j = 0; j < 3; ++j)
        densities[i].push_back(windrom::fit_kde(
            std::vector<double>(kle[i].xi.col(j).data(),
                                kle[i].xi.col(j).data() + kle[i].xi.rows())));
    }
    const auto fluct = windrom::remove_mean(ens);
    const auto model = windrom::build_model(bd, kle, densities, ens.grid, fluct.mean.values,
                                            ens.n_intervals);
    CHECK(model.retained() == 3);
    CHECK(model.stochastic_terms() == 9);
  }
}

TEST_CASE("generate_realization") {
  SECTION("degenerate densities give the deterministic reconstruction") {
    const auto ens = testsup::random_ensemble(4, 6, 2, 4, 42);
    auto result = full_rank_model(ens);
    auto model = result.model;
    // replace every density with a point mass at zero
    for (auto& mode : model.modes)
      for (auto& kde : mode.xi_pdfs) {
        kde.observations.assign(kde.observations.size(), 0.0);
        kde.bandwidth = 0.0;
        kde.sigma = 0.0;
      }
    const auto day = windrom::generate_realization(model, 7);
    // expected: vbar + sum abar_i T_i
    const int P = model.grid.points();
    for (int t = 0; t < model.n_intervals; ++t)
      for (int p = 0; p < P; ++p) {
        double expected = model.mean_field[p];
        for (int i = 0; i < model.retained(); ++i)
          expected += model.modes[i].mean[p] * model.temporal_modes(t, i);
        CHECK(day.data[static_cast<std::size_t>(t) * P + p] ==
              Catch::Approx(expected).margin(1e-12));
      }
  }

  SECTION("training realizations are reproduced at full rank") {
    const auto ens = testsup::random_ensemble(5, 7, 3, 4, 43);
    const auto result = full_rank_model(ens);
    double scale = 0.0;
    for (double v : ens.data) scale = std::max(scale, std::abs(v));
    for (int k = 0; k < ens.n_realizations; ++k) {
      const auto day = windrom::reconstruct_training_realization(result.model, k);
      const int P = ens.grid.points();
      for (int t = 0; t < ens.n_intervals; ++t)
        for (int p = 0; p < P; ++p)
          CHECK(day.data[static_cast<std::size_t>(t) * P + p] ==
                Catch::Approx(ens.data[(static_cast<std::size_t>(k) * ens.n_intervals + t) * P + p])
                    .margin(1e-6 * scale));
    }
  }

  SECTION("scaling the variables scales the stochastic part linearly") {
    const auto ens = testsup::random_ensemble(5, 6, 2, 5, 44);
    const auto result = full_rank_model(ens);
    const auto& model = result.model;
    std::vector<Eigen::VectorXd> xi(model.retained()), xi_scaled(model.retained());
    windrom::RngStream rng(99);
    for (int i = 0; i < model.retained(); ++i) {
      xi[i].resize(model.modes[i].terms());
      for (int j = 0; j < model.modes[i].terms(); ++j) xi[i][j] = rng.normal();
      xi_scaled[i] = 2.5 * xi[i];
    }
    std::vector<Eigen::VectorXd> zero(model.retained());
    for (int i = 0; i < model.retained(); ++i)
      zero[i] = Eigen::VectorXd::Zero(model.modes[i].terms());

    const auto base = windrom::reconstruct_realization(model, zero);
    const auto one = windrom::reconstruct_realization(model, xi);
    const auto scaled = windrom::reconstruct_realization(model, xi_scaled);
    for (std::size_t i = 0; i < base.data.size(); ++i) {
      const double fluct_one = one.data[i] - base.data[i];
      const double fluct_scaled = scaled.data[i] - base.data[i];
      CHECK(fluct_scaled == Catch::Approx(2.5 * fluct_one).margin(1e-10));
    }
  }

  SECTION("paper-scale counts: 28 seeded days of 144 intervals") {
    testsup::SeparableSpec spec;
    spec.n_realizations = 6;
    spec.n_intervals = 144;
    spec.nz = 4;
    spec.nx = 30;
    const auto fx = testsup::make_separable(spec);
    const auto result = full_rank_model(fx.ensemble);
    const auto synthetic = windrom::generate_ensemble(result.model, 28, 2024);
    CHECK(synthetic.n_realizations == 28);
    CHECK(synthetic.n_intervals == 144);
    CHECK(synthetic.grid.nz() == 4);
    CHECK(synthetic.grid.nx == 30);
  }
}

TEST_CASE("generate_ensemble") {
  const auto ens = testsup::random_ensemble(4, 6, 2, 4, 45);
  const auto result = full_rank_model(ens);

  SECTION("n = 1 equals the first derived seed") {
    const auto batch = windrom::generate_ensemble(result.model, 1, 777);
    const auto single =
        windrom::generate_realization(result.model, windrom::mix_seed(777, 0));
    CHECK(batch.data == single.data);
  }

  SECTION("same master seed twice gives identical ensembles") {
    const auto a = windrom::generate_ensemble(result.model, 5, 123);
    const auto b = windrom::generate_ensemble(result.model, 5, 123);
    CHECK(a.data == b.data);
  }

  SECTION("time-mean field converges to the deterministic part") {
    // Monte Carlo check of the ensemble statistics invariant
    const auto big = windrom::generate_ensemble(result.model, 400, 31415);
    const auto& model = result.model;
    const int P = model.grid.points();
    Eigen::VectorXd time_mean = Eigen::VectorXd::Zero(P);
    for (int r = 0; r < big.n_realizations; ++r)
      for (int t = 0; t < big.n_intervals; ++t)
        for (int p = 0; p < P; ++p) time_mean[p] += big.at(r, t, p / big.grid.nx, p % big.grid.nx);
    time_mean /= static_cast<double>(big.n_realizations) * big.n_intervals;

    Eigen::VectorXd expected = model.mean_field;
    for (int i = 0; i < model.retained(); ++i) {
      const double t_mean = model.temporal_modes.col(i).mean();
      expected += model.modes[i].mean * t_mean;
    }
    double scale = expected.cwiseAbs().maxCoeff();
    CHECK((time_mean - expected).cwiseAbs().maxCoeff() <= 0.05 * std::max(scale, 1.0));
  }
}
