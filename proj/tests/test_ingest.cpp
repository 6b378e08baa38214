#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "windrom/ingest.hpp"
#include "windrom/rng.hpp"
#include "support.hpp"

using windrom::errc;
using windrom::Error;

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

/// Two-sensor CSV with the given per-sensor generators.
template <typename Fa, typename Fb>
std::string make_csv(int rows, double step, Fa&& ua, Fb&& ub) {
  std::string text = "t_s,u_4.5m,u_10m\n";
  char buf[128];
  for (int i = 0; i < rows; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", i * step, ua(i), ub(i));
    text += buf;
  }
  return text;
}

windrom::TowerSeries small_tower(int rows = 40, double step = 1.0) {
  windrom::TowerSeries s;
  s.timestamps.resize(rows);
  for (int i = 0; i < rows; ++i) s.timestamps[i] = i * step;
  s.sensor_heights = {4.5, 10.0};
  s.speeds.resize(2, rows);
  windrom::RngStream rng(7);
  for (int i = 0; i < rows; ++i) {
    s.speeds(0, i) = 5.0 + 0.3 * rng.normal();
    s.speeds(1, i) = 6.0 + 0.3 * rng.normal();
  }
  for (int i = 0; i < rows; ++i) {
    s.speeds(0, i) = std::abs(s.speeds(0, i));
    s.speeds(1, i) = std::abs(s.speeds(1, i));
  }
  return s;
}

}  // namespace

TEST_CASE("load_tower_csv reads a full day at 1 Hz") {
  testsup::TempDir dir("csv_day");
  const auto path = dir.file("day.csv");
  std::ofstream out(path);
  out << "t_s,u_4.5m,u_10m\n";
  for (int i = 0; i < 86400; ++i) out << i << ",5.25,6.5\n";
  out.close();

  const auto series = windrom::load_tower_csv(path);
  CHECK(series.samples() == 86400);
  CHECK(series.step() == 1.0);
  CHECK(series.sensors() == 2);
  CHECK(series.sensor_heights[0] == 4.5);
  CHECK(series.sensor_heights[1] == 10.0);
  CHECK(series.speeds(0, 12345) == 5.25);
}

TEST_CASE("load_tower_csv error cases") {
  testsup::TempDir dir("csv_err");

  SECTION("empty file is a missing column") {
    const auto path = dir.file("empty.csv");
    write_file(path, "");
    CHECK_THROWS_MATCHES(windrom::load_tower_csv(path), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == errc::missing_column; }));
  }

  SECTION("NaN row names the row and column") {
    const auto path = dir.file("nan.csv");
    write_file(path, "t_s,u_4.5m,u_10m\n0,5,6\n1,nan,6\n2,5,6\n3,5,6\n");
    try {
      windrom::load_tower_csv(path);
      FAIL("expected non_finite_value");
    } catch (const Error& e) {
      CHECK(e.code() == errc::non_finite_value);
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
      CHECK(std::string(e.what()).find("u_4.5m") != std::string::npos);
    }
  }

  SECTION("negative speed is rejected") {
    const auto path = dir.file("neg.csv");
    write_file(path, "t_s,u_4.5m,u_10m\n0,5,6\n1,-0.5,6\n2,5,6\n");
    try {
      windrom::load_tower_csv(path);
      FAIL("expected non_finite_value");
    } catch (const Error& e) {
      CHECK(e.code() == errc::non_finite_value);
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
  }

  SECTION("non-uniform timestep names the row") {
    const auto path = dir.file("step.csv");
    write_file(path, "t_s,u_4.5m,u_10m\n0,5,6\n1,5,6\n2.5,5,6\n3,5,6\n");
    try {
      windrom::load_tower_csv(path);
      FAIL("expected non_uniform_timestep");
    } catch (const Error& e) {
      CHECK(e.code() == errc::non_uniform_timestep);
      CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
  }

  SECTION("missing named column") {
    const auto path = dir.file("cols.csv");
    write_file(path, "time,u_4.5m,u_10m\n0,5,6\n1,5,6\n");
    CHECK_THROWS_MATCHES(windrom::load_tower_csv(path), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == errc::missing_column; }));
  }

  SECTION("explicit schema selects and orders columns by height") {
    const auto path = dir.file("schema.csv");
    write_file(path, "t_s,top,bottom\n0,6,5\n1,6.5,5.5\n");
    windrom::CsvSchema schema;
    schema.speed_columns = {{"top", 10.0}, {"bottom", 4.5}};
    const auto series = windrom::load_tower_csv(path, schema);
    CHECK(series.sensor_heights == std::vector<double>{4.5, 10.0});
    CHECK(series.speeds(0, 1) == 5.5);
    CHECK(series.speeds(1, 1) == 6.5);
  }
}

TEST_CASE("interpolate_vertical") {
  auto tower = small_tower();

  SECTION("sensor heights reproduce the inputs exactly") {
    const auto levels = windrom::interpolate_vertical(tower, {4.5, 10.0});
    CHECK((levels.data.row(0).array() == tower.speeds.row(0).array()).all());
    CHECK((levels.data.row(1).array() == tower.speeds.row(1).array()).all());
  }

  SECTION("midpoint of 2 and 4 is 3") {
    tower.speeds.row(0).setConstant(2.0);
    tower.speeds.row(1).setConstant(4.0);
    const auto levels = windrom::interpolate_vertical(tower, {7.25});
    for (int i = 0; i < tower.samples(); ++i) CHECK(levels.data(0, i) == Catch::Approx(3.0));
  }

  SECTION("18 interior levels give 20 series") {
    std::vector<double> targets;
    for (int i = 0; i < 20; ++i) targets.push_back(4.5 + (10.0 - 4.5) * i / 19.0);
    const auto levels = windrom::interpolate_vertical(tower, targets);
    CHECK(levels.levels() == 20);
  }

  SECTION("no extrapolation") {
    CHECK_THROWS_MATCHES(windrom::interpolate_vertical(tower, {4.4}), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == errc::level_out_of_range; }));
    CHECK_THROWS_MATCHES(windrom::interpolate_vertical(tower, {10.5}), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == errc::level_out_of_range; }));
  }

  SECTION("exact for affine-in-height data") {
    windrom::TowerSeries affine;
    affine.timestamps = {0, 1, 2};
    affine.sensor_heights = {4.5, 6.0, 10.0};
    affine.speeds.resize(3, 3);
    const double a = 1.25, b = 0.4;
    for (int s = 0; s < 3; ++s)
      for (int i = 0; i < 3; ++i)
        affine.speeds(s, i) = a + b * affine.sensor_heights[s] + 0.1 * i;
    std::vector<double> targets = {4.5, 5.3, 6.0, 7.77, 9.99, 10.0};
    const auto levels = windrom::interpolate_vertical(affine, targets);
    for (std::size_t li = 0; li < targets.size(); ++li)
      for (int i = 0; i < 3; ++i)
        CHECK(levels.data(static_cast<Eigen::Index>(li), i) ==
              Catch::Approx(a + b * targets[li] + 0.1 * i).epsilon(1e-14));
  }
}

TEST_CASE("build_snapshots") {
  SECTION("86400 s at 1 Hz with 600 s intervals gives 144 snapshots") {
    windrom::LevelSeries levels;
    levels.heights = {4.5, 10.0};
    levels.step = 1.0;
    levels.data.resize(2, 86400);
    levels.data.row(0).setConstant(5.0);
    levels.data.row(1).setConstant(6.0);
    const auto day = windrom::build_snapshots(levels, 600.0);
    CHECK(day.n_intervals == 144);
    CHECK(day.grid.nx == 600);
    CHECK(day.grid.nz() == 2);
    // frozen-hypothesis spacing from the interval mean speed
    CHECK(day.interval_dx[0] == Catch::Approx(5.5 * 600.0 / 600.0));
    CHECK(day.grid.dx == Catch::Approx(5.5));
  }

  SECTION("whole-day interval gives one snapshot") {
    windrom::LevelSeries levels;
    levels.heights = {4.5, 10.0};
    levels.step = 10.0;
    levels.data.resize(2, 8640);
    levels.data.setConstant(4.0);
    const auto day = windrom::build_snapshots(levels, 86400.0);
    CHECK(day.n_intervals == 1);
    CHECK(day.grid.nx == 8640);
  }

  SECTION("700 s does not divide 86400 s") {
    windrom::LevelSeries levels;
    levels.heights = {4.5, 10.0};
    levels.step = 1.0;
    levels.data = Eigen::MatrixXd::Constant(2, 86400, 5.0);
    CHECK_THROWS_MATCHES(windrom::build_snapshots(levels, 700.0), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::interval_not_divisor;
                         }));
  }

  SECTION("round trip: flattening the x axis reproduces the series bit-exactly") {
    windrom::LevelSeries levels;
    levels.heights = {4.5, 7.0, 10.0};
    levels.step = 2.0;
    levels.data.resize(3, 120);
    windrom::RngStream rng(11);
    for (int z = 0; z < 3; ++z)
      for (int i = 0; i < 120; ++i) levels.data(z, i) = 5.0 + rng.normal();
    const auto day = windrom::build_snapshots(levels, 48.0);  // nx = 24, 5 intervals
    for (int z = 0; z < 3; ++z) {
      const auto series = windrom::ensemble_to_series(day, 0, z);
      REQUIRE(series.size() == 120);
      for (int i = 0; i < 120; ++i) CHECK(series[i] == levels.data(z, i));
    }
  }

  SECTION("global dx rule uses the day mean") {
    windrom::LevelSeries levels;
    levels.heights = {4.5, 10.0};
    levels.step = 1.0;
    levels.data.resize(2, 40);
    levels.data.row(0).setConstant(2.0);
    levels.data.row(1).setConstant(4.0);
    levels.data.col(0).setConstant(12.0);  // skews interval 0
    const auto per = windrom::build_snapshots(levels, 20.0);
    const auto glob = windrom::build_snapshots(levels, 20.0, windrom::DxRule::global_mean);
    CHECK(per.interval_dx[0] != per.interval_dx[1]);
    CHECK(glob.interval_dx[0] == glob.interval_dx[1]);
    CHECK(glob.grid.dx == Catch::Approx(per.grid.dx));
  }
}

TEST_CASE("assemble_ensemble") {
  auto make_day = [](std::uint64_t seed, int nz = 3, int samples = 60) {
    windrom::LevelSeries levels;
    levels.heights.resize(nz);
    for (int z = 0; z < nz; ++z) levels.heights[z] = 4.5 + z;
    levels.step = 1.0;
    levels.data.resize(nz, samples);
    windrom::RngStream rng(seed);
    for (int z = 0; z < nz; ++z)
      for (int i = 0; i < samples; ++i) levels.data(z, i) = 5.0 + rng.normal();
    return windrom::build_snapshots(levels, 20.0);
  };

  SECTION("28 conforming days stack to 28 realizations") {
    std::vector<windrom::VelocityEnsemble> days;
    for (int d = 0; d < 28; ++d) days.push_back(make_day(100 + d));
    const auto ens = windrom::assemble_ensemble(days);
    CHECK(ens.n_realizations == 28);
    CHECK(ens.n_intervals == 3);
  }

  SECTION("single day") {
    const auto ens = windrom::assemble_ensemble({make_day(1)});
    CHECK(ens.n_realizations == 1);
  }

  SECTION("differing nz is a shape mismatch") {
    CHECK_THROWS_MATCHES(windrom::assemble_ensemble({make_day(1, 3), make_day(2, 4)}), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == errc::shape_mismatch; }));
  }

  SECTION("reordering days permutes the realization axis only") {
    const auto a = make_day(5), b = make_day(6), c = make_day(7);
    const auto fwd = windrom::assemble_ensemble({a, b, c});
    const auto rev = windrom::assemble_ensemble({c, b, a});
    CHECK(fwd.grid.dx == Catch::Approx(rev.grid.dx).epsilon(1e-15));
    for (int t = 0; t < fwd.n_intervals; ++t)
      for (int z = 0; z < fwd.grid.nz(); ++z)
        for (int x = 0; x < fwd.grid.nx; ++x) {
          CHECK(fwd.at(0, t, z, x) == rev.at(2, t, z, x));
          CHECK(fwd.at(1, t, z, x) == rev.at(1, t, z, x));
          CHECK(fwd.at(2, t, z, x) == rev.at(0, t, z, x));
        }
  }
}
