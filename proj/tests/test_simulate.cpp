#include "lpm/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace {

lpm::ScenarioSpec small_spec() {
  lpm::ScenarioSpec spec;
  spec.dimension = 2;
  spec.station_count = 4;
  spec.station_radius = 10.0;
  spec.path_radius = 5.0;
  spec.frame_count = 64;
  spec.noise.kind = lpm::NoiseModel::Kind::Uniform;
  spec.noise.param = 0.1;
  spec.offset.kind = lpm::OffsetModel::Kind::PerFrameUniform;
  spec.offset.lo = 1.0e6;
  spec.offset.hi = 1.0e7;
  spec.seed = 20260819;
  return spec;
}

double word_to_uniform(std::uint64_t w, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(w >> 11) * 0x1.0p-53);
}

}  // namespace

TEST_CASE("stations sit equally spaced on the circle, reference at the origin") {
  lpm::ScenarioSpec spec = small_spec();
  const lpm::StationArray stations = lpm::build_stations(spec);
  REQUIRE(stations.count() == spec.station_count);
  CHECK(stations.dimension() == 2);
  CHECK(stations.reference.norm() == 0.0);
  for (std::size_t i = 0; i < stations.count(); ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) /
                         static_cast<double>(spec.station_count);
    CHECK(stations.bases[i](0) ==
          doctest::Approx(spec.station_radius * std::cos(angle)).epsilon(1e-15));
    CHECK(stations.bases[i](1) ==
          doctest::Approx(spec.station_radius * std::sin(angle)).epsilon(1e-15));
  }

  SUBCASE("three dimensions puts the ring in the z=0 plane") {
    spec.dimension = 3;
    const lpm::StationArray s3 = lpm::build_stations(spec);
    CHECK(s3.dimension() == 3);
    for (const lpm::Point& b : s3.bases) CHECK(b(2) == 0.0);
    CHECK(s3.reference.size() == 3);
  }
}

TEST_CASE("transponder path is one full circle over the frame count") {
  const lpm::ScenarioSpec spec = small_spec();
  const std::vector<lpm::Point> path = lpm::circular_path(spec);
  REQUIRE(path.size() == static_cast<std::size_t>(spec.frame_count));
  CHECK(path[0](0) == doctest::Approx(spec.path_radius));
  CHECK(path[0](1) == doctest::Approx(0.0));
  const std::size_t quarter = static_cast<std::size_t>(spec.frame_count) / 4;
  CHECK(std::abs(path[quarter](0)) <= 1e-12);
  CHECK(path[quarter](1) == doctest::Approx(spec.path_radius));
  for (const lpm::Point& p : path) CHECK(p.norm() == doctest::Approx(spec.path_radius));
}

TEST_CASE("scenario validation rejects out-of-range fields") {
  lpm::ScenarioSpec spec = small_spec();
  CHECK_NOTHROW(spec.validate());

  SUBCASE("too few stations") {
    spec.station_count = 2;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("path reaches the station ring") {
    spec.path_radius = spec.station_radius;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("outlier window past the last frame") {
    spec.outlier_windows.push_back({0, spec.frame_count, 0, 1.0});
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("outlier window on an unknown station") {
    spec.outlier_windows.push_back({1, 2, spec.station_count, 1.0});
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
}

TEST_CASE("synthesis is reproducible bit for bit") {
  const lpm::ScenarioSpec spec = small_spec();
  const lpm::Trajectory a = lpm::synthesize(spec);
  const lpm::Trajectory b = lpm::synthesize(spec);
  REQUIRE(a.frames.size() == b.frames.size());
  REQUIRE(a.truth.size() == a.frames.size());
  for (std::size_t k = 0; k < a.frames.size(); ++k) {
    REQUIRE(a.frames[k].true_offset.has_value());
    CHECK(*a.frames[k].true_offset == *b.frames[k].true_offset);
    for (std::size_t i = 0; i < a.frames[k].pseudo_ranges.size(); ++i) {
      CHECK(a.frames[k].pseudo_ranges[i] == b.frames[k].pseudo_ranges[i]);
    }
  }
}

TEST_CASE("synthesis follows the documented draw discipline") {
  // Replay the engine by hand: one offset word per frame, then one uniform
  // noise word per station in index order. Any reordering of draws would
  // break equality on the very first frame.
  const lpm::ScenarioSpec spec = small_spec();
  const lpm::StationArray stations = lpm::build_stations(spec);
  const std::vector<lpm::Point> path = lpm::circular_path(spec);
  const lpm::Trajectory trajectory = lpm::synthesize(spec);

  std::mt19937_64 engine(spec.seed);
  for (std::size_t k = 0; k < trajectory.frames.size(); ++k) {
    const double offset = word_to_uniform(engine(), spec.offset.lo, spec.offset.hi);
    CHECK(*trajectory.frames[k].true_offset == offset);
    lpm::Frame clean = lpm::forward_pseudo_range(stations, path[k], offset,
                                                 static_cast<std::int64_t>(k));
    for (std::size_t i = 0; i < stations.count(); ++i) {
      const double noise =
          word_to_uniform(engine(), -spec.noise.param, spec.noise.param);
      CHECK(trajectory.frames[k].pseudo_ranges[i] == clean.pseudo_ranges[i] + noise);
    }
  }
}

TEST_CASE("noise stays inside the uniform bound") {
  lpm::ScenarioSpec spec = small_spec();
  spec.frame_count = 512;
  const lpm::StationArray stations = lpm::build_stations(spec);
  const std::vector<lpm::Point> path = lpm::circular_path(spec);
  const lpm::Trajectory trajectory = lpm::synthesize(spec);
  for (std::size_t k = 0; k < trajectory.frames.size(); ++k) {
    const lpm::Frame clean = lpm::forward_pseudo_range(
        stations, path[k], *trajectory.frames[k].true_offset);
    for (std::size_t i = 0; i < stations.count(); ++i) {
      const double noise = trajectory.frames[k].pseudo_ranges[i] - clean.pseudo_ranges[i];
      CHECK(std::abs(noise) <= spec.noise.param);
    }
  }
}

TEST_CASE("zero noise reproduces the forward model exactly") {
  lpm::ScenarioSpec spec = small_spec();
  spec.noise.param = 0.0;
  spec.offset.kind = lpm::OffsetModel::Kind::Fixed;
  spec.offset.value = 3.0e6;
  const lpm::StationArray stations = lpm::build_stations(spec);
  const std::vector<lpm::Point> path = lpm::circular_path(spec);
  const lpm::Trajectory trajectory = lpm::synthesize(spec);
  for (std::size_t k = 0; k < trajectory.frames.size(); ++k) {
    CHECK(*trajectory.frames[k].true_offset == 3.0e6);
    const lpm::Frame clean = lpm::forward_pseudo_range(stations, path[k], 3.0e6);
    for (std::size_t i = 0; i < stations.count(); ++i) {
      CHECK(trajectory.frames[k].pseudo_ranges[i] == clean.pseudo_ranges[i]);
    }
  }
}

TEST_CASE("an outlier window elevates exactly its station and frames") {
  lpm::ScenarioSpec base = small_spec();
  lpm::ScenarioSpec spiked = base;
  spiked.outlier_windows.push_back({5, 8, 1, 10.0});

  const lpm::Trajectory a = lpm::synthesize(base);
  const lpm::Trajectory b = lpm::synthesize(spiked);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t k = 0; k < a.frames.size(); ++k) {
    for (std::size_t i = 0; i < a.frames[k].pseudo_ranges.size(); ++i) {
      const double delta = b.frames[k].pseudo_ranges[i] - a.frames[k].pseudo_ranges[i];
      const bool hit = (i == 1 && k >= 5 && k <= 8);  // window is inclusive
      CHECK(delta == (hit ? 10.0 : 0.0));
    }
  }
}

TEST_CASE("difference streams carry twice the channel noise variance") {
  // D_i0 = (noise_i - noise_0) + clean part, so after removing the clean part
  // var(D_i0) = 2 var(noise) and cov(D_i0, D_j0) = var(noise_0) for i != j.
  lpm::ScenarioSpec spec = small_spec();
  spec.frame_count = 10000;
  const lpm::StationArray stations = lpm::build_stations(spec);
  const std::vector<lpm::Point> path = lpm::circular_path(spec);
  const lpm::Trajectory trajectory = lpm::synthesize(spec);

  const double channel_var = spec.noise.param * spec.noise.param / 3.0;
  const std::size_t n = stations.count();
  std::vector<std::vector<double>> residual_diff(n);
  for (std::size_t k = 0; k < trajectory.frames.size(); ++k) {
    const lpm::Frame clean = lpm::forward_pseudo_range(
        stations, path[k], *trajectory.frames[k].true_offset);
    const double base =
        trajectory.frames[k].pseudo_ranges[0] - clean.pseudo_ranges[0];
    for (std::size_t i = 1; i < n; ++i) {
      const double noise_i =
          trajectory.frames[k].pseudo_ranges[i] - clean.pseudo_ranges[i];
      residual_diff[i].push_back(noise_i - base);
    }
  }

  const auto mean = [](const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };
  std::vector<double> mu(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) mu[i] = mean(residual_diff[i]);

  for (std::size_t i = 1; i < n; ++i) {
    double var = 0.0;
    for (double x : residual_diff[i]) var += (x - mu[i]) * (x - mu[i]);
    var /= static_cast<double>(residual_diff[i].size() - 1);
    CHECK(var == doctest::Approx(2.0 * channel_var).epsilon(0.10));
  }
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double cov = 0.0;
      for (std::size_t k = 0; k < residual_diff[i].size(); ++k) {
        cov += (residual_diff[i][k] - mu[i]) * (residual_diff[j][k] - mu[j]);
      }
      cov /= static_cast<double>(residual_diff[i].size() - 1);
      CHECK(cov == doctest::Approx(channel_var).epsilon(0.10));
    }
  }
}
