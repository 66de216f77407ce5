#include "lpm/csv.hpp"
#include "lpm/runner.hpp"
#include "lpm/scenario_json.hpp"
#include "lpm/simulate.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

lpm::ScenarioSpec noisy_spec(std::int64_t frames) {
  lpm::ScenarioSpec spec;
  spec.frame_count = frames;
  spec.seed = 91625;
  return spec;  // defaults: 4 stations r=10, path r=5, uniform 0.1 m noise
}

lpm::ScenarioSpec clean_spec(std::int64_t frames) {
  lpm::ScenarioSpec spec = noisy_spec(frames);
  spec.noise.param = 0.0;
  // A fixed moderate offset keeps the pseudo-range ulp well under a nanometre
  // so the run's mean error reflects the solver, not input quantization.
  spec.offset.kind = lpm::OffsetModel::Kind::Fixed;
  spec.offset.value = 1.0e3;
  return spec;
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (lpm::Method m : {lpm::Method::Linear, lpm::Method::LinearFiltered,
                        lpm::Method::LinearWeighted, lpm::Method::NonlinearTdoa,
                        lpm::Method::NonlinearToa}) {
    CHECK(lpm::method_from_name(lpm::method_name(m)) == m);
  }
  CHECK_THROWS_AS((void)lpm::method_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("linear run on clean data recovers the path") {
  const lpm::ScenarioSpec spec = clean_spec(256);
  const lpm::Trajectory trajectory = lpm::synthesize(spec);
  const lpm::StationArray stations = lpm::build_stations(spec);

  lpm::RunOptions options;
  options.method = lpm::Method::Linear;
  const lpm::RunResult result = lpm::run_method(trajectory, stations, options);

  CHECK(result.fixes.size() == trajectory.frames.size());
  CHECK(result.report.frames == spec.frame_count);
  CHECK(result.report.truth_delay_frames == 0);
  CHECK(result.report.warmup == 0);
  CHECK(result.report.mean_path_error_m < 1e-9);
  // Exact path crossings of the equal-distance diagonals are flagged, never
  // silently solved; everything else must solve.
  CHECK(result.report.solved + result.report.degenerate == result.report.frames);
}

TEST_CASE("report accounting is exact and serializes to parseable json") {
  const lpm::ScenarioSpec spec = noisy_spec(512);
  const lpm::Trajectory trajectory = lpm::synthesize(spec);
  const lpm::StationArray stations = lpm::build_stations(spec);

  lpm::RunOptions options;
  options.method = lpm::Method::LinearFiltered;
  const lpm::RunResult result = lpm::run_method(trajectory, stations, options);

  const lpm::RunReport& report = result.report;
  CHECK(report.frames == report.solved + report.warmup + report.degenerate);
  CHECK(report.truth_delay_frames == options.filter.group_delay());
  CHECK(report.wall_clock_ms >= 0.0);

  const nlohmann::json j = nlohmann::json::parse(report.to_json());
  CHECK(j.at("method").get<std::string>() == "linear-filtered");
  CHECK(j.at("frames").get<std::int64_t>() == report.frames);
  CHECK(j.at("warmup").get<std::int64_t>() == report.warmup);
}

TEST_CASE("filter delay bookkeeping is applied to the truth alignment") {
  // On a moving path the filtered fixes lag by the group delay; scoring them
  // against delay-shifted truth must beat scoring against unshifted truth.
  const lpm::ScenarioSpec spec = noisy_spec(2000);
  const lpm::Trajectory trajectory = lpm::synthesize(spec);
  const lpm::StationArray stations = lpm::build_stations(spec);

  lpm::RunOptions options;
  options.method = lpm::Method::LinearFiltered;
  const lpm::RunResult result = lpm::run_method(trajectory, stations, options);

  const double shifted = lpm::mean_path_error(result.fixes, trajectory.truth,
                                              options.filter.group_delay());
  const double unshifted = lpm::mean_path_error(result.fixes, trajectory.truth, 0);
  CHECK(shifted < unshifted);
  CHECK(result.report.mean_path_error_m == doctest::Approx(shifted));
}

TEST_CASE("warm-started iterative solves converge on nearly every noisy frame") {
  const lpm::ScenarioSpec spec = noisy_spec(2000);
  const lpm::Trajectory trajectory = lpm::synthesize(spec);
  const lpm::StationArray stations = lpm::build_stations(spec);

  lpm::RunOptions options;
  options.method = lpm::Method::NonlinearTdoa;
  const lpm::RunResult result = lpm::run_method(trajectory, stations, options);
  CHECK(result.report.converged >= static_cast<std::int64_t>(0.99 * spec.frame_count));
}

TEST_CASE("mean path error definition") {
  std::vector<lpm::Point> truth;
  std::vector<lpm::Fix> fixes;
  for (int k = 0; k < 10; ++k) {
    lpm::Point p(2);
    p << k, 2 * k;
    truth.push_back(p);
    lpm::Fix fix;
    fix.frame_index = k;
    fix.position = p;
    fix.converged = true;
    fixes.push_back(fix);
  }

  CHECK(lpm::mean_path_error(fixes, truth, 0) == 0.0);

  SUBCASE("constant shift shows up verbatim") {
    for (auto& fix : fixes) (*fix.position)(0) += 1.0;
    CHECK(lpm::mean_path_error(fixes, truth, 0) == doctest::Approx(1.0));
  }
  SUBCASE("warmup and degenerate fixes are excluded") {
    for (auto& fix : fixes) (*fix.position)(0) += 100.0;
    fixes[3].position->coeffRef(0) -= 100.0;
    for (std::size_t k = 0; k < fixes.size(); ++k) {
      if (k != 3) fixes[k].degenerate = true;
    }
    CHECK(lpm::mean_path_error(fixes, truth, 0) == doctest::Approx(0.0));
  }
  SUBCASE("no qualifying fix is an error, not a nan") {
    for (auto& fix : fixes) fix.warmup = true;
    CHECK_THROWS_AS((void)lpm::mean_path_error(fixes, truth, 0), std::invalid_argument);
  }
}

TEST_CASE("measurement csv round-trips bit for bit") {
  const lpm::ScenarioSpec spec = noisy_spec(32);
  const lpm::Trajectory original = lpm::synthesize(spec);

  std::stringstream buffer;
  lpm::write_measurements_csv(buffer, original);
  const lpm::Trajectory parsed = lpm::read_measurements_csv(buffer);

  REQUIRE(parsed.frames.size() == original.frames.size());
  CHECK(parsed.truth.empty());
  for (std::size_t k = 0; k < original.frames.size(); ++k) {
    CHECK(parsed.frames[k].frame_index == original.frames[k].frame_index);
    REQUIRE(parsed.frames[k].pseudo_ranges.size() ==
            original.frames[k].pseudo_ranges.size());
    for (std::size_t i = 0; i < original.frames[k].pseudo_ranges.size(); ++i) {
      CHECK(parsed.frames[k].pseudo_ranges[i] == original.frames[k].pseudo_ranges[i]);
    }
  }
}

TEST_CASE("measurement csv reader fails loudly on malformed input") {
  SUBCASE("wrong header") {
    std::stringstream in("frame,station,range\n0,0,1.0\n");
    CHECK_THROWS_AS((void)lpm::read_measurements_csv(in), std::runtime_error);
  }
  SUBCASE("stations out of order") {
    std::stringstream in("frame,station,pseudo_range_m\n0,1,1.0\n0,0,1.0\n");
    CHECK_THROWS_AS((void)lpm::read_measurements_csv(in), std::runtime_error);
  }
  SUBCASE("frames going backwards") {
    std::stringstream in("frame,station,pseudo_range_m\n1,0,1.0\n0,0,1.0\n");
    CHECK_THROWS_AS((void)lpm::read_measurements_csv(in), std::runtime_error);
  }
  SUBCASE("non-numeric value") {
    std::stringstream in("frame,station,pseudo_range_m\n0,0,abc\n");
    CHECK_THROWS_AS((void)lpm::read_measurements_csv(in), std::runtime_error);
  }
  SUBCASE("missing column") {
    std::stringstream in("frame,station,pseudo_range_m\n0,0\n");
    CHECK_THROWS_AS((void)lpm::read_measurements_csv(in), std::runtime_error);
  }
}

TEST_CASE("doubles are printed so they survive the trip back") {
  for (double v : {0.1, 1.0 / 3.0, 1.0e7 + 0.1, -2.5e-13, 12345.6789, 1.0e17, 0.0,
                   -0.0, 5.0e-324}) {
    const std::string text = lpm::format_double(v);
    CHECK(std::strtod(text.c_str(), nullptr) == v);
  }
}

TEST_CASE("fixes csv carries flags and leaves holes as nan") {
  std::vector<lpm::Fix> fixes(2);
  fixes[0].frame_index = 0;
  fixes[0].warmup = true;  // no position
  fixes[1].frame_index = 1;
  lpm::Point p(2);
  p << 1.5, -2.5;
  fixes[1].position = p;
  fixes[1].offset = 3.5e6;
  fixes[1].residual_norm = 0.25;
  fixes[1].condition_number = 12.0;
  fixes[1].converged = true;

  std::stringstream out;
  lpm::write_fixes_csv(out, fixes, 2);
  std::string line;
  REQUIRE(std::getline(out, line));
  CHECK(line ==
        "frame,x_m,y_m,offset_m,residual_norm,condition,converged,degenerate,warmup");
  REQUIRE(std::getline(out, line));
  CHECK(line.substr(0, 2) == "0,");
  CHECK(line.find("nan") != std::string::npos);
  CHECK(line.substr(line.size() - 5) == "0,0,1");  // converged,degenerate,warmup
  REQUIRE(std::getline(out, line));
  CHECK(line.find("1.5") != std::string::npos);
  CHECK(line.find("nan") == std::string::npos);
  CHECK(line.substr(line.size() - 5) == "1,0,0");
}

TEST_CASE("scenario json round-trips every field") {
  lpm::ScenarioSpec spec;
  spec.dimension = 3;
  spec.station_count = 6;
  spec.station_radius = 12.5;
  spec.path_radius = 4.25;
  spec.frame_count = 777;
  spec.noise.kind = lpm::NoiseModel::Kind::Gaussian;
  spec.noise.param = 0.05;
  spec.offset.kind = lpm::OffsetModel::Kind::Fixed;
  spec.offset.value = 2.0e6;
  spec.outlier_windows.push_back({10, 20, 3, 7.5});
  spec.seed = 160923;

  const lpm::ScenarioSpec back = lpm::scenario_from_json(lpm::scenario_to_json(spec));
  CHECK(back.dimension == spec.dimension);
  CHECK(back.station_count == spec.station_count);
  CHECK(back.station_radius == spec.station_radius);
  CHECK(back.path_radius == spec.path_radius);
  CHECK(back.frame_count == spec.frame_count);
  CHECK(back.noise.kind == spec.noise.kind);
  CHECK(back.noise.param == spec.noise.param);
  CHECK(back.offset.kind == spec.offset.kind);
  CHECK(back.offset.value == spec.offset.value);
  REQUIRE(back.outlier_windows.size() == 1);
  CHECK(back.outlier_windows[0].start_frame == 10);
  CHECK(back.outlier_windows[0].end_frame == 20);
  CHECK(back.outlier_windows[0].station_index == 3);
  CHECK(back.outlier_windows[0].magnitude_m == 7.5);
  CHECK(back.seed == spec.seed);
}

TEST_CASE("unknown scenario keys are rejected, not ignored") {
  lpm::ScenarioSpec spec;
  nlohmann::json j = lpm::scenario_to_json(spec);
  j["staton_count"] = 8;  // the typo this rule exists for
  CHECK_THROWS_AS((void)lpm::scenario_from_json(j), std::invalid_argument);

  nlohmann::json f = lpm::filter_to_json(lpm::FilterSpec{});
  f["pases"] = 2;
  CHECK_THROWS_AS((void)lpm::filter_from_json(f), std::invalid_argument);
}

TEST_CASE("scenario files round-trip through disk with the filter block") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "lpm_harness_scenario.json";

  lpm::ScenarioSpec spec;
  spec.frame_count = 99;
  lpm::FilterSpec filter;
  filter.window = 9;
  filter.passes = 2;
  filter.variance_window = 11;
  lpm::save_scenario_file(path, spec, filter);

  const lpm::ScenarioFile loaded = lpm::load_scenario_file(path);
  CHECK(loaded.scenario.frame_count == 99);
  REQUIRE(loaded.filter.has_value());
  CHECK(loaded.filter->window == 9);
  CHECK(loaded.filter->passes == 2);
  CHECK(loaded.filter->variance_window == 11);
  fs::remove(path);

  CHECK_THROWS_AS((void)lpm::load_scenario_file(path), std::runtime_error);
}
