// Command line front end: simulate, solve, bench, reproduce.

#include "lpm/csv.hpp"
#include "lpm/runner.hpp"
#include "lpm/scenario_json.hpp"
#include "lpm/simulate.hpp"
#include "lpm/transform.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct FilterFlags {
  CLI::Option* window = nullptr;
  CLI::Option* passes = nullptr;
  CLI::Option* variance_window = nullptr;
  CLI::Option* weight_floor = nullptr;
  CLI::Option* outlier_scale = nullptr;
  int window_value = 31;
  int passes_value = 4;
  int variance_window_value = 61;
  double weight_floor_value = 1e-6;
  double outlier_scale_value = 25.0;

  void attach(CLI::App* cmd) {
    window = cmd->add_option("--filter-N", window_value,
                             "moving-average window length (odd)");
    passes = cmd->add_option("--passes", passes_value, "box filter passes");
    variance_window = cmd->add_option("--variance-window", variance_window_value,
                                      "moving variance window (odd)");
    weight_floor = cmd->add_option("--weight-floor", weight_floor_value,
                                   "variance clamp when forming 1/var weights, m^2");
    outlier_scale = cmd->add_option("--outlier-scale", outlier_scale_value,
                                    "outlier threshold as a multiple of median variance");
  }

  // Start from the scenario file's filter block (when present) and let any
  // explicitly passed flag win.
  lpm::FilterSpec resolve(const std::optional<lpm::FilterSpec>& from_file) const {
    lpm::FilterSpec spec = from_file.value_or(lpm::FilterSpec{});
    if (window->count() > 0) spec.window = window_value;
    if (passes->count() > 0) spec.passes = passes_value;
    if (variance_window->count() > 0) spec.variance_window = variance_window_value;
    if (weight_floor->count() > 0) spec.weight_floor = weight_floor_value;
    if (outlier_scale->count() > 0) spec.outlier_threshold_scale = outlier_scale_value;
    spec.validate();
    return spec;
  }
};

lpm::ScenarioFile load_scenario_with_env(const fs::path& path) {
  lpm::ScenarioFile file = lpm::load_scenario_file(path);
  if (const char* env = std::getenv("LPM_SEED")) {
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw CLI::ValidationError("LPM_SEED", "LPM_SEED must be an unsigned integer");
    }
    file.scenario.seed = seed;
  }
  return file;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << content;
}

void write_truth_csv(const fs::path& path, const std::vector<lpm::Point>& truth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  const int dimension = truth.empty() ? 2 : static_cast<int>(truth.front().size());
  out << "frame,x_m,y_m";
  if (dimension == 3) out << ",z_m";
  out << "\n";
  for (std::size_t k = 0; k < truth.size(); ++k) {
    out << k;
    for (int c = 0; c < dimension; ++c) {
      out << ',' << lpm::format_double(truth[k](c));
    }
    out << '\n';
  }
}

void write_error_csv(const fs::path& path, std::span<const lpm::Fix> fixes,
                     const std::vector<lpm::Point>& truth, int delay) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "frame,error_m\n";
  for (const lpm::Fix& fix : fixes) {
    const std::int64_t truth_index = fix.frame_index - delay;
    double error = std::numeric_limits<double>::quiet_NaN();
    if (fix.position && !fix.warmup && !fix.degenerate && truth_index >= 0 &&
        truth_index < static_cast<std::int64_t>(truth.size())) {
      error = lpm::distance(*fix.position, truth[static_cast<std::size_t>(truth_index)]);
    }
    out << fix.frame_index << ',' << lpm::format_double(error) << '\n';
  }
}

void write_fixes_file(const fs::path& path, std::span<const lpm::Fix> fixes, int dimension) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  lpm::write_fixes_csv(out, fixes, dimension);
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

int run_simulate(const fs::path& scenario_path, const fs::path& out_path) {
  const lpm::ScenarioFile file = load_scenario_with_env(scenario_path);
  const lpm::Trajectory trajectory = lpm::synthesize(file.scenario);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + out_path.string());
  }
  lpm::write_measurements_csv(out, trajectory);
  std::cerr << "wrote " << trajectory.frames.size() << " frames x "
            << file.scenario.station_count << " stations to " << out_path.string() << "\n";
  return kExitOk;
}

int run_solve(const fs::path& measurements_path, const lpm::ScenarioFile& file,
              const fs::path& fixes_path, const lpm::RunOptions& options) {
  std::ifstream in(measurements_path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + measurements_path.string());
  }
  lpm::Trajectory trajectory = lpm::read_measurements_csv(in);

  const lpm::StationArray stations = lpm::build_stations(file.scenario);
  if (!trajectory.frames.empty() &&
      trajectory.frames.front().pseudo_ranges.size() != stations.count()) {
    throw std::runtime_error("station count mismatch: csv has " +
                             std::to_string(trajectory.frames.front().pseudo_ranges.size()) +
                             ", scenario expects " + std::to_string(stations.count()));
  }
  // Truth for error reporting comes from the scenario's deterministic path.
  trajectory.truth = lpm::circular_path(file.scenario);
  if (trajectory.truth.size() != trajectory.frames.size()) {
    trajectory.truth.clear();  // CSV does not match the scenario length; no error metric
  }

  const lpm::RunResult result = lpm::run_method(trajectory, stations, options);
  write_fixes_file(fixes_path, result.fixes, stations.dimension());
  std::cout << result.report.to_json() << "\n";
  return kExitOk;
}

int run_bench(const lpm::ScenarioFile& file, int reps, const lpm::FilterSpec& filter,
              std::size_t pivot, bool all_pairs) {
  const lpm::Trajectory trajectory = lpm::synthesize(file.scenario);
  const lpm::StationArray stations = lpm::build_stations(file.scenario);

  struct BenchRow {
    std::string name;
    std::vector<double> times_ms;
    lpm::RunReport last;
  };
  std::vector<BenchRow> rows;

  for (const lpm::Method method : {lpm::Method::LinearFiltered, lpm::Method::NonlinearTdoa}) {
    lpm::RunOptions options;
    options.method = method;
    options.pivot = pivot;
    options.all_pairs = all_pairs;
    options.filter = filter;
    options.prefilter_nonlinear = true;  // both sides consume the same inputs
    BenchRow row;
    row.name = lpm::method_name(method);
    for (int rep = 0; rep < reps; ++rep) {
      lpm::RunResult result = lpm::run_method(trajectory, stations, options);
      row.times_ms.push_back(result.report.wall_clock_ms);
      row.last = result.report;
    }
    rows.push_back(std::move(row));
  }

  std::printf("%-18s %5s %12s %12s %16s %8s\n", "method", "reps", "median_ms", "spread_ms",
              "mean_error_m", "solved");
  for (const BenchRow& row : rows) {
    const auto [lo, hi] = std::minmax_element(row.times_ms.begin(), row.times_ms.end());
    std::printf("%-18s %5zu %12.3f %12.3f %16.6g %8lld\n", row.name.c_str(),
                row.times_ms.size(), median(row.times_ms), *hi - *lo,
                row.last.mean_path_error_m, static_cast<long long>(row.last.solved));
  }
  const double ratio = median(rows[0].times_ms) / median(rows[1].times_ms);
  std::printf("speed ratio %s / %s = %.3f\n", rows[0].name.c_str(), rows[1].name.c_str(),
              ratio);
  return kExitOk;
}

lpm::ScenarioSpec outlier_preset() {
  lpm::ScenarioSpec spec;  // defaults: 4 stations, uniform 0.1 m noise, 1e6..1e7 offsets
  spec.outlier_windows.push_back({3500, 3600, 1, 10.0});
  return spec;
}

lpm::ScenarioSpec near_degenerate_preset() {
  lpm::ScenarioSpec spec;
  spec.path_radius = 1e-3;  // transponder hugs the array center
  return spec;
}

int run_reproduce(int figure, const fs::path& outdir) {
  fs::create_directories(outdir);
  lpm::FilterSpec filter;

  const auto run_and_dump = [&](const lpm::ScenarioSpec& scenario,
                                const lpm::RunOptions& options, const std::string& stem) {
    const lpm::Trajectory trajectory = lpm::synthesize(scenario);
    const lpm::StationArray stations = lpm::build_stations(scenario);
    lpm::RunResult result = lpm::run_method(trajectory, stations, options);
    write_fixes_file(outdir / ("fixes_" + stem + ".csv"), result.fixes,
                     stations.dimension());
    write_error_csv(outdir / ("error_" + stem + ".csv"), result.fixes, trajectory.truth,
                    result.report.truth_delay_frames);
    write_text_file(outdir / ("report_" + stem + ".json"), result.report.to_json() + "\n");
    return result;
  };

  switch (figure) {
    case 4: {
      lpm::ScenarioSpec scenario;
      lpm::save_scenario_file(outdir / "scenario.json", scenario);
      write_truth_csv(outdir / "truth.csv", lpm::circular_path(scenario));
      lpm::RunOptions options;
      options.method = lpm::Method::Linear;
      run_and_dump(scenario, options, "linear");
      break;
    }
    case 7: {
      lpm::ScenarioSpec scenario;
      lpm::save_scenario_file(outdir / "scenario.json", scenario, filter);
      write_truth_csv(outdir / "truth.csv", lpm::circular_path(scenario));
      lpm::RunOptions options;
      options.method = lpm::Method::LinearFiltered;
      options.filter = filter;
      options.oracle_filter = true;
      run_and_dump(scenario, options, "oracle_filtered");
      break;
    }
    case 8:
    case 9: {
      const lpm::ScenarioSpec scenario =
          figure == 8 ? lpm::ScenarioSpec{} : outlier_preset();
      lpm::save_scenario_file(outdir / "scenario.json", scenario, filter);
      const lpm::Trajectory trajectory = lpm::synthesize(scenario);
      const lpm::StationArray stations = lpm::build_stations(scenario);
      // One difference channel, station 1 against the pivot: raw vs smoothed
      // (figure 9 adds the variance trace that drives outlier flags).
      lpm::FilterState state(filter);
      std::vector<lpm::FilteredSample> samples;
      std::vector<double> raw;
      samples.reserve(trajectory.frames.size());
      raw.reserve(trajectory.frames.size());
      for (const lpm::Frame& frame : trajectory.frames) {
        const lpm::AugmentedFrame aug = lpm::augment(frame, stations);
        raw.push_back(aug.difference(1, 0));
        samples.push_back(state.push(raw.back()));
      }
      lpm::flag_outliers(samples, lpm::adaptive_variance_threshold(
                                      samples, filter.outlier_threshold_scale));
      std::ofstream out(outdir / "channel_1_0.csv", std::ios::binary);
      if (!out) throw std::runtime_error("cannot write channel csv");
      out << (figure == 8 ? "frame,raw_m,filtered_m\n"
                          : "frame,raw_m,filtered_m,variance_m2,outlier\n");
      for (std::size_t k = 0; k < raw.size(); ++k) {
        out << k << ',' << lpm::format_double(raw[k]) << ','
            << lpm::format_double(samples[k].value);
        if (figure == 9) {
          out << ',' << lpm::format_double(samples[k].variance) << ','
              << (samples[k].outlier ? 1 : 0);
        }
        out << '\n';
      }
      break;
    }
    case 10: {
      const lpm::ScenarioSpec scenario = outlier_preset();
      lpm::save_scenario_file(outdir / "scenario.json", scenario, filter);
      write_truth_csv(outdir / "truth.csv", lpm::circular_path(scenario));
      lpm::RunOptions options;
      options.method = lpm::Method::LinearFiltered;
      options.filter = filter;
      options.all_pairs = true;
      run_and_dump(scenario, options, "filtered");
      break;
    }
    case 11: {
      const lpm::ScenarioSpec scenario = near_degenerate_preset();
      lpm::save_scenario_file(outdir / "scenario.json", scenario, filter);
      write_truth_csv(outdir / "truth.csv", lpm::circular_path(scenario));
      lpm::RunOptions options;
      options.method = lpm::Method::LinearWeighted;
      options.filter = filter;
      options.all_pairs = true;
      run_and_dump(scenario, options, "weighted");
      break;
    }
    case 12: {
      lpm::ScenarioSpec scenario;
      lpm::save_scenario_file(outdir / "scenario.json", scenario, filter);
      write_truth_csv(outdir / "truth.csv", lpm::circular_path(scenario));
      lpm::RunOptions options;
      options.method = lpm::Method::LinearFiltered;
      options.filter = filter;
      const lpm::RunResult linear = run_and_dump(scenario, options, "linear_filtered");
      options.method = lpm::Method::NonlinearTdoa;
      options.prefilter_nonlinear = true;
      const lpm::RunResult nonlinear = run_and_dump(scenario, options, "nonlinear_tdoa");
      std::printf("linear-filtered: %.3f ms, mean error %.6g m\n",
                  linear.report.wall_clock_ms, linear.report.mean_path_error_m);
      std::printf("nonlinear-tdoa:  %.3f ms, mean error %.6g m\n",
                  nonlinear.report.wall_clock_ms, nonlinear.report.mean_path_error_m);
      break;
    }
    default:
      throw CLI::ValidationError("--figure", "supported figures: 4, 7, 8, 9, 10, 11, 12");
  }
  std::cerr << "figure " << figure << " outputs in " << outdir.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pseudo-range multilateration toolkit"};
  app.require_subcommand(1);

  // simulate
  std::string sim_scenario, sim_out;
  auto* simulate = app.add_subcommand("simulate", "synthesize a measurement csv");
  simulate->add_option("scenario", sim_scenario, "scenario json")->required();
  simulate->add_option("out", sim_out, "output measurements csv")->required();

  // solve
  std::string solve_measurements, solve_scenario, solve_fixes;
  std::string method_name = "linear";
  std::size_t pivot = 0;
  bool all_pairs = false;
  bool oracle = false;
  bool prefilter = false;
  auto* solve = app.add_subcommand("solve", "estimate positions from a measurement csv");
  solve->add_option("measurements", solve_measurements, "measurements csv")->required();
  solve->add_option("scenario", solve_scenario, "scenario json")->required();
  solve->add_option("fixes", solve_fixes, "output fixes csv")->required();
  solve->add_option("--method", method_name, "solver")
      ->check(CLI::IsMember({"linear", "linear-filtered", "linear-weighted",
                             "nonlinear-tdoa", "nonlinear-toa"}));
  solve->add_option("--pivot", pivot, "pivot station index");
  solve->add_flag("--all-pairs", all_pairs, "use every station pair");
  solve->add_flag("--oracle-filter", oracle,
                  "replace the filter with exact clean differences from truth");
  solve->add_flag("--prefilter", prefilter,
                  "smooth differences before nonlinear-tdoa");
  FilterFlags solve_filter;
  solve_filter.attach(solve);

  // bench
  std::string bench_scenario;
  int reps = 5;
  std::size_t bench_pivot = 0;
  bool bench_all_pairs = false;
  auto* bench = app.add_subcommand(
      "bench", "time linear-filtered vs nonlinear-tdoa on one scenario");
  bench->add_option("scenario", bench_scenario, "scenario json")->required();
  bench->add_option("--reps", reps, "repetitions per method")->check(CLI::Range(1, 1000));
  bench->add_option("--pivot", bench_pivot, "pivot station index");
  bench->add_flag("--all-pairs", bench_all_pairs, "use every station pair");
  FilterFlags bench_filter;
  bench_filter.attach(bench);

  // reproduce
  int figure = 0;
  std::string outdir;
  auto* reproduce = app.add_subcommand("reproduce", "regenerate a study data set");
  reproduce->add_option("--figure", figure, "which output set")
      ->required()
      ->check(CLI::IsMember({4, 7, 8, 9, 10, 11, 12}));
  reproduce->add_option("outdir", outdir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) {
      return run_simulate(sim_scenario, sim_out);
    }
    if (solve->parsed()) {
      const lpm::ScenarioFile file = load_scenario_with_env(solve_scenario);
      lpm::RunOptions options;
      options.method = lpm::method_from_name(method_name);
      options.pivot = pivot;
      options.all_pairs = all_pairs;
      options.filter = solve_filter.resolve(file.filter);
      options.oracle_filter = oracle;
      options.prefilter_nonlinear = prefilter;
      if (oracle && options.method != lpm::Method::LinearFiltered &&
          options.method != lpm::Method::LinearWeighted &&
          !(options.method == lpm::Method::NonlinearTdoa && prefilter)) {
        std::cerr << "--oracle-filter requires a filtered method\n";
        return kExitUsage;
      }
      return run_solve(solve_measurements, file, solve_fixes, options);
    }
    if (bench->parsed()) {
      const lpm::ScenarioFile file = load_scenario_with_env(bench_scenario);
      return run_bench(file, reps, bench_filter.resolve(file.filter), bench_pivot,
                       bench_all_pairs);
    }
    if (reproduce->parsed()) {
      return run_reproduce(figure, outdir);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
