#include "lpm/runner.hpp"

#include "lpm/transform.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace lpm {
namespace {

struct Channel {
  std::size_t a = 0;  // a < b, stored value means L_a - L_b
  std::size_t b = 0;
  std::vector<FilteredSample> samples;
};

bool uses_filtered_differences(const RunOptions& options) {
  switch (options.method) {
    case Method::LinearFiltered:
    case Method::LinearWeighted:
      return true;
    case Method::NonlinearTdoa:
      return options.prefilter_nonlinear;
    default:
      return false;
  }
}

std::vector<std::pair<std::size_t, std::size_t>> needed_channels(
    std::size_t station_count, const RunOptions& options,
    const PairSelection& row_selection) {
  std::vector<std::pair<std::size_t, std::size_t>> channels;
  const auto add = [&channels](std::size_t i, std::size_t j) {
    const auto key = std::minmax(i, j);
    for (const auto& existing : channels) {
      if (existing.first == key.first && existing.second == key.second) return;
    }
    channels.emplace_back(key.first, key.second);
  };
  for (std::size_t i = 0; i < station_count; ++i) {
    if (i != options.pivot) add(i, options.pivot);
  }
  for (const auto& [i, j] : row_selection.pairs) {
    add(i, j);
  }
  return channels;
}

}  // namespace

std::string method_name(Method method) {
  switch (method) {
    case Method::Linear: return "linear";
    case Method::LinearFiltered: return "linear-filtered";
    case Method::LinearWeighted: return "linear-weighted";
    case Method::NonlinearTdoa: return "nonlinear-tdoa";
    case Method::NonlinearToa: return "nonlinear-toa";
  }
  throw std::logic_error("method_name: unhandled method");
}

Method method_from_name(const std::string& name) {
  if (name == "linear") return Method::Linear;
  if (name == "linear-filtered") return Method::LinearFiltered;
  if (name == "linear-weighted") return Method::LinearWeighted;
  if (name == "nonlinear-tdoa") return Method::NonlinearTdoa;
  if (name == "nonlinear-toa") return Method::NonlinearToa;
  throw std::invalid_argument(
      "unknown method '" + name +
      "' (expected linear, linear-filtered, linear-weighted, nonlinear-tdoa, "
      "nonlinear-toa)");
}

std::string RunReport::to_json() const {
  nlohmann::json j{{"method", method},
                   {"frames", frames},
                   {"solved", solved},
                   {"warmup", warmup},
                   {"degenerate", degenerate},
                   {"converged", converged},
                   {"not_converged", not_converged},
                   {"truth_delay_frames", truth_delay_frames},
                   {"error_frames_used", error_frames_used},
                   {"error_frames_excluded", error_frames_excluded},
                   {"wall_clock_ms", wall_clock_ms}};
  if (std::isfinite(mean_path_error_m)) {
    j["mean_path_error_m"] = mean_path_error_m;
  } else {
    j["mean_path_error_m"] = nullptr;
  }
  return j.dump(2);
}

double mean_path_error(std::span<const Fix> fixes, std::span<const Point> truth,
                       int delay_frames) {
  double sum = 0.0;
  std::int64_t used = 0;
  for (const Fix& fix : fixes) {
    if (!fix.position || fix.warmup || fix.degenerate) continue;
    const std::int64_t truth_index = fix.frame_index - delay_frames;
    if (truth_index < 0 || truth_index >= static_cast<std::int64_t>(truth.size())) continue;
    sum += distance(*fix.position, truth[static_cast<std::size_t>(truth_index)]);
    ++used;
  }
  if (used == 0) {
    throw std::invalid_argument("mean_path_error: no usable fixes");
  }
  return sum / static_cast<double>(used);
}

RunResult run_method(const Trajectory& trajectory, const StationArray& stations,
                     const RunOptions& options) {
  stations.validate();
  options.filter.validate();
  const std::size_t n = stations.count();
  if (options.pivot >= n) {
    throw std::invalid_argument("run_method: pivot out of range");
  }
  if (trajectory.frames.empty()) {
    throw std::invalid_argument("run_method: empty trajectory");
  }
  const bool filtered = uses_filtered_differences(options);
  if (options.oracle_filter && !filtered) {
    throw std::invalid_argument("run_method: oracle filter requires a filtered method");
  }
  if (options.oracle_filter && trajectory.truth.size() != trajectory.frames.size()) {
    throw std::invalid_argument("run_method: oracle filter requires trajectory truth");
  }

  const std::size_t frame_count = trajectory.frames.size();
  const int d = stations.dimension();
  const PairSelection row_selection = options.all_pairs
                                          ? PairSelection::all_pairs(n, options.pivot)
                                          : PairSelection::against_pivot(n, options.pivot);

  // Untimed preparation: augmentation and (when applicable) the smoothing
  // passes. Solvers below consume only precomputed per-frame structures so
  // the timed section measures solving alone.
  std::vector<AugmentedFrame> augmented;
  augmented.reserve(frame_count);
  for (const Frame& frame : trajectory.frames) {
    augmented.push_back(augment(frame, stations));
  }

  std::vector<Channel> channels;
  std::vector<FilteredDifferenceFrame> filtered_frames;
  std::vector<std::vector<double>> nonlinear_diffs;   // per frame, per row pair
  std::vector<bool> nonlinear_warmup;
  if (filtered) {
    const auto channel_pairs = needed_channels(n, options, row_selection);
    channels.reserve(channel_pairs.size());
    for (const auto& [a, b] : channel_pairs) {
      channels.push_back({a, b, {}});
      channels.back().samples.reserve(frame_count);
    }

    if (options.oracle_filter) {
      for (auto& channel : channels) {
        for (std::size_t k = 0; k < frame_count; ++k) {
          FilteredSample sample;
          sample.frame_index = static_cast<std::int64_t>(k);
          sample.value = distance(trajectory.truth[k], stations.bases[channel.a]) -
                         distance(trajectory.truth[k], stations.bases[channel.b]);
          sample.variance = 0.0;
          sample.weight = 1.0 / options.filter.weight_floor;
          sample.warmup = false;
          channel.samples.push_back(sample);
        }
      }
    } else {
      for (auto& channel : channels) {
        FilterState state(options.filter);
        for (std::size_t k = 0; k < frame_count; ++k) {
          channel.samples.push_back(state.push(augmented[k].difference(channel.a, channel.b)));
        }
        if (!options.filter.outlier_variance_threshold) {
          const double threshold = adaptive_variance_threshold(
              channel.samples, options.filter.outlier_threshold_scale);
          flag_outliers(channel.samples, threshold);
        }
      }
    }

    filtered_frames.resize(frame_count);
    std::vector<std::pair<std::size_t, std::size_t>> pair_list;
    pair_list.reserve(channels.size());
    for (const auto& channel : channels) {
      pair_list.emplace_back(channel.a, channel.b);
    }
    for (std::size_t k = 0; k < frame_count; ++k) {
      filtered_frames[k].pairs = pair_list;
      filtered_frames[k].samples.reserve(channels.size());
      for (const auto& channel : channels) {
        filtered_frames[k].samples.push_back(channel.samples[k]);
      }
    }

    if (options.method == Method::NonlinearTdoa) {
      nonlinear_diffs.resize(frame_count);
      nonlinear_warmup.assign(frame_count, false);
      for (std::size_t k = 0; k < frame_count; ++k) {
        auto& diffs = nonlinear_diffs[k];
        diffs.reserve(row_selection.pairs.size());
        for (const auto& [i, j] : row_selection.pairs) {
          double sign = 1.0;
          const FilteredSample* sample = filtered_frames[k].find(i, j, sign);
          if (sample == nullptr) {
            throw std::logic_error("run_method: missing channel for selected pair");
          }
          if (sample->warmup || sample->rejected) {
            nonlinear_warmup[k] = true;
            break;
          }
          diffs.push_back(sign * sample->value);
        }
      }
    }
  }

  RunResult result;
  result.fixes.resize(frame_count);

  const auto t0 = std::chrono::steady_clock::now();
  switch (options.method) {
    case Method::Linear: {
      LinearScratch scratch;
      for (std::size_t k = 0; k < frame_count; ++k) {
        const LinearSystem& system =
            build_linear_system(augmented[k], stations, row_selection, scratch);
        result.fixes[k] = solve_linear(system, {}, options.linear);
      }
      break;
    }
    case Method::LinearFiltered:
    case Method::LinearWeighted: {
      const bool weighted = options.method == Method::LinearWeighted;
      LinearScratch scratch;
      for (std::size_t k = 0; k < frame_count; ++k) {
        result.fixes[k] = solve_linear_filtered(augmented[k], stations, filtered_frames[k],
                                                row_selection, scratch, options.linear,
                                                weighted);
      }
      break;
    }
    case Method::NonlinearTdoa: {
      Point start = Point::Zero(d);
      for (std::size_t k = 0; k < frame_count; ++k) {
        if (filtered && nonlinear_warmup[k]) {
          Fix fix;
          fix.frame_index = augmented[k].frame_index;
          fix.warmup = true;
          result.fixes[k] = fix;
          continue;
        }
        Fix fix = filtered
                      ? solve_nonlinear_tdoa(nonlinear_diffs[k], row_selection, stations,
                                             start, options.lm)
                      : solve_nonlinear_tdoa(augmented[k], stations, start, options.lm,
                                             &row_selection);
        fix.frame_index = augmented[k].frame_index;
        if (fix.position) start = *fix.position;
        result.fixes[k] = std::move(fix);
      }
      break;
    }
    case Method::NonlinearToa: {
      Point start = Point::Zero(d);
      for (std::size_t k = 0; k < frame_count; ++k) {
        const auto& values = augmented[k].values;
        const double offset_start =
            std::accumulate(values.begin(), values.end(), 0.0) /
            static_cast<double>(values.size());
        Fix fix = solve_nonlinear_toa(trajectory.frames[k], stations, start, offset_start,
                                      options.lm);
        if (fix.position) start = *fix.position;
        result.fixes[k] = std::move(fix);
      }
      break;
    }
  }
  const auto t1 = std::chrono::steady_clock::now();

  RunReport& report = result.report;
  report.method = method_name(options.method);
  report.frames = static_cast<std::int64_t>(frame_count);
  report.wall_clock_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  report.truth_delay_frames =
      (filtered && !options.oracle_filter) ? options.filter.group_delay() : 0;
  for (const Fix& fix : result.fixes) {
    if (fix.warmup) {
      ++report.warmup;
      continue;
    }
    if (fix.degenerate) {
      ++report.degenerate;
    } else {
      ++report.solved;
    }
    if (fix.converged) {
      ++report.converged;
    } else {
      ++report.not_converged;
    }
  }

  if (!trajectory.truth.empty()) {
    std::int64_t usable = 0;
    for (const Fix& fix : result.fixes) {
      const std::int64_t truth_index = fix.frame_index - report.truth_delay_frames;
      if (fix.position && !fix.warmup && !fix.degenerate && truth_index >= 0 &&
          truth_index < static_cast<std::int64_t>(trajectory.truth.size())) {
        ++usable;
      }
    }
    report.error_frames_used = usable;
    report.error_frames_excluded = report.frames - usable;
    if (usable > 0) {
      report.mean_path_error_m =
          mean_path_error(result.fixes, trajectory.truth, report.truth_delay_frames);
    }
  }

  return result;
}

}  // namespace lpm
