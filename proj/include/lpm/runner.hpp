#pragma once

#include "lpm/filters.hpp"
#include "lpm/geometry.hpp"
#include "lpm/solvers.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace lpm {

enum class Method {
  Linear,          // raw pivot differences, unweighted
  LinearFiltered,  // smoothed differences, unweighted
  LinearWeighted,  // smoothed differences, rows weighted by 1/variance
  NonlinearTdoa,   // position-only iterative solve on differences
  NonlinearToa,    // iterative solve on raw pseudo-ranges over (M, O)
};

std::string method_name(Method method);
Method method_from_name(const std::string& name);  // throws std::invalid_argument

struct RunOptions {
  Method method = Method::Linear;
  std::size_t pivot = 0;
  // Use every station pair instead of pairs against the pivot. Redundant rows
  // are what let variance weighting suppress a corrupted station.
  bool all_pairs = false;
  FilterSpec filter;
  // Replace the moving-average estimate with the exact clean differences
  // derived from the trajectory truth: isolates solver error from filter
  // error. Requires truth; zero group delay.
  bool oracle_filter = false;
  // Smooth the differences before the position-only iterative solve.
  bool prefilter_nonlinear = false;
  LmConfig lm;
  LinearSolveOptions linear;
};

struct RunReport {
  std::string method;
  std::int64_t frames = 0;
  std::int64_t solved = 0;      // frames = solved + warmup + degenerate
  std::int64_t warmup = 0;
  std::int64_t degenerate = 0;
  std::int64_t converged = 0;   // over non-warmup frames
  std::int64_t not_converged = 0;
  int truth_delay_frames = 0;   // fixes compare against truth shifted by this
  std::int64_t error_frames_used = 0;
  std::int64_t error_frames_excluded = 0;
  double mean_path_error_m = std::numeric_limits<double>::quiet_NaN();
  double wall_clock_ms = 0.0;   // solve loop only; filtering and I/O excluded

  std::string to_json() const;
};

struct RunResult {
  std::vector<Fix> fixes;
  RunReport report;
};

// Mean ||position - truth[frame - delay]|| over fixes that have a position
// and are neither warmup nor degenerate. Throws std::invalid_argument when no
// fix qualifies.
double mean_path_error(std::span<const Fix> fixes, std::span<const Point> truth,
                       int delay_frames);

// Full per-frame pipeline for one method: difference transform, optional
// smoothing (two passes: the outlier threshold adapts to the observed
// variance distribution), then the per-frame solve. Iterative methods warm
// start from the previous frame's fix and begin at the origin.
RunResult run_method(const Trajectory& trajectory, const StationArray& stations,
                     const RunOptions& options);

}  // namespace lpm
