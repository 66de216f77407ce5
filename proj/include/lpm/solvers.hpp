#pragma once

#include "lpm/filters.hpp"
#include "lpm/geometry.hpp"
#include "lpm/transform.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace lpm {

// Which station pairs feed a solve. `pivot` is the differencing base: every
// difference is expressed through D_i = L_i - L_pivot regardless of the pair
// list, so a shared clock offset cancels once, in one place.
struct PairSelection {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t pivot = 0;

  static PairSelection against_pivot(std::size_t station_count, std::size_t pivot);
  static PairSelection all_pairs(std::size_t station_count, std::size_t pivot);
};

// Linear pairwise system in unknowns (M, O'). Row for pair (i, j):
//   [ (B_i - B_j)^T, -(L_i - L_j) ] (M, O')^T
//       = ((|B_i|^2 - |B_j|^2) - (l_i^2 - l_j^2)) / 2
// where l_i = L_i - L_pivot. Building the quadratic terms from the pivot-
// relative values l instead of the raw L keeps every entry at geometry scale;
// squaring values that sit on a 1e7 m clock offset would cost ~1e-7 m in the
// right-hand side. The reparameterization shifts only the offset coordinate:
// the minimizing O' relates to the physical offset by O = O' + offset_shift,
// with offset_shift = L_pivot. Coefficients are unchanged since
// l_i - l_j = L_i - L_j.
struct LinearSystem {
  std::int64_t frame_index = 0;
  Eigen::MatrixXd A;  // m x (d+1)
  Eigen::VectorXd b;  // m
  std::vector<std::pair<std::size_t, std::size_t>> row_pairs;
  double offset_shift = 0.0;
};

struct Fix {
  std::int64_t frame_index = 0;
  std::optional<Point> position;
  std::optional<double> offset;  // absent for position-only solves
  double residual_norm = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> condition_number;  // linear solves only
  std::optional<int> iterations;           // iterative solves only
  bool converged = false;
  bool degenerate = false;
  bool warmup = false;
};

struct LinearSolveOptions {
  // Condition number of the column-equilibrated coefficient matrix above
  // which a solution is flagged unreliable. Beyond ~1e3 a centimetre-scale
  // measurement error can displace the fix by more than the span of the
  // station array itself, so such solutions are flagged rather than
  // reported as trustworthy. The flag marks statistical unreliability long
  // before double precision itself breaks down.
  double condition_threshold = 1e3;
  // Minimum ratio of smallest to largest column norm of the (weighted)
  // coefficient matrix. Catches the failure mode where every usable
  // difference is near zero (transponder nearly equidistant from all
  // stations), which equilibration alone hides.
  double pivot_ratio_threshold = 1e-2;
};

struct LmConfig {
  double scaled_gradient_tol = 1e-6;       // |grad| * max(|x|, 1) / max(f, 1)
  double relative_improvement_tol = 1e-5;  // (f_prev - f) / max(f_prev, tiny)
  double scaled_step_tol = 1e-3;           // |dx| / max(|x|, 1)
  int max_iterations = 20;
  double initial_lambda = 1e-3;
  double lambda_rise = 10.0;  // multiply on a rejected step
  double lambda_drop = 10.0;  // divide on an accepted step
};

// Filtered per-pair difference values for one frame. Pairs are unordered with
// i < j; the stored value estimates L_i - L_j.
struct FilteredDifferenceFrame {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<FilteredSample> samples;

  // Sample for the unordered pair {i, j}; sign is +1 when the stored value
  // already means L_i - L_j and -1 when it means L_j - L_i. Null when absent.
  const FilteredSample* find(std::size_t i, std::size_t j, double& sign) const;
};

LinearSystem build_linear_system(const AugmentedFrame& aug, const StationArray& stations,
                                 const PairSelection& selection);

// Same system built from explicit pivot-relative differences
// (pivot_diffs[i] = L_i - L_pivot, pivot slot zero). pivot_value supplies
// offset_shift so the physical offset can be reported.
LinearSystem build_linear_system_from_pivot_diffs(std::span<const double> pivot_diffs,
                                                  std::size_t pivot, double pivot_value,
                                                  const StationArray& stations,
                                                  const PairSelection& selection);

// Weighted least-squares solution of the pairwise system. Weights multiply
// rows directly (w = 1/variance on both sides), so any uniform weight vector
// reproduces the unweighted minimizer. An empty span means unweighted.
// Rank deficiency yields a degenerate Fix without a position; exceeding the
// condition or column-ratio thresholds keeps the position but flags it.
Fix solve_linear(const LinearSystem& system, std::span<const double> row_weights = {},
                 const LinearSolveOptions& options = {});

// How the filter folds into the linear solve
// ------------------------------------------
// Write the measured augmented value as L_i = C_i + a_i where C_i is the
// clean value (offset + ||M - B_i||) and a_i the station's noise. A smoothing
// filter F applied to a difference stream estimates the stream's clean part,
// so the residue
//     F_ij = (L_i - L_j) - F(L_i - L_j)
// estimates the relative noise a_i - a_j. Fixing a pivot station k and
// subtracting each station's residue against it corrects the measurements up
// to the pivot's own noise:
//     Lhat_i = L_i - F_ik = C_i + a_k        (exactly, under a perfect F)
// so solving for a_j through the corrected values amounts to a_j = a_i - F_ij
// (the residue carries a minus sign on the second station's noise, not a
// plus). Substituting Lhat into the pairwise system keeps its form intact
// with the offset unknown shifted to O + a_k: the common a_k drops out of
// every difference, and the squared terms produce 2 a_k (Lhat_i - Lhat_j),
// absorbed by the shifted unknown. In pivot-relative form the correction
// collapses to using the filtered streams directly,
//     Lhat_i - Lhat_k = F(L_i - L_k),
// so this routine rebuilds the standard system from the filtered pivot
// differences and reports offset = x_offset + L_k = O + a_k.
//
// Required samples: channel {i, pivot} for every station. With all_pairs
// rows, channel {i, j} supplies each row's weight. Any required sample still
// in warmup (or rejected) yields a warmup Fix. When `weighted`, rows are
// scaled by the per-channel weights (1/variance, floored).
Fix solve_linear_filtered(const AugmentedFrame& aug, const StationArray& stations,
                          const FilteredDifferenceFrame& filtered, std::size_t pivot,
                          const LinearSolveOptions& options = {}, bool weighted = false,
                          bool all_pairs = false);

// Reusable buffers for the per-frame variants below. One instance carried
// across a long run keeps the solve loop free of repeated allocation;
// results are identical to the one-shot calls.
struct LinearScratch {
  LinearSystem system;
  std::vector<double> corrected;
  std::vector<double> row_weights;
};

// Scratch-reusing equivalents. The returned reference points into scratch
// and stays valid until the next call with the same scratch object.
const LinearSystem& build_linear_system(const AugmentedFrame& aug,
                                        const StationArray& stations,
                                        const PairSelection& selection,
                                        LinearScratch& scratch);
Fix solve_linear_filtered(const AugmentedFrame& aug, const StationArray& stations,
                          const FilteredDifferenceFrame& filtered,
                          const PairSelection& selection, LinearScratch& scratch,
                          const LinearSolveOptions& options = {}, bool weighted = false);

// r_t = (||M - B_i|| - ||M - B_j||) - D_ij for each selected pair.
Eigen::VectorXd tdoa_residuals(const Point& position, const AugmentedFrame& aug,
                               const StationArray& stations, const PairSelection& selection);

// Analytic Jacobian of tdoa_residuals: row t = unit(M - B_i) - unit(M - B_j).
Eigen::MatrixXd tdoa_jacobian(const Point& position, const StationArray& stations,
                              const PairSelection& selection);

// Damped Gauss-Newton over the position only; the clock offset never enters
// because the residuals consume differences. Defaults to pivot-0 pairs.
Fix solve_nonlinear_tdoa(const AugmentedFrame& aug, const StationArray& stations,
                         const Point& start, const LmConfig& config = {},
                         const PairSelection* selection = nullptr);

// Same solver on externally supplied (for example filtered) differences,
// one value per selection pair.
Fix solve_nonlinear_tdoa(std::span<const double> pair_diffs, const PairSelection& selection,
                         const StationArray& stations, const Point& start,
                         const LmConfig& config = {});

// Reference solver on raw pseudo-ranges over (M, O) jointly. Exists to show
// what the offset does to the conditioning; expect trouble when the start
// offset is far off.
Fix solve_nonlinear_toa(const Frame& frame, const StationArray& stations,
                        const Point& start_position, double start_offset,
                        const LmConfig& config = {});

}  // namespace lpm
