#include "lpm/solvers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lpm {
namespace {

constexpr double kRankEpsilon = 1e-24;  // relative eigenvalue cutoff of A^T A
constexpr double kTinyRange = 1e-12;    // guards unit vectors at a station

struct LmResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Levenberg-Marquardt with multiplicative damping on the normal-matrix
// diagonal. Evaluator fills residuals and the Jacobian at x. Stops on a small
// scaled gradient, small relative improvement of an accepted step, a small
// scaled step, or the iteration cap; only the cap leaves converged = false.
template <typename Eval>
LmResult lm_minimize(Eval&& eval, Eigen::VectorXd x, const LmConfig& cfg) {
  Eigen::VectorXd r, r_trial;
  Eigen::MatrixXd J, J_trial;
  eval(x, r, J);
  double f = 0.5 * r.squaredNorm();
  Eigen::VectorXd grad = J.transpose() * r;

  const auto gradient_small = [&cfg](const Eigen::VectorXd& at, const Eigen::VectorXd& g,
                                     double value) {
    return g.norm() * std::max(at.norm(), 1.0) / std::max(value, 1.0) <=
           cfg.scaled_gradient_tol;
  };

  LmResult result;
  result.converged = gradient_small(x, grad, f);
  double lambda = cfg.initial_lambda;

  while (!result.converged && result.iterations < cfg.max_iterations) {
    ++result.iterations;
    Eigen::MatrixXd damped = J.transpose() * J;
    damped.diagonal() += lambda * damped.diagonal().cwiseMax(kTinyRange);
    const Eigen::VectorXd step = damped.ldlt().solve(-grad);

    bool accepted = false;
    if (step.allFinite()) {
      const Eigen::VectorXd x_trial = x + step;
      eval(x_trial, r_trial, J_trial);
      const double f_trial = 0.5 * r_trial.squaredNorm();
      if (std::isfinite(f_trial) && f_trial < f) {
        const double f_prev = f;
        x = x_trial;
        r.swap(r_trial);
        J.swap(J_trial);
        f = f_trial;
        grad = J.transpose() * r;
        lambda = std::max(lambda / cfg.lambda_drop, 1e-12);
        accepted = true;
        if (gradient_small(x, grad, f) ||
            (f_prev - f) <= cfg.relative_improvement_tol * std::max(f_prev, 1e-300) ||
            step.norm() <= cfg.scaled_step_tol * std::max(x.norm(), 1.0)) {
          result.converged = true;
        }
      }
    }
    if (!accepted) {
      lambda = std::min(lambda * cfg.lambda_rise, 1e12);
    }
  }

  result.x = std::move(x);
  result.f = f;
  return result;
}

void check_selection(const PairSelection& selection, std::size_t station_count) {
  if (selection.pivot >= station_count) {
    throw std::invalid_argument("pair selection: pivot out of range");
  }
  for (const auto& [i, j] : selection.pairs) {
    if (i >= station_count || j >= station_count || i == j) {
      throw std::invalid_argument("pair selection: bad station pair");
    }
  }
}

// Distances and unit vectors from `position` to every station, reused by
// residual and Jacobian rows.
void station_geometry(const Point& position, const StationArray& stations,
                      std::vector<double>& dist, std::vector<Eigen::VectorXd>& unit) {
  const std::size_t n = stations.count();
  dist.resize(n);
  unit.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    Eigen::VectorXd delta = position - stations.bases[s];
    double norm = delta.norm();
    if (norm < kTinyRange) norm = kTinyRange;
    dist[s] = norm;
    unit[s] = delta / norm;
  }
}

Fix solve_tdoa_core(std::span<const double> pair_diffs, const PairSelection& selection,
                    const StationArray& stations, const Point& start, const LmConfig& cfg,
                    std::int64_t frame_index) {
  stations.validate();
  check_selection(selection, stations.count());
  if (pair_diffs.size() != selection.pairs.size()) {
    throw std::invalid_argument("solve_nonlinear_tdoa: one difference per pair required");
  }
  const int d = stations.dimension();
  if (start.size() != d) {
    throw std::invalid_argument("solve_nonlinear_tdoa: start dimension mismatch");
  }
  if (selection.pairs.size() < static_cast<std::size_t>(d)) {
    throw std::invalid_argument("solve_nonlinear_tdoa: underdetermined pair selection");
  }

  std::vector<double> dist;
  std::vector<Eigen::VectorXd> unit;
  const auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    station_geometry(x, stations, dist, unit);
    const auto m = static_cast<Eigen::Index>(selection.pairs.size());
    r.resize(m);
    J.resize(m, d);
    for (Eigen::Index t = 0; t < m; ++t) {
      const auto [i, j] = selection.pairs[static_cast<std::size_t>(t)];
      r(t) = (dist[i] - dist[j]) - pair_diffs[static_cast<std::size_t>(t)];
      J.row(t) = (unit[i] - unit[j]).transpose();
    }
  };

  const LmResult lm = lm_minimize(eval, start, cfg);

  Fix fix;
  fix.frame_index = frame_index;
  fix.position = lm.x;
  fix.residual_norm = std::sqrt(2.0 * lm.f);
  fix.iterations = lm.iterations;
  fix.converged = lm.converged;
  return fix;
}

}  // namespace

PairSelection PairSelection::against_pivot(std::size_t station_count, std::size_t pivot) {
  if (pivot >= station_count) {
    throw std::invalid_argument("PairSelection: pivot out of range");
  }
  PairSelection selection;
  selection.pivot = pivot;
  selection.pairs.reserve(station_count - 1);
  for (std::size_t i = 0; i < station_count; ++i) {
    if (i != pivot) selection.pairs.emplace_back(i, pivot);
  }
  return selection;
}

PairSelection PairSelection::all_pairs(std::size_t station_count, std::size_t pivot) {
  if (pivot >= station_count) {
    throw std::invalid_argument("PairSelection: pivot out of range");
  }
  PairSelection selection;
  selection.pivot = pivot;
  selection.pairs.reserve(station_count * (station_count - 1) / 2);
  for (std::size_t i = 0; i < station_count; ++i) {
    for (std::size_t j = i + 1; j < station_count; ++j) {
      selection.pairs.emplace_back(i, j);
    }
  }
  return selection;
}

const FilteredSample* FilteredDifferenceFrame::find(std::size_t i, std::size_t j,
                                                    double& sign) const {
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    if (pairs[t].first == i && pairs[t].second == j) {
      sign = 1.0;
      return &samples[t];
    }
    if (pairs[t].first == j && pairs[t].second == i) {
      sign = -1.0;
      return &samples[t];
    }
  }
  return nullptr;
}

namespace {

// Shared core of the builders: fills `out` in place so a caller holding a
// scratch object does not reallocate the matrices every frame. Station
// validation is the caller's job (once, not per frame).
void build_from_pivot_diffs_into(std::span<const double> pivot_diffs, std::size_t pivot,
                                 double pivot_value, const StationArray& stations,
                                 const PairSelection& selection, LinearSystem& out) {
  check_selection(selection, stations.count());
  if (pivot != selection.pivot) {
    throw std::invalid_argument("build_linear_system: pivot mismatch");
  }
  if (pivot_diffs.size() != stations.count()) {
    throw std::invalid_argument("build_linear_system: one pivot difference per station");
  }
  const int d = stations.dimension();
  const auto m = static_cast<Eigen::Index>(selection.pairs.size());
  if (m < d + 1) {
    throw std::invalid_argument("build_linear_system: underdetermined (" +
                                std::to_string(m) + " pairs for " + std::to_string(d + 1) +
                                " unknowns)");
  }

  out.A.resize(m, d + 1);
  out.b.resize(m);
  out.row_pairs = selection.pairs;
  out.offset_shift = pivot_value;
  for (Eigen::Index t = 0; t < m; ++t) {
    const auto [i, j] = selection.pairs[static_cast<std::size_t>(t)];
    const Eigen::VectorXd& bi = stations.bases[i];
    const Eigen::VectorXd& bj = stations.bases[j];
    const double li = pivot_diffs[i];
    const double lj = pivot_diffs[j];
    const double dij = li - lj;
    out.A.block(t, 0, 1, d) = (bi - bj).transpose();
    out.A(t, d) = -dij;
    out.b(t) = 0.5 * ((bi.squaredNorm() - bj.squaredNorm()) - dij * (li + lj));
  }
}

}  // namespace

LinearSystem build_linear_system_from_pivot_diffs(std::span<const double> pivot_diffs,
                                                  std::size_t pivot, double pivot_value,
                                                  const StationArray& stations,
                                                  const PairSelection& selection) {
  stations.validate();
  LinearSystem system;
  build_from_pivot_diffs_into(pivot_diffs, pivot, pivot_value, stations, selection, system);
  return system;
}

const LinearSystem& build_linear_system(const AugmentedFrame& aug,
                                        const StationArray& stations,
                                        const PairSelection& selection,
                                        LinearScratch& scratch) {
  if (aug.size() != stations.count()) {
    throw std::invalid_argument("build_linear_system: frame/station count mismatch");
  }
  scratch.corrected.assign(aug.size(), 0.0);
  for (std::size_t i = 0; i < aug.size(); ++i) {
    if (i != selection.pivot) scratch.corrected[i] = aug.difference(i, selection.pivot);
  }
  build_from_pivot_diffs_into(scratch.corrected, selection.pivot,
                              aug.values[selection.pivot], stations, selection,
                              scratch.system);
  scratch.system.frame_index = aug.frame_index;
  return scratch.system;
}

LinearSystem build_linear_system(const AugmentedFrame& aug, const StationArray& stations,
                                 const PairSelection& selection) {
  stations.validate();
  LinearScratch scratch;
  return build_linear_system(aug, stations, selection, scratch);
}

namespace {

// Extreme eigenvalues of a small symmetric PSD matrix, eigenvalues only.
// The closed form is only wired up for true fixed-size types, so dispatch by
// runtime size; its ~1e-8 relative accuracy cannot certify near-singularity,
// hence the iterative fallback when the spread looks extreme.
template <class SqT>
void symmetric_eigen_range(const SqT& normal, double& lambda_min, double& lambda_max) {
  const Eigen::Index n = normal.rows();
  if (n == 2) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es;
    es.computeDirect(Eigen::Matrix2d(normal), Eigen::EigenvaluesOnly);
    lambda_min = es.eigenvalues()(0);
    lambda_max = es.eigenvalues()(1);
  } else if (n == 3) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    const Eigen::Matrix3d m(normal);
    es.computeDirect(m, Eigen::EigenvaluesOnly);
    lambda_min = es.eigenvalues()(0);
    lambda_max = es.eigenvalues()(2);
    if (lambda_max > 0.0 && lambda_min < lambda_max * 1e-8) {
      es.compute(m, Eigen::EigenvaluesOnly);
      lambda_min = es.eigenvalues()(0);
      lambda_max = es.eigenvalues()(2);
    }
  } else if (n == 4) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(Eigen::Matrix4d(normal),
                                                            Eigen::EigenvaluesOnly);
    lambda_min = es.eigenvalues()(0);
    lambda_max = es.eigenvalues()(3);
  } else {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(normal),
                                                            Eigen::EigenvaluesOnly);
    lambda_min = es.eigenvalues()(0);
    lambda_max = es.eigenvalues()(n - 1);
  }
}

// Core of solve_linear, templated on matrix capacity so that the per-frame
// case (a handful of rows, 3-4 columns) runs entirely on the stack. MaxRows
// = Eigen::Dynamic gives the general heap-backed instantiation.
template <int MaxRows, int MaxCols>
Fix solve_linear_impl(const LinearSystem& system, std::span<const double> row_weights,
                      const LinearSolveOptions& options) {
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                            MaxRows, MaxCols>;
  using RVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, MaxRows, 1>;
  using Sq = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                           MaxCols, MaxCols>;
  using CVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, MaxCols, 1>;

  const Eigen::Index m = system.A.rows();
  const Eigen::Index cols = system.A.cols();

  Mat A = system.A;
  RVec b = system.b;
  if (!row_weights.empty()) {
    for (Eigen::Index t = 0; t < m; ++t) {
      const double w = row_weights[static_cast<std::size_t>(t)];
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw std::invalid_argument("solve_linear: weights must be positive and finite");
      }
      A.row(t) *= w;
      b(t) *= w;
    }
  }

  Fix fix;
  fix.frame_index = system.frame_index;

  const CVec column_norms = A.colwise().norm();
  const double max_norm = column_norms.maxCoeff();
  const double min_norm = column_norms.minCoeff();
  const double pivot_ratio = max_norm > 0.0 ? min_norm / max_norm : 0.0;

  for (Eigen::Index c = 0; c < cols; ++c) {
    if (column_norms(c) > 0.0) A.col(c) /= column_norms(c);
  }

  const Sq normal = A.transpose() * A;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  symmetric_eigen_range(normal, lambda_min, lambda_max);
  const bool full_rank = lambda_max > 0.0 && lambda_min > lambda_max * kRankEpsilon;

  const double condition =
      full_rank ? std::sqrt(lambda_max / lambda_min)
                : std::numeric_limits<double>::infinity();
  fix.condition_number = condition;
  fix.degenerate = !full_rank || condition > options.condition_threshold ||
                   pivot_ratio < options.pivot_ratio_threshold;
  if (!full_rank) {
    return fix;  // no position; converged stays false
  }

  const CVec rhs = A.transpose() * b;
  CVec x = Eigen::LDLT<Sq>(normal).solve(rhs);
  const double scaled_residual = (A * x - b).norm();
  for (Eigen::Index c = 0; c < cols; ++c) {
    x(c) /= column_norms(c);
  }
  if (!x.allFinite()) {
    fix.degenerate = true;
    return fix;
  }

  fix.position = x.head(cols - 1);
  fix.offset = x(cols - 1) + system.offset_shift;
  fix.residual_norm = scaled_residual;
  fix.converged = true;
  return fix;
}

}  // namespace

Fix solve_linear(const LinearSystem& system, std::span<const double> row_weights,
                 const LinearSolveOptions& options) {
  const Eigen::Index m = system.A.rows();
  const Eigen::Index cols = system.A.cols();
  if (m < cols) {
    throw std::invalid_argument("solve_linear: underdetermined system");
  }
  if (!row_weights.empty() && static_cast<Eigen::Index>(row_weights.size()) != m) {
    throw std::invalid_argument("solve_linear: one weight per row required");
  }
  if (m <= 16 && cols <= 4) {
    return solve_linear_impl<16, 4>(system, row_weights, options);
  }
  return solve_linear_impl<Eigen::Dynamic, Eigen::Dynamic>(system, row_weights, options);
}

Fix solve_linear_filtered(const AugmentedFrame& aug, const StationArray& stations,
                          const FilteredDifferenceFrame& filtered,
                          const PairSelection& selection, LinearScratch& scratch,
                          const LinearSolveOptions& options, bool weighted) {
  if (aug.size() != stations.count()) {
    throw std::invalid_argument("solve_linear_filtered: frame/station count mismatch");
  }
  const std::size_t n = stations.count();
  const std::size_t pivot = selection.pivot;
  if (pivot >= n) {
    throw std::invalid_argument("solve_linear_filtered: pivot out of range");
  }

  scratch.corrected.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == pivot) continue;
    double sign = 1.0;
    const FilteredSample* sample = filtered.find(i, pivot, sign);
    if (sample == nullptr) {
      throw std::invalid_argument("solve_linear_filtered: missing filtered pair {" +
                                  std::to_string(i) + "," + std::to_string(pivot) + "}");
    }
    if (sample->warmup || sample->rejected) {
      Fix fix;
      fix.frame_index = aug.frame_index;
      fix.warmup = true;
      return fix;
    }
    scratch.corrected[i] = sign * sample->value;
  }

  build_from_pivot_diffs_into(scratch.corrected, pivot, aug.values[pivot], stations,
                              selection, scratch.system);
  scratch.system.frame_index = aug.frame_index;

  scratch.row_weights.clear();
  if (weighted) {
    scratch.row_weights.reserve(selection.pairs.size());
    for (const auto& [i, j] : selection.pairs) {
      double sign = 1.0;
      const FilteredSample* sample = filtered.find(i, j, sign);
      if (sample == nullptr) {
        throw std::invalid_argument("solve_linear_filtered: missing weight pair {" +
                                    std::to_string(i) + "," + std::to_string(j) + "}");
      }
      if (sample->warmup || sample->rejected) {
        Fix fix;
        fix.frame_index = aug.frame_index;
        fix.warmup = true;
        return fix;
      }
      scratch.row_weights.push_back(sample->weight);
    }
  }

  return solve_linear(scratch.system, scratch.row_weights, options);
}

Fix solve_linear_filtered(const AugmentedFrame& aug, const StationArray& stations,
                          const FilteredDifferenceFrame& filtered, std::size_t pivot,
                          const LinearSolveOptions& options, bool weighted,
                          bool all_pairs) {
  stations.validate();
  const std::size_t n = stations.count();
  if (pivot >= n) {
    throw std::invalid_argument("solve_linear_filtered: pivot out of range");
  }
  const PairSelection selection =
      all_pairs ? PairSelection::all_pairs(n, pivot) : PairSelection::against_pivot(n, pivot);
  LinearScratch scratch;
  return solve_linear_filtered(aug, stations, filtered, selection, scratch, options,
                               weighted);
}

Eigen::VectorXd tdoa_residuals(const Point& position, const AugmentedFrame& aug,
                               const StationArray& stations, const PairSelection& selection) {
  if (aug.size() != stations.count()) {
    throw std::invalid_argument("tdoa_residuals: frame/station count mismatch");
  }
  check_selection(selection, stations.count());
  if (position.size() != stations.dimension()) {
    throw std::invalid_argument("tdoa_residuals: position dimension mismatch");
  }
  std::vector<double> dist;
  std::vector<Eigen::VectorXd> unit;
  station_geometry(position, stations, dist, unit);
  Eigen::VectorXd r(static_cast<Eigen::Index>(selection.pairs.size()));
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    const auto [i, j] = selection.pairs[static_cast<std::size_t>(t)];
    r(t) = (dist[i] - dist[j]) - aug.difference(i, j);
  }
  return r;
}

Eigen::MatrixXd tdoa_jacobian(const Point& position, const StationArray& stations,
                              const PairSelection& selection) {
  check_selection(selection, stations.count());
  if (position.size() != stations.dimension()) {
    throw std::invalid_argument("tdoa_jacobian: position dimension mismatch");
  }
  std::vector<double> dist;
  std::vector<Eigen::VectorXd> unit;
  station_geometry(position, stations, dist, unit);
  Eigen::MatrixXd J(static_cast<Eigen::Index>(selection.pairs.size()), stations.dimension());
  for (Eigen::Index t = 0; t < J.rows(); ++t) {
    const auto [i, j] = selection.pairs[static_cast<std::size_t>(t)];
    J.row(t) = (unit[i] - unit[j]).transpose();
  }
  return J;
}

Fix solve_nonlinear_tdoa(const AugmentedFrame& aug, const StationArray& stations,
                         const Point& start, const LmConfig& config,
                         const PairSelection* selection) {
  if (aug.size() != stations.count()) {
    throw std::invalid_argument("solve_nonlinear_tdoa: frame/station count mismatch");
  }
  const PairSelection fallback =
      selection == nullptr ? PairSelection::against_pivot(stations.count(), 0) : PairSelection{};
  const PairSelection& used = selection == nullptr ? fallback : *selection;
  std::vector<double> diffs;
  diffs.reserve(used.pairs.size());
  for (const auto& [i, j] : used.pairs) {
    diffs.push_back(aug.difference(i, j));
  }
  return solve_tdoa_core(diffs, used, stations, start, config, aug.frame_index);
}

Fix solve_nonlinear_tdoa(std::span<const double> pair_diffs, const PairSelection& selection,
                         const StationArray& stations, const Point& start,
                         const LmConfig& config) {
  return solve_tdoa_core(pair_diffs, selection, stations, start, config, 0);
}

Fix solve_nonlinear_toa(const Frame& frame, const StationArray& stations,
                        const Point& start_position, double start_offset,
                        const LmConfig& config) {
  stations.validate();
  if (frame.pseudo_ranges.size() != stations.count()) {
    throw std::invalid_argument("solve_nonlinear_toa: frame/station count mismatch");
  }
  const int d = stations.dimension();
  if (start_position.size() != d) {
    throw std::invalid_argument("solve_nonlinear_toa: start dimension mismatch");
  }
  const std::size_t n = stations.count();
  std::vector<double> reference(n);
  for (std::size_t s = 0; s < n; ++s) {
    reference[s] = stations.reference_range(s);
  }

  std::vector<double> dist;
  std::vector<Eigen::VectorXd> unit;
  const auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    const Eigen::VectorXd position = x.head(d);
    const double offset = x(d);
    station_geometry(position, stations, dist, unit);
    r.resize(static_cast<Eigen::Index>(n));
    J.resize(static_cast<Eigen::Index>(n), d + 1);
    for (std::size_t s = 0; s < n; ++s) {
      const auto t = static_cast<Eigen::Index>(s);
      // Offset and measurement differ by geometry only; subtracting the two
      // large values first keeps the residual at geometry scale.
      r(t) = (offset - frame.pseudo_ranges[s]) + (dist[s] - reference[s]);
      J.block(t, 0, 1, d) = unit[s].transpose();
      J(t, d) = 1.0;
    }
  };

  Eigen::VectorXd start(d + 1);
  start.head(d) = start_position;
  start(d) = start_offset;
  const LmResult lm = lm_minimize(eval, start, config);

  Fix fix;
  fix.frame_index = frame.frame_index;
  fix.position = lm.x.head(d);
  fix.offset = lm.x(d);
  fix.residual_norm = std::sqrt(2.0 * lm.f);
  fix.iterations = lm.iterations;
  fix.converged = lm.converged;
  return fix;
}

}  // namespace lpm
