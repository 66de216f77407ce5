#pragma once

#include "lpm/geometry.hpp"

#include <cstdint>
#include <vector>

namespace lpm {

struct NoiseModel {
  enum class Kind { Uniform, Gaussian };
  Kind kind = Kind::Uniform;
  // Uniform: max_abs bound of U(-param, +param). Gaussian: standard deviation.
  double param = 0.1;
};

struct OffsetModel {
  enum class Kind { Fixed, PerFrameUniform };
  Kind kind = Kind::PerFrameUniform;
  double value = 0.0;  // Fixed only
  double lo = 1.0e6;   // PerFrameUniform bounds
  double hi = 1.0e7;
};

// Additive positive excursion on one station over an inclusive frame window.
struct OutlierWindow {
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  std::size_t station_index = 0;
  double magnitude_m = 0.0;
};

struct ScenarioSpec {
  int dimension = 2;
  std::size_t station_count = 4;
  double station_radius = 10.0;  // m
  double path_radius = 5.0;      // m, transponder circle
  std::int64_t frame_count = 10000;
  NoiseModel noise;
  OffsetModel offset;
  std::vector<OutlierWindow> outlier_windows;
  std::uint64_t seed = 424242;

  // Throws std::invalid_argument on out-of-range values (station_count < 3,
  // path_radius >= station_radius, windows outside [0, frame_count), ...).
  void validate() const;
};

// station_count stations equally spaced on a circle of station_radius in the
// z = 0 plane, station i at angle 2*pi*i/n; reference transponder at the
// origin.
StationArray build_stations(const ScenarioSpec& spec);

// Transponder positions: frame k on a circle of path_radius at angle
// 2*pi*k/frame_count, z = 0.
std::vector<Point> circular_path(const ScenarioSpec& spec);

// Deterministic synthesis: per frame, draw the offset, evaluate the forward
// model, add per-station noise, then apply outlier windows. Identical spec
// and seed reproduce the output bit for bit.
//
// Draw discipline (so external reruns can reproduce the stream): a single
// std::mt19937_64 engine seeded with spec.seed; per frame, first the offset
// draw (PerFrameUniform consumes one uniform; Fixed consumes none), then one
// noise draw per station in index order (none when the noise parameter is
// zero). uniform(lo,hi) maps one engine word w to
// lo + (hi-lo) * ((w >> 11) * 2^-53); gaussian(sigma) consumes two words
// u1, u2 the same way and returns sigma * sqrt(-2 ln(1-u1)) * cos(2 pi u2).
Trajectory synthesize(const ScenarioSpec& spec);

}  // namespace lpm
