#include "lpm/simulate.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace lpm {
namespace {

// Explicit engine-word mappings instead of std distributions: the standard
// pins the mt19937_64 sequence but not the distributions, and reproducibility
// across library versions is part of the contract here.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

double gaussian(std::mt19937_64& rng, double sigma) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return sigma * std::sqrt(-2.0 * std::log(1.0 - u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double draw_noise(std::mt19937_64& rng, const NoiseModel& model) {
  switch (model.kind) {
    case NoiseModel::Kind::Uniform:
      return uniform(rng, -model.param, model.param);
    case NoiseModel::Kind::Gaussian:
      return gaussian(rng, model.param);
  }
  throw std::logic_error("draw_noise: unhandled noise kind");
}

}  // namespace

void ScenarioSpec::validate() const {
  if (dimension != 2 && dimension != 3) {
    throw std::invalid_argument("scenario: dimension must be 2 or 3");
  }
  if (station_count < 3) {
    throw std::invalid_argument("scenario: station_count must be at least 3");
  }
  if (!(station_radius > 0.0) || !std::isfinite(station_radius)) {
    throw std::invalid_argument("scenario: station_radius must be positive");
  }
  if (path_radius < 0.0 || !std::isfinite(path_radius)) {
    throw std::invalid_argument("scenario: path_radius must be non-negative");
  }
  if (path_radius >= station_radius) {
    throw std::invalid_argument("scenario: path must stay inside the station circle");
  }
  if (frame_count < 1) {
    throw std::invalid_argument("scenario: frame_count must be at least 1");
  }
  if (!(noise.param >= 0.0) || !std::isfinite(noise.param)) {
    throw std::invalid_argument("scenario: noise parameter must be non-negative");
  }
  if (offset.kind == OffsetModel::Kind::PerFrameUniform && offset.lo > offset.hi) {
    throw std::invalid_argument("scenario: offset bounds out of order");
  }
  for (const auto& w : outlier_windows) {
    if (w.start_frame < 0 || w.end_frame >= frame_count || w.start_frame > w.end_frame) {
      throw std::invalid_argument("scenario: outlier window outside [0, frame_count)");
    }
    if (w.station_index >= station_count) {
      throw std::invalid_argument("scenario: outlier window station out of range");
    }
    if (!std::isfinite(w.magnitude_m)) {
      throw std::invalid_argument("scenario: outlier magnitude must be finite");
    }
  }
}

StationArray build_stations(const ScenarioSpec& spec) {
  spec.validate();
  StationArray array;
  array.reference = Point::Zero(spec.dimension);
  array.bases.reserve(spec.station_count);
  for (std::size_t i = 0; i < spec.station_count; ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) /
                         static_cast<double>(spec.station_count);
    Point base = Point::Zero(spec.dimension);
    base(0) = spec.station_radius * std::cos(angle);
    base(1) = spec.station_radius * std::sin(angle);
    array.bases.push_back(std::move(base));
  }
  array.validate();
  return array;
}

std::vector<Point> circular_path(const ScenarioSpec& spec) {
  spec.validate();
  std::vector<Point> path;
  path.reserve(static_cast<std::size_t>(spec.frame_count));
  for (std::int64_t k = 0; k < spec.frame_count; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(spec.frame_count);
    Point p = Point::Zero(spec.dimension);
    p(0) = spec.path_radius * std::cos(angle);
    p(1) = spec.path_radius * std::sin(angle);
    path.push_back(std::move(p));
  }
  return path;
}

Trajectory synthesize(const ScenarioSpec& spec) {
  spec.validate();
  const StationArray stations = build_stations(spec);
  Trajectory trajectory;
  trajectory.truth = circular_path(spec);
  trajectory.frames.reserve(trajectory.truth.size());

  std::mt19937_64 rng(spec.seed);
  for (std::int64_t k = 0; k < spec.frame_count; ++k) {
    double offset = spec.offset.value;
    if (spec.offset.kind == OffsetModel::Kind::PerFrameUniform) {
      offset = uniform(rng, spec.offset.lo, spec.offset.hi);
    }
    Frame frame = forward_pseudo_range(stations, trajectory.truth[static_cast<std::size_t>(k)],
                                       offset, k);
    for (std::size_t i = 0; i < frame.pseudo_ranges.size(); ++i) {
      if (spec.noise.param > 0.0) {
        frame.pseudo_ranges[i] += draw_noise(rng, spec.noise);
      }
    }
    trajectory.frames.push_back(std::move(frame));
  }

  for (const auto& w : spec.outlier_windows) {
    for (std::int64_t k = w.start_frame; k <= w.end_frame; ++k) {
      trajectory.frames[static_cast<std::size_t>(k)].pseudo_ranges[w.station_index] +=
          w.magnitude_m;
    }
  }
  return trajectory;
}

}  // namespace lpm
