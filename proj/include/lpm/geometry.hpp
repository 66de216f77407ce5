#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace lpm {

// Position in d-dimensional space (d = 2 or 3), meters throughout.
using Point = Eigen::VectorXd;

// Euclidean distance. Throws std::invalid_argument on dimension mismatch.
double distance(const Point& a, const Point& b);

// Fixed measurement geometry: the base stations plus the reference
// transponder whose known position ties the per-station clocks together.
struct StationArray {
  std::vector<Point> bases;
  Point reference;

  int dimension() const { return static_cast<int>(reference.size()); }
  std::size_t count() const { return bases.size(); }

  // ||T - B_i||, the known reference range folded into every measurement.
  double reference_range(std::size_t i) const;

  // Throws std::invalid_argument on inconsistent dimensions, fewer than
  // three stations, non-finite coordinates, or coincident stations
  // (pairwise distance <= 1e-9 m).
  void validate() const;
};

// One measurement epoch: per-station pseudo-ranges sharing a single unknown
// clock offset. The offset is typically 5-6 orders of magnitude larger than
// any geometric range and changes every frame. true_offset is carried by
// synthetic data only.
struct Frame {
  std::int64_t frame_index = 0;
  std::vector<double> pseudo_ranges;
  std::optional<double> true_offset;
};

struct Trajectory {
  std::vector<Frame> frames;
  std::vector<Point> truth;  // empty, or one transponder position per frame
};

// Noise-free forward model: R_i = offset + ||M - B_i|| - ||T - B_i||.
Frame forward_pseudo_range(const StationArray& stations, const Point& transponder,
                           double offset, std::int64_t frame_index = 0);

}  // namespace lpm
