#pragma once

#include "lpm/geometry.hpp"

#include <cstdint>
#include <vector>

namespace lpm {

// Measurement with the known reference range added back per station:
// L_i = R_i + ||T - B_i||, so L_i = offset + ||M - B_i|| for clean data.
//
// Raw pseudo-ranges and reference ranges are kept alongside the augmented
// values because differences must be formed as
//   (R_i - R_j) + (||T - B_i|| - ||T - B_j||),
// cancelling the shared offset between like-scale values before any
// large/small addition. Differencing the augmented values directly would
// lose ~1e-9 m at a 1e7 m offset.
struct AugmentedFrame {
  std::int64_t frame_index = 0;
  std::vector<double> values;            // L_i
  std::vector<double> pseudo_ranges;     // R_i as measured
  std::vector<double> reference_ranges;  // ||T - B_i||

  std::size_t size() const { return values.size(); }

  // Offset-free difference L_i - L_j via the cancellation-safe ordering.
  double difference(std::size_t i, std::size_t j) const;
};

// Differences of every station against one pivot station.
struct DifferenceSet {
  std::int64_t frame_index = 0;
  std::size_t pivot = 0;
  std::vector<std::size_t> stations;  // ascending, pivot omitted
  std::vector<double> diffs;          // D_i = L_i - L_pivot, aligned with stations
};

// One unordered pair's difference, i < j, value = L_i - L_j.
struct PairDifference {
  std::size_t i = 0;
  std::size_t j = 0;
  double value = 0.0;
};

// Throws std::invalid_argument when the frame's station count does not match
// the array.
AugmentedFrame augment(const Frame& frame, const StationArray& stations);

// Throws std::invalid_argument when pivot is out of range.
DifferenceSet pairwise_diff(const AugmentedFrame& aug, std::size_t pivot);

// All n*(n-1)/2 unordered pair differences. The redundancy beyond n-1 pivot
// pairs carries no new information on clean data but lets weighting reject
// rows tied to a corrupted station.
std::vector<PairDifference> all_pairs_diff(const AugmentedFrame& aug);

}  // namespace lpm
