#include "lpm/transform.hpp"

#include <stdexcept>
#include <string>

namespace lpm {

double AugmentedFrame::difference(std::size_t i, std::size_t j) const {
  if (i >= values.size() || j >= values.size()) {
    throw std::invalid_argument("AugmentedFrame::difference: station index out of range");
  }
  return (pseudo_ranges[i] - pseudo_ranges[j]) +
         (reference_ranges[i] - reference_ranges[j]);
}

AugmentedFrame augment(const Frame& frame, const StationArray& stations) {
  if (frame.pseudo_ranges.size() != stations.count()) {
    throw std::invalid_argument(
        "augment: frame has " + std::to_string(frame.pseudo_ranges.size()) +
        " pseudo-ranges for " + std::to_string(stations.count()) + " stations");
  }
  AugmentedFrame aug;
  aug.frame_index = frame.frame_index;
  aug.pseudo_ranges = frame.pseudo_ranges;
  aug.reference_ranges.resize(stations.count());
  aug.values.resize(stations.count());
  for (std::size_t i = 0; i < stations.count(); ++i) {
    aug.reference_ranges[i] = stations.reference_range(i);
    aug.values[i] = frame.pseudo_ranges[i] + aug.reference_ranges[i];
  }
  return aug;
}

DifferenceSet pairwise_diff(const AugmentedFrame& aug, std::size_t pivot) {
  if (pivot >= aug.size()) {
    throw std::invalid_argument("pairwise_diff: pivot out of range");
  }
  DifferenceSet set;
  set.frame_index = aug.frame_index;
  set.pivot = pivot;
  set.stations.reserve(aug.size() - 1);
  set.diffs.reserve(aug.size() - 1);
  for (std::size_t i = 0; i < aug.size(); ++i) {
    if (i == pivot) continue;
    set.stations.push_back(i);
    set.diffs.push_back(aug.difference(i, pivot));
  }
  return set;
}

std::vector<PairDifference> all_pairs_diff(const AugmentedFrame& aug) {
  std::vector<PairDifference> pairs;
  const std::size_t n = aug.size();
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      pairs.push_back({i, j, aug.difference(i, j)});
    }
  }
  return pairs;
}

}  // namespace lpm
