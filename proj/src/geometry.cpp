#include "lpm/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lpm {

double distance(const Point& a, const Point& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("distance: dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  return (a - b).norm();
}

double StationArray::reference_range(std::size_t i) const {
  if (i >= bases.size()) {
    throw std::invalid_argument("reference_range: station index out of range");
  }
  return distance(reference, bases[i]);
}

void StationArray::validate() const {
  if (bases.size() < 3) {
    throw std::invalid_argument("StationArray: need at least 3 base stations");
  }
  if (!reference.allFinite()) {
    throw std::invalid_argument("StationArray: non-finite reference coordinates");
  }
  const auto dim = reference.size();
  if (dim != 2 && dim != 3) {
    throw std::invalid_argument("StationArray: dimension must be 2 or 3");
  }
  for (std::size_t i = 0; i < bases.size(); ++i) {
    if (bases[i].size() != dim) {
      throw std::invalid_argument("StationArray: station " + std::to_string(i) +
                                  " dimension mismatch");
    }
    if (!bases[i].allFinite()) {
      throw std::invalid_argument("StationArray: non-finite coordinates at station " +
                                  std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < bases.size(); ++i) {
    for (std::size_t j = i + 1; j < bases.size(); ++j) {
      if (distance(bases[i], bases[j]) <= 1e-9) {
        throw std::invalid_argument("StationArray: stations " + std::to_string(i) +
                                    " and " + std::to_string(j) + " coincide");
      }
    }
  }
}

Frame forward_pseudo_range(const StationArray& stations, const Point& transponder,
                           double offset, std::int64_t frame_index) {
  if (transponder.size() != stations.reference.size()) {
    throw std::invalid_argument("forward_pseudo_range: transponder dimension mismatch");
  }
  if (!std::isfinite(offset)) {
    throw std::invalid_argument("forward_pseudo_range: non-finite offset");
  }
  Frame frame;
  frame.frame_index = frame_index;
  frame.true_offset = offset;
  frame.pseudo_ranges.resize(stations.count());
  for (std::size_t i = 0; i < stations.count(); ++i) {
    // The geometric part is formed first so the single rounding at offset
    // scale happens in the final addition.
    const double geometric =
        distance(transponder, stations.bases[i]) - stations.reference_range(i);
    frame.pseudo_ranges[i] = offset + geometric;
  }
  return frame;
}

}  // namespace lpm
