#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lpm {

struct FilterSpec {
  int window = 31;           // N, odd
  int passes = 4;            // equal-width box passes applied in series
  // Odd, runs over the smoothed stream. Sized so that when an outlier burst
  // ends, the window still straddles both slopes of the smoothed response
  // around its apex; a shorter window sees a locally flat apex and the
  // variance dips below any useful threshold mid-event.
  int variance_window = 61;
  // Absolute variance threshold (m^2) for the streaming outlier flag. Unset
  // means "decide later": push() leaves the flag false and the caller applies
  // flag_outliers() with an adaptive threshold once the channel's variance
  // distribution is known (outlier_threshold_scale times the median
  // post-warmup variance).
  std::optional<double> outlier_variance_threshold;
  double outlier_threshold_scale = 25.0;
  double weight_floor = 1e-6;  // m^2, lower clamp when inverting variance

  // The composite of `passes` boxes delays the signal by this many samples.
  int group_delay() const { return passes * (window - 1) / 2; }
  // Samples needed before value and variance are both fully formed.
  int warmup_samples() const { return passes * (window - 1) + variance_window; }

  // Throws std::invalid_argument unless window/variance_window are odd and
  // >= 1, passes >= 1, thresholds positive, weight_floor > 0.
  void validate() const;
};

struct FilteredSample {
  std::int64_t frame_index = 0;
  double value = 0.0;     // smoothed difference, m
  double variance = 0.0;  // moving variance of the smoothed stream, m^2
  double weight = 0.0;    // 1 / max(variance, weight_floor)
  bool outlier = false;
  bool warmup = true;
  bool rejected = false;  // non-finite input; state was left untouched
};

// Streaming cascade of `passes` equal box filters plus a moving variance of
// the smoothed output. Each stage updates its running sum in O(1) per sample
// (subtract the sample leaving the window, add the one entering); the sums
// are compensated so multi-hour streams do not drift. The stream is treated
// as zero-prefixed, so every output equals convolving the zero-padded input
// with composite_kernel(); the warmup flag marks outputs that still overlap
// the padding.
class FilterState {
 public:
  explicit FilterState(FilterSpec spec);

  FilteredSample push(double x);

  const FilterSpec& spec() const { return spec_; }
  std::int64_t samples_seen() const { return samples_seen_; }

 private:
  struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x);
    double value() const { return sum + carry; }
  };
  struct Stage {
    std::vector<double> ring;
    std::size_t next = 0;
    CompensatedSum sum;
  };

  FilterSpec spec_;
  std::vector<Stage> stages_;
  std::vector<double> variance_ring_;
  std::size_t variance_next_ = 0;
  CompensatedSum variance_sum_;
  CompensatedSum variance_sumsq_;
  std::int64_t samples_seen_ = 0;
};

// Impulse response of the full cascade: `passes`-fold self-convolution of a
// length-N box of weight 1/N. Length passes*(N-1)+1, sums to one, symmetric.
std::vector<double> composite_kernel(const FilterSpec& spec);

// w_k = 1 / max(variance_k, weight_floor).
std::vector<double> weights(std::span<const FilteredSample> samples, double weight_floor);

// scale times the median variance over non-warmup, non-rejected samples.
// Returns 0 when no such sample exists.
double adaptive_variance_threshold(std::span<const FilteredSample> samples, double scale);

// Sets outlier = (variance > threshold) on non-warmup samples.
void flag_outliers(std::span<FilteredSample> samples, double threshold);

}  // namespace lpm
