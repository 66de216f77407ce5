#include "lpm/filters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lpm {

void FilterSpec::validate() const {
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("filter: window must be odd and >= 1");
  }
  if (passes < 1) {
    throw std::invalid_argument("filter: passes must be >= 1");
  }
  if (variance_window < 1 || variance_window % 2 == 0) {
    throw std::invalid_argument("filter: variance_window must be odd and >= 1");
  }
  if (outlier_variance_threshold && !(*outlier_variance_threshold > 0.0)) {
    throw std::invalid_argument("filter: outlier variance threshold must be positive");
  }
  if (!(outlier_threshold_scale > 0.0)) {
    throw std::invalid_argument("filter: outlier threshold scale must be positive");
  }
  if (!(weight_floor > 0.0)) {
    throw std::invalid_argument("filter: weight_floor must be positive");
  }
}

void FilterState::CompensatedSum::add(double x) {
  // Neumaier update: the branch keeps the low-order bits regardless of which
  // operand is larger.
  const double t = sum + x;
  if (std::abs(sum) >= std::abs(x)) {
    carry += (sum - t) + x;
  } else {
    carry += (x - t) + sum;
  }
  sum = t;
}

FilterState::FilterState(FilterSpec spec) : spec_(spec) {
  spec_.validate();
  stages_.resize(static_cast<std::size_t>(spec_.passes));
  for (auto& stage : stages_) {
    stage.ring.assign(static_cast<std::size_t>(spec_.window), 0.0);
  }
  variance_ring_.assign(static_cast<std::size_t>(spec_.variance_window), 0.0);
}

FilteredSample FilterState::push(double x) {
  FilteredSample sample;
  if (!std::isfinite(x)) {
    sample.frame_index = samples_seen_;
    sample.rejected = true;
    sample.warmup = samples_seen_ < spec_.warmup_samples();
    sample.weight = 1.0 / spec_.weight_floor;
    return sample;
  }

  double value = x;
  for (auto& stage : stages_) {
    stage.sum.add(value);
    stage.sum.add(-stage.ring[stage.next]);
    stage.ring[stage.next] = value;
    stage.next = (stage.next + 1) % stage.ring.size();
    value = stage.sum.value() / static_cast<double>(spec_.window);
  }

  const double leaving = variance_ring_[variance_next_];
  variance_sum_.add(value);
  variance_sum_.add(-leaving);
  variance_sumsq_.add(value * value);
  variance_sumsq_.add(-(leaving * leaving));
  variance_ring_[variance_next_] = value;
  variance_next_ = (variance_next_ + 1) % variance_ring_.size();

  const double n = static_cast<double>(spec_.variance_window);
  const double mean = variance_sum_.value() / n;
  const double variance =
      std::max(0.0, variance_sumsq_.value() / n - mean * mean);

  ++samples_seen_;
  sample.frame_index = samples_seen_ - 1;
  sample.value = value;
  sample.variance = variance;
  sample.weight = 1.0 / std::max(variance, spec_.weight_floor);
  sample.warmup = samples_seen_ < spec_.warmup_samples();
  if (!sample.warmup && spec_.outlier_variance_threshold) {
    sample.outlier = variance > *spec_.outlier_variance_threshold;
  }
  return sample;
}

std::vector<double> composite_kernel(const FilterSpec& spec) {
  spec.validate();
  const std::size_t n = static_cast<std::size_t>(spec.window);
  const double inv = 1.0 / static_cast<double>(spec.window);
  std::vector<double> kernel{1.0};
  for (int pass = 0; pass < spec.passes; ++pass) {
    std::vector<double> next(kernel.size() + n - 1, 0.0);
    for (std::size_t i = 0; i < kernel.size(); ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        next[i + j] += kernel[i] * inv;
      }
    }
    kernel = std::move(next);
  }
  return kernel;
}

std::vector<double> weights(std::span<const FilteredSample> samples, double weight_floor) {
  if (!(weight_floor > 0.0)) {
    throw std::invalid_argument("weights: weight_floor must be positive");
  }
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back(1.0 / std::max(s.variance, weight_floor));
  }
  return out;
}

double adaptive_variance_threshold(std::span<const FilteredSample> samples, double scale) {
  std::vector<double> variances;
  variances.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.warmup && !s.rejected) {
      variances.push_back(s.variance);
    }
  }
  if (variances.empty()) return 0.0;
  std::sort(variances.begin(), variances.end());
  const std::size_t mid = variances.size() / 2;
  const double median = (variances.size() % 2 == 1)
                            ? variances[mid]
                            : 0.5 * (variances[mid - 1] + variances[mid]);
  return scale * median;
}

void flag_outliers(std::span<FilteredSample> samples, double threshold) {
  for (auto& s : samples) {
    if (!s.warmup && !s.rejected) {
      s.outlier = s.variance > threshold;
    }
  }
}

}  // namespace lpm
