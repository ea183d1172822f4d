#pragma once

#include <cstddef>
#include <span>

namespace nsde {

/// Pairwise (cascade) summation in a fixed tree order. The result depends
/// only on the input sequence, never on how it was produced.
inline double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;  // unbiased; 0 when n < 2
};

/// Two-pass mean and unbiased variance using pairwise sums.
MeanVar mean_variance(std::span<const double> v);

}  // namespace nsde
