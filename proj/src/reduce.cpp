#include "nsde/reduce.hpp"

#include <vector>

namespace nsde {

MeanVar mean_variance(std::span<const double> v) {
  MeanVar out;
  const std::size_t n = v.size();
  if (n == 0) return out;
  out.mean = pairwise_sum(v) / static_cast<double>(n);
  if (n < 2) return out;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v[i] - out.mean;
    sq[i] = d * d;
  }
  out.variance = pairwise_sum(sq) / static_cast<double>(n - 1);
  return out;
}

}  // namespace nsde
