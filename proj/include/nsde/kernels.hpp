#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp with identical
// results: each work item depends only on its own inputs and seed, and
// outputs are written by index.

#include <cstdint>
#include <span>
#include <vector>

#include "nsde/system.hpp"

namespace nsde::kernels {

/// Regular grid of `bins` cells per axis over [lo, hi]; cells are stored
/// with axis 0 varying slowest.
struct BinGrid {
  Vec lo;
  Vec hi;
  int bins = 0;

  int dim() const { return static_cast<int>(lo.size()); }
  std::size_t cell_count() const;
  double width(int axis) const { return (hi[axis] - lo[axis]) / bins; }
  double cell_volume() const;
  /// Flat cell index of `p`, or -1 when outside the box.
  long long locate(const double* p) const;
  Vec center(std::size_t flat) const;
};

struct BinCounts {
  std::vector<std::uint64_t> counts;
  std::uint64_t outside = 0;
};

/// One Euler–Maruyama path X_{l+1} = X_l + Δf(X_l) + √Δ g(X_l) w_l, Δ = T/L,
/// driven by `seed`. Returns the endpoint (may be non-finite on blow-up).
Vec em_path_endpoint(const ControlAffineSystem& sys, const Vec& x0, std::uint64_t seed,
                     double T, int L);

namespace serial {

/// Column i is the endpoint started at starts.col(i) (or col 0 if starts
/// has one column) with seed seeds[i]. Throws NumericError on blow-up.
Mat em_endpoints(const ControlAffineSystem& sys, const Mat& starts,
                 std::span<const std::uint64_t> seeds, double T, int L);

/// Row p, column k: ‖Λ_p(t_k)‖² for the variational equation started at
/// probes[p], t_k = kT/steps.
Mat probe_jacobian_sq_norms(const ControlAffineSystem& sys, const std::vector<Vec>& probes,
                            double T, int steps);

BinCounts histogram_counts(const Mat& points, const BinGrid& grid);

}  // namespace serial

namespace omp {

Mat em_endpoints(const ControlAffineSystem& sys, const Mat& starts,
                 std::span<const std::uint64_t> seeds, double T, int L);

Mat probe_jacobian_sq_norms(const ControlAffineSystem& sys, const std::vector<Vec>& probes,
                            double T, int steps);

BinCounts histogram_counts(const Mat& points, const BinGrid& grid);

}  // namespace omp

/// Sets the OpenMP thread count when n > 0.
void set_thread_count(int n);
int thread_count();

}  // namespace nsde::kernels
