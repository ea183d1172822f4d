#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nsde/action.hpp"
#include "nsde/kernels.hpp"
#include "nsde/sde_mc.hpp"

namespace nsde {

/// Empirical transition density p̂_T(x, ·) on a regular grid (d ≤ 2).
struct DensityHistogram {
  kernels::BinGrid grid;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;
  std::uint64_t outside = 0;
  std::vector<double> density;  ///< count / (total · cell volume)
  std::vector<std::string> warnings;

  /// Σ density · cell volume, the fraction of samples inside the box.
  double mass() const;
  /// Flat cell containing y, or -1.
  long long cell_of(const Vec& y) const { return grid.locate(y.data()); }
  /// Standard error of the density in a cell, sqrt(count)/(total·vol).
  double standard_error(std::size_t cell) const;
};

/// Σ_cells |p̂_c − p̄_c|·vol + (exact mass outside the box), where p̄_c is
/// the cell average of `exact` by tensor Simpson with `sub` panels per axis.
double l1_to_exact(const DensityHistogram& h, const std::function<double(const Vec&)>& exact,
                   int sub = 8);

/// Histogram of `n_samples` Euler–Maruyama endpoints from x. Warns when more
/// than 5% of samples fall outside the box.
DensityHistogram estimate_density(const NeuralSdeModel& model, const Vec& x, long long n_samples,
                                  const Box& box, int bins, std::uint64_t seed);

/// Probes on rays from φ_T(x) at radii spread over [0.5σ, 3σ] of the endpoint
/// spread σ (per axis). d = 1 uses both directions; d = 2 uses `n_dirs`
/// equally spaced angles.
std::vector<Vec> default_probes(const NeuralSdeModel& model, const Vec& x, int n_radii,
                                int n_dirs, std::uint64_t seed);

struct SheuOptions {
  int bins = 64;
  /// Histogram box; default is mean ± 5 std of a pilot sample.
  std::optional<Box> box;
  int K = 100;
  SolverOptions solver;
  /// Replace each probe by the center of its bin before solving for I_T.
  bool snap_to_centers = true;
};

struct SheuProbe {
  Vec requested;
  Vec y;
  long long count = 0;
  double log_density = 0.0;
  double action = 0.0;
  double residual = 0.0;  ///< fit residual log p̂ − (a − b·I)
  bool converged = false;
};

struct SheuReport {
  std::vector<SheuProbe> probes;
  std::vector<Vec> excluded;  ///< probes whose bin had no samples
  double slope = 0.0;         ///< b̂ in log p̂ = a − b̂·I_T
  double intercept = 0.0;     ///< â
  double correlation = 0.0;   ///< Pearson corr(log p̂, −I_T)
  DensityHistogram histogram;
};

/// Fits log p̂_T(x, y) = a − b·I_T(x, y) over the probes.
SheuReport sheu_sandwich_check(const NeuralSdeModel& model, const Vec& x,
                               const std::vector<Vec>& probe_ys, long long n_samples,
                               std::uint64_t seed, const SheuOptions& opts = {});

/// Pearson correlation coefficient.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace nsde
