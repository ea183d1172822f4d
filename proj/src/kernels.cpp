#include "nsde/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <random>
#include <string>

#include "nsde/flow.hpp"
#include "nsde/rng.hpp"

namespace nsde::kernels {

std::size_t BinGrid::cell_count() const {
  std::size_t n = 1;
  for (int a = 0; a < dim(); ++a) n *= static_cast<std::size_t>(bins);
  return n;
}

double BinGrid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim(); ++a) v *= width(a);
  return v;
}

long long BinGrid::locate(const double* p) const {
  long long flat = 0;
  for (int a = 0; a < dim(); ++a) {
    const double v = p[a];
    if (!(v >= lo[a] && v < hi[a])) return -1;
    int idx = static_cast<int>((v - lo[a]) / width(a));
    if (idx >= bins) idx = bins - 1;
    flat = flat * bins + idx;
  }
  return flat;
}

Vec BinGrid::center(std::size_t flat) const {
  Vec c(dim());
  for (int a = dim() - 1; a >= 0; --a) {
    const auto idx = static_cast<int>(flat % static_cast<std::size_t>(bins));
    flat /= static_cast<std::size_t>(bins);
    c[a] = lo[a] + (idx + 0.5) * width(a);
  }
  return c;
}

Vec em_path_endpoint(const ControlAffineSystem& sys, const Vec& x0, std::uint64_t seed,
                     double T, int L) {
  const int d = sys.dim();
  const double dt = T / L;
  const double sq = std::sqrt(dt);
  SplitMix64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec x = x0, f(d), w(d);
  Mat g(d, d);
  const bool constant = sys.has_constant_diffusion();
  if (constant) sys.diffusion(x, g);
  for (int l = 0; l < L; ++l) {
    sys.drift(x, f);
    for (int i = 0; i < d; ++i) w[i] = normal(rng);
    if (!constant) sys.diffusion(x, g);
    x += dt * f;
    x.noalias() += sq * (g * w);
  }
  return x;
}

namespace {

void check_em_args(const ControlAffineSystem& sys, const Mat& starts,
                   std::span<const std::uint64_t> seeds, double T, int L) {
  if (!(T > 0.0)) throw ConfigError("Euler-Maruyama: T must be positive");
  if (L < 1) throw ConfigError("Euler-Maruyama: L must be at least 1");
  if (starts.rows() != sys.dim()) throw ConfigError("Euler-Maruyama: start dimension mismatch");
  if (starts.cols() != 1 && starts.cols() != static_cast<Eigen::Index>(seeds.size()))
    throw ConfigError("Euler-Maruyama: need one start or one per seed");
}

[[noreturn]] void em_blow_up(long long sample) {
  throw NumericError("Euler-Maruyama path " + std::to_string(sample) + " blew up");
}

long long first_non_finite(const Mat& out) {
  for (Eigen::Index i = 0; i < out.cols(); ++i)
    if (!out.col(i).allFinite()) return static_cast<long long>(i);
  return -1;
}

Vec sq_norm_row(const ControlAffineSystem& sys, const Vec& probe, double T, int steps) {
  const Trajectory tr = flow_jacobian(sys, probe, T, steps);
  Vec row(tr.size());
  for (int k = 0; k < tr.size(); ++k) {
    const double n = spectral_norm(tr.jacobians[k]);
    row[k] = n * n;
  }
  return row;
}

}  // namespace

namespace serial {

Mat em_endpoints(const ControlAffineSystem& sys, const Mat& starts,
                 std::span<const std::uint64_t> seeds, double T, int L) {
  check_em_args(sys, starts, seeds, T, L);
  const auto n = static_cast<Eigen::Index>(seeds.size());
  Mat out(sys.dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index s = starts.cols() == 1 ? 0 : i;
    out.col(i) = em_path_endpoint(sys, starts.col(s), seeds[static_cast<std::size_t>(i)], T, L);
  }
  if (const auto bad = first_non_finite(out); bad >= 0) em_blow_up(bad);
  return out;
}

Mat probe_jacobian_sq_norms(const ControlAffineSystem& sys, const std::vector<Vec>& probes,
                            double T, int steps) {
  Mat out(static_cast<Eigen::Index>(probes.size()), steps + 1);
  for (std::size_t p = 0; p < probes.size(); ++p)
    out.row(static_cast<Eigen::Index>(p)) = sq_norm_row(sys, probes[p], T, steps).transpose();
  return out;
}

BinCounts histogram_counts(const Mat& points, const BinGrid& grid) {
  BinCounts bc;
  bc.counts.assign(grid.cell_count(), 0);
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const long long c = grid.locate(points.col(i).data());
    if (c < 0) ++bc.outside;
    else ++bc.counts[static_cast<std::size_t>(c)];
  }
  return bc;
}

}  // namespace serial

namespace omp {

Mat em_endpoints(const ControlAffineSystem& sys, const Mat& starts,
                 std::span<const std::uint64_t> seeds, double T, int L) {
  check_em_args(sys, starts, seeds, T, L);
  const auto n = static_cast<Eigen::Index>(seeds.size());
  Mat out(sys.dim(), n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index s = starts.cols() == 1 ? 0 : i;
    out.col(i) = em_path_endpoint(sys, starts.col(s), seeds[static_cast<std::size_t>(i)], T, L);
  }
  if (const auto bad = first_non_finite(out); bad >= 0) em_blow_up(bad);
  return out;
}

Mat probe_jacobian_sq_norms(const ControlAffineSystem& sys, const std::vector<Vec>& probes,
                            double T, int steps) {
  const auto np = static_cast<long long>(probes.size());
  Mat out(np, steps + 1);
  std::vector<std::string> errors(probes.size());
#pragma omp parallel for schedule(dynamic)
  for (long long p = 0; p < np; ++p) {
    try {
      out.row(p) = sq_norm_row(sys, probes[static_cast<std::size_t>(p)], T, steps).transpose();
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(p)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericError(e);
  return out;
}

BinCounts histogram_counts(const Mat& points, const BinGrid& grid) {
  BinCounts bc;
  bc.counts.assign(grid.cell_count(), 0);
  const Eigen::Index n = points.cols();
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(grid.cell_count(), 0);
    std::uint64_t local_out = 0;
#pragma omp for schedule(static) nowait
    for (Eigen::Index i = 0; i < n; ++i) {
      const long long c = grid.locate(points.col(i).data());
      if (c < 0) ++local_out;
      else ++local[static_cast<std::size_t>(c)];
    }
#pragma omp critical
    {
      for (std::size_t c = 0; c < local.size(); ++c) bc.counts[c] += local[c];
      bc.outside += local_out;
    }
  }
  return bc;
}

}  // namespace omp

void set_thread_count(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace nsde::kernels
