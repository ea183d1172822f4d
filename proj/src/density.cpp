#include "nsde/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nsde/flow.hpp"
#include "nsde/reduce.hpp"
#include "nsde/rng.hpp"

namespace nsde {

namespace {

constexpr long long kChunk = 1 << 16;

Mat pilot_endpoints(const NeuralSdeModel& model, const Vec& x, long long n, std::uint64_t seed) {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i)
    seeds[static_cast<std::size_t>(i)] = derive_seed(seed, stream::kProbe, static_cast<std::uint64_t>(i));
  return kernels::omp::em_endpoints(model.system, x, seeds, model.T, model.L);
}

}  // namespace

double DensityHistogram::mass() const {
  const double vol = grid.cell_volume();
  double m = 0.0;
  for (double p : density) m += p * vol;
  return m;
}

double DensityHistogram::standard_error(std::size_t cell) const {
  return std::sqrt(static_cast<double>(counts[cell])) /
         (static_cast<double>(total) * grid.cell_volume());
}

DensityHistogram estimate_density(const NeuralSdeModel& model, const Vec& x, long long n_samples,
                                  const Box& box, int bins, std::uint64_t seed) {
  model.validate();
  const int d = model.system.dim();
  if (d > 2) throw ConfigError("estimate_density supports d <= 2");
  if (bins < 8) throw ConfigError("estimate_density needs at least 8 bins per axis");
  if (n_samples < 1) throw ConfigError("estimate_density needs samples");
  if (box.dim() != d || (box.hi.array() <= box.lo.array()).any())
    throw ConfigError("estimate_density: invalid box");

  DensityHistogram h;
  h.grid = {box.lo, box.hi, bins};
  h.counts.assign(h.grid.cell_count(), 0);
  h.total = static_cast<std::uint64_t>(n_samples);

  std::vector<std::uint64_t> seeds;
  for (long long start = 0; start < n_samples; start += kChunk) {
    const long long n = std::min(kChunk, n_samples - start);
    seeds.resize(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i)
      seeds[static_cast<std::size_t>(i)] = derive_seed(seed, stream::kEndpoint, static_cast<std::uint64_t>(start + i));
    const Mat ends = kernels::omp::em_endpoints(model.system, x, seeds, model.T, model.L);
    const kernels::BinCounts bc = kernels::omp::histogram_counts(ends, h.grid);
    for (std::size_t c = 0; c < bc.counts.size(); ++c) h.counts[c] += bc.counts[c];
    h.outside += bc.outside;
  }

  const double norm = static_cast<double>(h.total) * h.grid.cell_volume();
  h.density.resize(h.counts.size());
  for (std::size_t c = 0; c < h.counts.size(); ++c) h.density[c] = static_cast<double>(h.counts[c]) / norm;
  const double frac_out = static_cast<double>(h.outside) / static_cast<double>(h.total);
  if (frac_out > 0.05)
    h.warnings.push_back("fraction of samples outside the box is " + std::to_string(frac_out));
  return h;
}

double l1_to_exact(const DensityHistogram& h, const std::function<double(const Vec&)>& exact,
                   int sub) {
  const int d = h.grid.dim();
  const int panels = std::max(2, sub + sub % 2);
  std::vector<double> w(static_cast<std::size_t>(panels) + 1);
  for (int i = 0; i <= panels; ++i) w[i] = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
  const double wsum = 3.0 * panels;  // Σ w = 3·panels for composite Simpson

  double l1 = 0.0;
  double inside = 0.0;
  const double vol = h.grid.cell_volume();
  for (std::size_t c = 0; c < h.counts.size(); ++c) {
    const Vec center = h.grid.center(c);
    double avg = 0.0;
    if (d == 1) {
      const double a = center[0] - 0.5 * h.grid.width(0);
      for (int i = 0; i <= panels; ++i)
        avg += w[i] * exact(Vec::Constant(1, a + h.grid.width(0) * i / panels));
      avg /= wsum;
    } else {
      const double a0 = center[0] - 0.5 * h.grid.width(0);
      const double a1 = center[1] - 0.5 * h.grid.width(1);
      Vec p(2);
      for (int i = 0; i <= panels; ++i)
        for (int k = 0; k <= panels; ++k) {
          p << a0 + h.grid.width(0) * i / panels, a1 + h.grid.width(1) * k / panels;
          avg += w[i] * w[k] * exact(p);
        }
      avg /= wsum * wsum;
    }
    inside += avg * vol;
    l1 += std::abs(h.density[c] - avg) * vol;
  }
  return l1 + std::max(0.0, 1.0 - inside);
}

std::vector<Vec> default_probes(const NeuralSdeModel& model, const Vec& x, int n_radii,
                                int n_dirs, std::uint64_t seed) {
  model.validate();
  const int d = model.system.dim();
  if (d > 2) throw ConfigError("default_probes supports d <= 2");
  if (n_radii < 1) throw ConfigError("default_probes needs n_radii >= 1");
  const Vec center = flow(model.system, x, model.T, std::max(100, static_cast<int>(std::ceil(1000.0 * model.T)))).endpoint();
  const Mat pilot = pilot_endpoints(model, x, 4096, seed);
  const Vec mean = pilot.rowwise().mean();
  const Vec sigma = ((pilot.colwise() - mean).array().square().rowwise().sum() / (pilot.cols() - 1)).sqrt();

  std::vector<Vec> dirs;
  if (d == 1) {
    dirs = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
  } else {
    const int nd = std::max(1, n_dirs);
    for (int k = 0; k < nd; ++k) {
      const double th = 2.0 * std::numbers::pi * k / nd;
      Vec v(2);
      v << std::cos(th), std::sin(th);
      dirs.push_back(v);
    }
  }
  std::vector<Vec> probes;
  for (const Vec& dir : dirs) {
    for (int r = 0; r < n_radii; ++r) {
      const double rad = n_radii == 1 ? 0.5 : 0.5 + 2.5 * r / (n_radii - 1);
      probes.push_back(center + rad * dir.cwiseProduct(sigma));
    }
  }
  return probes;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2 || b.size() != n) return 0.0;
  const double ma = pairwise_sum(a) / n, mb = pairwise_sum(b) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

SheuReport sheu_sandwich_check(const NeuralSdeModel& model, const Vec& x,
                               const std::vector<Vec>& probe_ys, long long n_samples,
                               std::uint64_t seed, const SheuOptions& opts) {
  model.validate();
  const int d = model.system.dim();
  if (probe_ys.empty()) throw ConfigError("sheu_sandwich_check: no probes");

  Box box;
  if (opts.box) {
    box = *opts.box;
  } else {
    const Mat pilot = pilot_endpoints(model, x, 10000, seed);
    const Vec mean = pilot.rowwise().mean();
    const Vec sd = ((pilot.colwise() - mean).array().square().rowwise().sum() / (pilot.cols() - 1)).sqrt();
    box = {mean - 5.0 * sd, mean + 5.0 * sd};
  }

  SheuReport rep;
  rep.histogram = estimate_density(model, x, n_samples, box, opts.bins, seed);

  std::vector<SheuProbe> kept;
  for (const Vec& y : probe_ys) {
    if (y.size() != d) throw ConfigError("sheu_sandwich_check: probe dimension mismatch");
    const long long cell = rep.histogram.cell_of(y);
    if (cell < 0 || rep.histogram.counts[static_cast<std::size_t>(cell)] == 0) {
      rep.excluded.push_back(y);
      continue;
    }
    SheuProbe p;
    p.requested = y;
    p.y = opts.snap_to_centers ? rep.histogram.grid.center(static_cast<std::size_t>(cell)) : y;
    p.count = static_cast<long long>(rep.histogram.counts[static_cast<std::size_t>(cell)]);
    p.log_density = std::log(rep.histogram.density[static_cast<std::size_t>(cell)]);
    kept.push_back(std::move(p));
  }

  const auto n = static_cast<long long>(kept.size());
  std::vector<std::string> errors(kept.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    try {
      const ActionCertificate c = solve_min_action(model.system, x, kept[i].y, model.T, opts.K, opts.solver);
      kept[i].action = c.value;
      kept[i].converged = c.converged;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericError("sheu_sandwich_check: " + e);

  std::vector<double> logp, act, neg;
  for (const auto& p : kept) {
    logp.push_back(p.log_density);
    act.push_back(p.action);
    neg.push_back(-p.action);
  }
  if (kept.size() >= 2) {
    const double mi = pairwise_sum(act) / act.size();
    const double ml = pairwise_sum(logp) / logp.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      sxy += (act[i] - mi) * (logp[i] - ml);
      sxx += (act[i] - mi) * (act[i] - mi);
    }
    const double s = sxx > 0.0 ? sxy / sxx : 0.0;
    rep.slope = -s;
    rep.intercept = ml - s * mi;
    rep.correlation = pearson(logp, neg);
  }
  for (auto& p : kept) p.residual = p.log_density - (rep.intercept - rep.slope * p.action);
  rep.probes = std::move(kept);
  return rep;
}

}  // namespace nsde
