#include "nsde/sde_mc.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nsde/flow.hpp"
#include "nsde/kernels.hpp"
#include "nsde/linear_oracle.hpp"
#include "nsde/reduce.hpp"
#include "nsde/rng.hpp"

namespace nsde {

namespace {

McEstimate to_estimate(std::span<const double> values, std::uint64_t seed) {
  const MeanVar mv = mean_variance(values);
  McEstimate e;
  e.mean = mv.mean;
  e.variance = mv.variance;
  e.n = static_cast<long long>(values.size());
  e.seed = seed;
  e.se = e.n > 0 ? std::sqrt(mv.variance / static_cast<double>(e.n)) : 0.0;
  return e;
}

std::vector<std::uint64_t> stream_seeds(std::uint64_t base, long long n) {
  std::vector<std::uint64_t> s(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i)
    s[static_cast<std::size_t>(i)] = derive_seed(base, stream::kEndpoint, static_cast<std::uint64_t>(i));
  return s;
}

std::vector<double> readouts(const NeuralSdeModel& model, const Mat& endpoints) {
  std::vector<double> r(static_cast<std::size_t>(endpoints.cols()));
  for (Eigen::Index i = 0; i < endpoints.cols(); ++i)
    r[static_cast<std::size_t>(i)] = model.alpha.dot(endpoints.col(i));
  return r;
}

}  // namespace

void NeuralSdeModel::validate() const {
  if (!(T > 0.0)) throw ConfigError("model: T must be positive");
  if (L < 1) throw ConfigError("model: L must be at least 1");
  if (alpha.size() != system.dim()) throw ConfigError("model: alpha dimension mismatch");
  if (!alpha.allFinite()) throw ConfigError("model: alpha must be finite");
}

PiSampler PiSampler::gaussian(Vec mean, Vec stddev) {
  if (mean.size() != stddev.size()) throw ConfigError("pi: mean/std dimension mismatch");
  if ((stddev.array() < 0.0).any()) throw ConfigError("pi: negative standard deviation");
  return PiSampler(true, std::move(mean), std::move(stddev));
}

PiSampler PiSampler::uniform(Box box) {
  if ((box.hi.array() < box.lo.array()).any()) throw ConfigError("pi: empty box");
  return PiSampler(false, std::move(box.lo), std::move(box.hi));
}

Vec PiSampler::sample(std::uint64_t seed) const {
  if (!gaussian_) return sample_box(Box{a_, b_}, seed);
  SplitMix64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec x(a_.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = a_[i] + b_[i] * normal(rng);
  return x;
}

Vec em_endpoint(const NeuralSdeModel& model, const Vec& x, std::uint64_t seed) {
  model.validate();
  if (x.size() != model.system.dim()) throw ConfigError("em_endpoint: dimension mismatch");
  Vec out = kernels::em_path_endpoint(model.system, x, seed, model.T, model.L);
  if (!out.allFinite()) throw NumericError("Euler-Maruyama path blew up");
  return out;
}

McEstimate estimate_F(const NeuralSdeModel& model, const Vec& x, long long N, std::uint64_t seed) {
  model.validate();
  if (N < 2) throw ConfigError("estimate_F needs N >= 2");
  const auto seeds = stream_seeds(seed, N);
  const Mat ends = kernels::omp::em_endpoints(model.system, x, seeds, model.T, model.L);
  return to_estimate(readouts(model, ends), seed);
}

McEstimate estimate_Vpi(const NeuralSdeModel& model, const PiSampler& pi, int n_outer,
                        int n_inner, std::uint64_t seed) {
  model.validate();
  if (n_outer < 2 || n_inner < 2) throw ConfigError("estimate_Vpi needs n_outer, n_inner >= 2");
  if (pi.dim() != model.system.dim()) throw ConfigError("estimate_Vpi: pi dimension mismatch");
  const long long total = static_cast<long long>(n_outer) * n_inner;
  Mat starts(model.system.dim(), total);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(total));
  for (int j = 0; j < n_outer; ++j) {
    const Vec x = pi.sample(derive_seed(seed, stream::kPi, static_cast<std::uint64_t>(j)));
    const std::uint64_t inner = derive_seed(seed, stream::kInner, static_cast<std::uint64_t>(j));
    for (int i = 0; i < n_inner; ++i) {
      const long long c = static_cast<long long>(j) * n_inner + i;
      starts.col(c) = x;
      seeds[static_cast<std::size_t>(c)] = derive_seed(inner, stream::kEndpoint, static_cast<std::uint64_t>(i));
    }
  }
  const Mat ends = kernels::omp::em_endpoints(model.system, starts, seeds, model.T, model.L);
  const std::vector<double> r = readouts(model, ends);
  std::vector<double> inner_var(static_cast<std::size_t>(n_outer));
  for (int j = 0; j < n_outer; ++j) {
    const auto block = std::span<const double>(r).subspan(static_cast<std::size_t>(j) * n_inner,
                                                          static_cast<std::size_t>(n_inner));
    inner_var[static_cast<std::size_t>(j)] = mean_variance(block).variance;
  }
  return to_estimate(inner_var, seed);
}

ReferenceF closed_form_F(const NeuralSdeModel& model) {
  const LinearParams* lin = model.system.linear_params();
  if (!lin) return {};
  const Mat e = expm_rk4(lin->A, model.T, default_gramian_steps(model.T));
  const Vec row = e.transpose() * model.alpha;
  return [row](const Vec& x) { return row.dot(x); };
}

std::pair<double, double> loglog_fit(const std::vector<MaureyRow>& rows) {
  std::vector<double> lx, ly;
  for (const auto& r : rows) {
    if (!(r.mse > 0.0)) continue;
    lx.push_back(std::log(static_cast<double>(r.N)));
    ly.push_back(std::log(r.mse));
  }
  if (lx.size() < 2) return {0.0, 0.0};
  const double n = static_cast<double>(lx.size());
  const double mx = pairwise_sum(lx) / n;
  const double my = pairwise_sum(ly) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

MaureyTable maurey_rate_experiment(const NeuralSdeModel& model, const PiSampler& pi,
                                   const std::vector<long long>& N_list, int reps, int n_x,
                                   std::uint64_t seed, ReferenceF reference) {
  model.validate();
  if (N_list.empty()) throw ConfigError("maurey: N_list is empty");
  for (std::size_t i = 0; i < N_list.size(); ++i) {
    if (N_list[i] < 1) throw ConfigError("maurey: N values must be positive");
    if (i > 0 && N_list[i] <= N_list[i - 1]) throw ConfigError("maurey: N_list must increase");
  }
  if (reps < 2) throw ConfigError("maurey: reps must be at least 2");
  if (n_x < 1) throw ConfigError("maurey: n_x must be positive");

  MaureyTable table;
  for (int j = 0; j < n_x; ++j)
    table.points.push_back(pi.sample(derive_seed(seed, stream::kPi, static_cast<std::uint64_t>(j))));

  std::vector<double> f_ref(static_cast<std::size_t>(n_x));
  if (!reference) reference = closed_form_F(model);
  if (reference) {
    table.reference = "closed-form";
    for (int j = 0; j < n_x; ++j) f_ref[j] = reference(table.points[j]);
  } else {
    table.reference = "pilot";
    table.reference_samples = 64 * N_list.back();
    double acc = 0.0;
    for (int j = 0; j < n_x; ++j) {
      const McEstimate pilot = estimate_F(model, table.points[j], table.reference_samples,
                                          derive_seed(seed, stream::kInner, static_cast<std::uint64_t>(j)));
      f_ref[j] = pilot.mean;
      acc += pilot.se * pilot.se;
    }
    table.reference_variance = acc / n_x;
  }

  for (std::size_t ni = 0; ni < N_list.size(); ++ni) {
    const long long N = N_list[ni];
    const long long per_rep = N * n_x;
    Mat starts(model.system.dim(), per_rep * reps);
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(per_rep * reps));
    for (int r = 0; r < reps; ++r) {
      const std::uint64_t rep_seed = derive_seed(derive_seed(seed, stream::kRepetition, static_cast<std::uint64_t>(r)),
                                                 stream::kRepetition, static_cast<std::uint64_t>(N));
      for (int j = 0; j < n_x; ++j) {
        const std::uint64_t point_seed = derive_seed(rep_seed, stream::kPi, static_cast<std::uint64_t>(j));
        for (long long i = 0; i < N; ++i) {
          const long long c = r * per_rep + j * N + i;
          starts.col(c) = table.points[j];
          seeds[static_cast<std::size_t>(c)] = derive_seed(point_seed, stream::kEndpoint, static_cast<std::uint64_t>(i));
        }
      }
    }
    const Mat ends = kernels::omp::em_endpoints(model.system, starts, seeds, model.T, model.L);
    const std::vector<double> z = readouts(model, ends);

    std::vector<double> rep_err(static_cast<std::size_t>(reps));
    std::vector<double> sq(static_cast<std::size_t>(n_x));
    for (int r = 0; r < reps; ++r) {
      for (int j = 0; j < n_x; ++j) {
        const auto block = std::span<const double>(z).subspan(
            static_cast<std::size_t>(r * per_rep + j * N), static_cast<std::size_t>(N));
        const double fhat = pairwise_sum(block) / static_cast<double>(N);
        const double e = fhat - f_ref[j];
        sq[j] = e * e;
      }
      rep_err[r] = pairwise_sum(sq) / n_x;
    }
    const MeanVar mv = mean_variance(rep_err);
    table.rows.push_back({N, mv.mean, std::sqrt(mv.variance / reps)});
  }
  std::tie(table.slope, table.intercept) = loglog_fit(table.rows);
  return table;
}

double flow_second_moment(const NeuralSdeModel& model, const PiSampler& pi, int n,
                          std::uint64_t seed, int flow_steps) {
  model.validate();
  if (n < 1) throw ConfigError("flow_second_moment: n must be positive");
  const int steps = flow_steps > 0 ? flow_steps : std::max(100, static_cast<int>(std::ceil(1000.0 * model.T)));
  std::vector<double> v(static_cast<std::size_t>(n));
  int failed = 0;
#pragma omp parallel for schedule(dynamic, 16) reduction(max : failed)
  for (int i = 0; i < n; ++i) {
    const Vec x = pi.sample(derive_seed(seed, stream::kPi, static_cast<std::uint64_t>(i)));
    try {
      v[i] = flow(model.system, x, model.T, steps).endpoint().squaredNorm();
    } catch (const NumericError&) {
      failed = 1;
    }
  }
  if (failed) throw NumericError("flow_second_moment: flow blew up for a sample of pi");
  return pairwise_sum(v) / n;
}

double vpi_upper_bound(const NeuralSdeModel& model, double s_t, double m2, double k2, double c2) {
  model.validate();
  if (!(k2 > 0.0) || !(c2 > 0.0)) throw ConfigError("vpi_upper_bound: k2 and c2 must be positive");
  if (!(s_t > 0.0)) throw ConfigError("vpi_upper_bound: s_t must be positive");
  if (m2 < 0.0) throw ConfigError("vpi_upper_bound: second moment must be nonnegative");
  const auto& e = model.system.ellipticity();
  const double d = model.system.dim();
  const double ratio = e.lambda1 * s_t / (c2 * e.lambda0 * model.T);
  return k2 * model.alpha.squaredNorm() * std::pow(ratio, d / 2.0) *
         (e.lambda1 * d * s_t / c2 + m2);
}

}  // namespace nsde
