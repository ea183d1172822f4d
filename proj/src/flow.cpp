#include "nsde/flow.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "nsde/kernels.hpp"
#include "nsde/rng.hpp"

namespace nsde {

namespace {

void check_horizon(double T, int steps) {
  if (!(T > 0.0)) throw ConfigError("horizon T must be positive");
  if (steps < 1) throw ConfigError("steps must be at least 1");
}

[[noreturn]] void blow_up(double t) {
  std::ostringstream os;
  os << "non-finite state at t=" << std::setprecision(17) << t;
  throw NumericError(os.str());
}

}  // namespace

void Trajectory::write_csv(std::ostream& os) const {
  const int d = static_cast<int>(states.rows());
  os << "t";
  for (int i = 0; i < d; ++i) os << ",x_" << i + 1;
  if (has_jacobians())
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) os << ",L_" << i + 1 << "_" << j + 1;
  os << "\n";
  os << std::setprecision(17);
  for (int k = 0; k < size(); ++k) {
    os << time(k);
    for (int i = 0; i < d; ++i) os << "," << states(i, k);
    if (has_jacobians())
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) os << "," << jacobians[k](i, j);
    os << "\n";
  }
}

Trajectory flow(const ControlAffineSystem& sys, const Vec& x, double T, int steps) {
  check_horizon(T, steps);
  const int d = sys.dim();
  if (x.size() != d) throw ConfigError("flow: state dimension mismatch");
  const double h = T / steps;
  Trajectory traj;
  traj.step = h;
  traj.states.resize(d, steps + 1);
  traj.states.col(0) = x;

  Vec cur = x, k1(d), k2(d), k3(d), k4(d), tmp(d);
  for (int n = 0; n < steps; ++n) {
    sys.drift(cur, k1);
    tmp = cur + 0.5 * h * k1;
    sys.drift(tmp, k2);
    tmp = cur + 0.5 * h * k2;
    sys.drift(tmp, k3);
    tmp = cur + h * k3;
    sys.drift(tmp, k4);
    cur += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!cur.allFinite()) blow_up((n + 1) * h);
    traj.states.col(n + 1) = cur;
  }
  return traj;
}

Trajectory flow_jacobian(const ControlAffineSystem& sys, const Vec& x, double T, int steps) {
  check_horizon(T, steps);
  const int d = sys.dim();
  if (x.size() != d) throw ConfigError("flow_jacobian: state dimension mismatch");
  const double h = T / steps;
  Trajectory traj;
  traj.step = h;
  traj.states.resize(d, steps + 1);
  traj.states.col(0) = x;
  traj.jacobians.reserve(static_cast<std::size_t>(steps) + 1);
  traj.jacobians.push_back(Mat::Identity(d, d));

  Vec cur = x, k1(d), k2(d), k3(d), k4(d), tmp(d);
  Mat lam = Mat::Identity(d, d), j(d, d), m1(d, d), m2(d, d), m3(d, d), m4(d, d);
  for (int n = 0; n < steps; ++n) {
    sys.drift(cur, k1);
    sys.drift_jacobian(cur, j);
    m1.noalias() = j * lam;

    tmp = cur + 0.5 * h * k1;
    sys.drift(tmp, k2);
    sys.drift_jacobian(tmp, j);
    m2.noalias() = j * (lam + 0.5 * h * m1);

    tmp = cur + 0.5 * h * k2;
    sys.drift(tmp, k3);
    sys.drift_jacobian(tmp, j);
    m3.noalias() = j * (lam + 0.5 * h * m2);

    tmp = cur + h * k3;
    sys.drift(tmp, k4);
    sys.drift_jacobian(tmp, j);
    m4.noalias() = j * (lam + h * m3);

    cur += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    lam += (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
    if (!cur.allFinite() || !lam.allFinite()) blow_up((n + 1) * h);
    traj.states.col(n + 1) = cur;
    traj.jacobians.push_back(lam);
  }
  return traj;
}

double s_t_bound(double M, double T) {
  if (!(T > 0.0)) throw ConfigError("s_t_bound: T must be positive");
  if (M == 0.0) return T;
  return std::expm1(2.0 * M * T) / (2.0 * M);
}

double s_t_bound_displayed(double M, double T) {
  if (!(T > 0.0)) throw ConfigError("s_t_bound: T must be positive");
  if (M == 0.0) return T;
  return std::exp(2.0 * std::max(M, 0.0) * T) / (2.0 * std::abs(M));
}

StabilityEstimate s_t_numeric(const ControlAffineSystem& sys, double T,
                              const std::vector<Vec>& probes, int steps, double M,
                              bool M_certified, std::string method) {
  check_horizon(T, steps);
  if (probes.empty()) throw ConfigError("s_t_numeric: probe set is empty");
  const Mat sq = kernels::omp::probe_jacobian_sq_norms(sys, probes, T, steps);

  // integrand at grid time t_k is max_p ‖Λ_p(T − t_k)‖² = column (steps − k)
  std::vector<double> integrand(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) integrand[k] = sq.col(steps - k).maxCoeff();
  const double h = T / steps;
  double acc = 0.5 * (integrand.front() + integrand.back());
  for (int k = 1; k < steps; ++k) acc += integrand[k];

  StabilityEstimate est;
  est.numeric = acc * h;
  est.M = M;
  est.M_certified = M_certified;
  est.bound = s_t_bound(M, T);
  est.displayed_bound = s_t_bound_displayed(M, T);
  est.method = std::move(method);
  return est;
}

StabilityEstimate s_t_numeric(const ControlAffineSystem& sys, double T,
                              const std::vector<Vec>& probes, int steps) {
  if (auto m = certified_M(sys)) return s_t_numeric(sys, T, probes, steps, *m, true, "certified");
  double m_traj = -std::numeric_limits<double>::infinity();
  Mat j(sys.dim(), sys.dim());
  for (const Vec& p : probes) {
    const Trajectory tr = flow(sys, p, T, steps);
    for (int k = 0; k < tr.size(); ++k) {
      sys.drift_jacobian(tr.states.col(k), j);
      m_traj = std::max(m_traj, matrix_measure(j));
    }
  }
  return s_t_numeric(sys, T, probes, steps, m_traj, false, "along-trajectory");
}

CoppelReport coppel_check(const ControlAffineSystem& sys, const Vec& x, double T, int steps,
                          double M) {
  const Trajectory tr = flow_jacobian(sys, x, T, steps);
  CoppelReport rep;
  rep.norms.reserve(static_cast<std::size_t>(tr.size()));
  Mat j(sys.dim(), sys.dim());
  double integral = 0.0;
  double mu_prev = 0.0;
  for (int k = 0; k < tr.size(); ++k) {
    sys.drift_jacobian(tr.states.col(k), j);
    const double mu = matrix_measure(j);
    if (k > 0) integral += 0.5 * tr.step * (mu_prev + mu);
    mu_prev = mu;

    const double norm = spectral_norm(tr.jacobians[k]);
    rep.norms.push_back(norm);
    const double b_int = std::exp(integral);
    const double b_uni = std::exp(M * tr.time(k));
    const double v_int = std::max(0.0, norm - b_int);
    const double v_uni = std::max(0.0, norm - b_uni);
    rep.max_violation_integral = std::max(rep.max_violation_integral, v_int);
    rep.max_violation_uniform = std::max(rep.max_violation_uniform, v_uni);
    rep.max_relative_violation_integral = std::max(rep.max_relative_violation_integral, v_int / b_int);
    rep.max_relative_violation_uniform = std::max(rep.max_relative_violation_uniform, v_uni / b_uni);
  }
  return rep;
}

std::vector<Vec> latin_hypercube(const Box& box, int n, std::uint64_t seed) {
  const int d = box.dim();
  std::vector<Vec> pts(static_cast<std::size_t>(std::max(n, 0)), Vec(d));
  if (n <= 0) return pts;
  SplitMix64 rng(derive_seed(seed, stream::kProbe, 0));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int axis = 0; axis < d; ++axis) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<int> pick(0, i);
      std::swap(perm[i], perm[pick(rng)]);
    }
    for (int i = 0; i < n; ++i) {
      const double frac = (perm[i] + unif(rng)) / n;
      pts[i][axis] = box.lo[axis] + frac * (box.hi[axis] - box.lo[axis]);
    }
  }
  return pts;
}

}  // namespace nsde
