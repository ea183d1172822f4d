#include "nsde/action.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <vector>

#include "nsde/rng.hpp"

namespace nsde {

namespace {

void check_problem(const ControlAffineSystem& sys, const Vec& x, const Vec& y, double T) {
  if (x.size() != sys.dim() || y.size() != sys.dim())
    throw ConfigError("endpoint dimension does not match the system");
  if (!(T > 0.0)) throw ConfigError("horizon T must be positive");
}

int flow_steps_for(double T) { return std::max(100, static_cast<int>(std::ceil(1000.0 * T))); }

/// F(x, u) = f(x) + g(x)u into `out`; `g` is scratch.
void controlled_rhs(const ControlAffineSystem& sys, const Vec& x, const Vec& u, Mat& g,
                    Vec& out) {
  sys.drift(x, out);
  sys.diffusion(x, g);
  out.noalias() += g * u;
}

struct Rk4Stages {
  Vec z2, z3, z4, k1, k2, k3, k4;
  explicit Rk4Stages(int d) : z2(d), z3(d), z4(d), k1(d), k2(d), k3(d), k4(d) {}
};

void rk4_controlled(const ControlAffineSystem& sys, const Vec& x, const Vec& u, double h,
                    Rk4Stages& s, Mat& g, Vec& out) {
  controlled_rhs(sys, x, u, g, s.k1);
  s.z2 = x + 0.5 * h * s.k1;
  controlled_rhs(sys, s.z2, u, g, s.k2);
  s.z3 = x + 0.5 * h * s.k2;
  controlled_rhs(sys, s.z3, u, g, s.k3);
  s.z4 = x + h * s.k3;
  controlled_rhs(sys, s.z4, u, g, s.k4);
  out = x + (h / 6.0) * (s.k1 + 2.0 * s.k2 + 2.0 * s.k3 + s.k4);
}

/// Forward states x_0..x_N of the transcribed dynamics, d × (N+1).
Mat forward_states(const ControlAffineSystem& sys, const Vec& x0, const ControlGrid& u, int sub) {
  const int d = sys.dim();
  const int K = u.intervals();
  const int N = K * sub;
  const double h = u.dt() / sub;
  Mat states(d, N + 1);
  states.col(0) = x0;
  Rk4Stages st(d);
  Mat g(d, d);
  Vec cur = x0, next(d), uk(d);
  for (int n = 0; n < N; ++n) {
    uk = u.u.col(n / sub);
    rk4_controlled(sys, cur, uk, h, st, g, next);
    if (!next.allFinite()) throw NumericError("rollout blew up at t=" + std::to_string((n + 1) * h));
    cur = next;
    states.col(n + 1) = cur;
  }
  return states;
}

/// λ_z-contribution Jx(z)ᵀ a and gᵀ(z) a for one stage.
void stage_adjoint(const ControlAffineSystem& sys, const Vec& z, const Vec& u, const Vec& a,
                   Mat& jac, Mat& g, Vec& bz, Vec& gu) {
  sys.drift_jacobian(z, jac);
  if (!sys.has_constant_diffusion()) jac += sys.diffusion_action_jacobian(z, u);
  bz.noalias() = jac.transpose() * a;
  sys.diffusion(z, g);
  gu.noalias() += g.transpose() * a;
}

class Lbfgs {
 public:
  explicit Lbfgs(int memory) : memory_(std::max(1, memory)) {}

  bool empty() const { return s_.empty(); }

  void reset() {
    s_.clear();
    y_.clear();
  }

  void push(const Vec& s, const Vec& y) {
    const double sy = s.dot(y);
    if (!(sy > 1e-300 * std::max(1.0, s.squaredNorm()))) return;
    s_.push_back(s);
    y_.push_back(y);
    if (static_cast<int>(s_.size()) > memory_) {
      s_.pop_front();
      y_.pop_front();
    }
  }

  Vec direction(const Vec& grad) const {
    Vec q = grad;
    const std::size_t m = s_.size();
    std::vector<double> alpha(m), rho(m);
    for (std::size_t i = m; i-- > 0;) {
      rho[i] = 1.0 / y_[i].dot(s_[i]);
      alpha[i] = rho[i] * s_[i].dot(q);
      q -= alpha[i] * y_[i];
    }
    if (m > 0) q *= s_.back().dot(y_.back()) / y_.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho[i] * y_[i].dot(q);
      q += (alpha[i] - beta) * s_[i];
    }
    return -q;
  }

 private:
  int memory_;
  std::deque<Vec> s_;
  std::deque<Vec> y_;
};

struct StageResult {
  int iterations = 0;
};

/// Minimizes J_ρ over the scaled variables z = √Δ·u from `u` in place.
StageResult minimize_stage(const ControlAffineSystem& sys, const Vec& x, const Vec& y,
                           ControlGrid& u, double rho, int sub, const SolverOptions& opts) {
  const double sq = std::sqrt(u.dt());
  const int d = sys.dim();
  const int K = u.intervals();
  auto evaluate = [&](const Vec& z, Vec& grad) {
    ControlGrid trial{u.T, Eigen::Map<const Mat>(z.data(), d, K) / sq};
    PenaltyValue pv = penalty_objective(sys, x, y, trial, rho, sub, true);
    grad = Eigen::Map<const Vec>(pv.gradient.data(), pv.gradient.size()) / sq;
    return pv.value;
  };

  Vec z = Eigen::Map<const Vec>(u.u.data(), u.u.size()) * sq;
  Vec grad(z.size()), grad_new(z.size());
  double f = evaluate(z, grad);
  Lbfgs memory(opts.lbfgs_memory);
  StageResult res;
  int stalled = 0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (grad.norm() <= opts.gradient_tol * std::max(1.0, z.norm())) break;
    Vec dir = memory.direction(grad);
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      memory.reset();
      dir = -grad;
      slope = -grad.squaredNorm();
    }
    double step = 1.0;
    if (memory.empty()) step = std::min(1.0, 1.0 / grad.norm());
    Vec z_new(z.size());
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      z_new = z + step * dir;
      try {
        f_new = evaluate(z_new, grad_new);
      } catch (const NumericError&) {
        f_new = std::numeric_limits<double>::infinity();
      }
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++res.iterations;
    if (!accepted) {
      if (!memory.empty()) {
        memory.reset();
        continue;
      }
      break;
    }
    memory.push(z_new - z, grad_new - grad);
    const double decrease = f - f_new;
    z.swap(z_new);
    grad.swap(grad_new);
    f = f_new;
    if (decrease <= 1e-16 * std::max(1.0, std::abs(f))) {
      if (++stalled >= 3) break;
    } else {
      stalled = 0;
    }
  }
  u.u = Eigen::Map<const Mat>(z.data(), d, K) / sq;
  return res;
}

struct RunResult {
  ControlGrid control;
  double residual = 0.0;
  int iterations = 0;
  int stages = 0;
  double rho = 0.0;
  bool converged = false;
};

RunResult continuation(const ControlAffineSystem& sys, const Vec& x, const Vec& y,
                       ControlGrid start, int sub, double tol, const SolverOptions& opts) {
  RunResult run;
  run.control = std::move(start);
  for (double rho = opts.rho0; rho <= opts.rho_max * (1.0 + 1e-12); rho *= opts.rho_factor) {
    const StageResult st = minimize_stage(sys, x, y, run.control, rho, sub, opts);
    run.iterations += st.iterations;
    ++run.stages;
    run.rho = rho;
    const Mat states = forward_states(sys, x, run.control, sub);
    run.residual = (states.col(states.cols() - 1) - y).norm();
    if (run.residual <= tol) {
      run.converged = true;
      break;
    }
    if (opts.rho_factor <= 1.0) break;
  }
  return run;
}

}  // namespace

ControlGrid ControlGrid::refined() const {
  ControlGrid out{T, Mat(u.rows(), 2 * u.cols())};
  for (int k = 0; k < u.cols(); ++k) {
    out.u.col(2 * k) = u.col(k);
    out.u.col(2 * k + 1) = u.col(k);
  }
  return out;
}

int default_steps_per_interval(double T, int K) {
  return std::max(1, static_cast<int>(std::ceil(200.0 * T / K - 1e-9)));
}

ControlGrid fbl_control(const ControlAffineSystem& sys, const Vec& x, const Vec& y, double T,
                        int K) {
  check_problem(sys, x, y, T);
  if (K < 1) throw ConfigError("control grid needs at least one interval");
  const int d = sys.dim();
  ControlGrid grid{T, Mat(d, K)};
  const Vec v = (y - x) / T;
  Vec f(d);
  Mat g(d, d);
  for (int k = 0; k < K; ++k) {
    const double t = k * grid.dt();
    const Vec gamma = x + (t / T) * (y - x);
    sys.drift(gamma, f);
    sys.diffusion(gamma, g);
    Eigen::FullPivLU<Mat> lu(g);
    if (!lu.isInvertible())
      throw NumericError("diffusion matrix is singular at grid time t=" + std::to_string(t));
    grid.u.col(k) = lu.solve(v - f);
  }
  return grid;
}

double upper_bound_I(const ControlAffineSystem& sys, const Vec& x, const Vec& y, double T,
                     int quad_points) {
  check_problem(sys, x, y, T);
  if (quad_points < 2) throw ConfigError("upper_bound_I needs at least 2 quadrature points");
  const int n = quad_points % 2 == 1 ? quad_points : quad_points + 1;
  const int panels = n - 1;
  const double h = T / panels;
  const Vec v = (y - x) / T;
  Vec f(sys.dim());
  double acc = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double t = i * h;
    sys.drift(x + (t / T) * (y - x), f);
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * (v - f).squaredNorm();
  }
  return acc * h / 3.0 / (2.0 * sys.ellipticity().lambda0);
}

double lower_bound_I(const ControlAffineSystem& sys, const Vec& x, const Vec& y, double T,
                     double s_t) {
  check_problem(sys, x, y, T);
  if (!(s_t > 0.0)) throw ConfigError("lower_bound_I: s_t must be positive");
  const Vec phi = flow(sys, x, T, flow_steps_for(T)).endpoint();
  return (y - phi).squaredNorm() / (2.0 * sys.ellipticity().lambda1 * s_t);
}

Trajectory rollout(const ControlAffineSystem& sys, const Vec& x, const ControlGrid& u,
                   int steps_per_interval) {
  if (steps_per_interval < 1) throw ConfigError("steps_per_interval must be at least 1");
  if (x.size() != sys.dim() || u.u.rows() != sys.dim())
    throw ConfigError("rollout: dimension mismatch");
  Trajectory tr;
  tr.step = u.dt() / steps_per_interval;
  tr.states = forward_states(sys, x, u, steps_per_interval);
  return tr;
}

PenaltyValue penalty_objective(const ControlAffineSystem& sys, const Vec& x, const Vec& y,
                               const ControlGrid& u, double rho, int sub, bool with_gradient) {
  const int d = sys.dim();
  const int K = u.intervals();
  const Mat states = forward_states(sys, x, u, sub);
  PenaltyValue out;
  out.endpoint = states.col(states.cols() - 1);
  const Vec r = out.endpoint - y;
  out.cost = u.cost();
  out.value = out.cost + 0.5 * rho * r.squaredNorm();
  if (!with_gradient) return out;

  const double dt = u.dt();
  const double h = dt / sub;
  out.gradient = u.u * dt;
  Rk4Stages st(d);
  Mat g(d, d), jac(d, d);
  Vec lam = rho * r;
  Vec a1(d), a2(d), a3(d), a4(d), b(d), gu(d), xn(d), uk(d), tmp(d);
  for (int n = K * sub - 1; n >= 0; --n) {
    const int k = n / sub;
    uk = u.u.col(k);
    xn = states.col(n);
    rk4_controlled(sys, xn, uk, h, st, g, tmp);

    a1 = (h / 6.0) * lam;
    a2 = (h / 3.0) * lam;
    a3 = a2;
    a4 = a1;
    gu.setZero();
    stage_adjoint(sys, st.z4, uk, a4, jac, g, b, gu);
    lam += b;
    a3 += h * b;
    stage_adjoint(sys, st.z3, uk, a3, jac, g, b, gu);
    lam += b;
    a2 += 0.5 * h * b;
    stage_adjoint(sys, st.z2, uk, a2, jac, g, b, gu);
    lam += b;
    a1 += 0.5 * h * b;
    stage_adjoint(sys, xn, uk, a1, jac, g, b, gu);
    lam += b;
    out.gradient.col(k) += gu;
  }
  return out;
}

ActionCertificate solve_min_action(const ControlAffineSystem& sys, const Vec& x, const Vec& y,
                                   double T, int K, const SolverOptions& opts) {
  check_problem(sys, x, y, T);
  if (K < 2) throw ConfigError("solve_min_action needs K >= 2");
  if (!(opts.rho0 > 0.0) || !(opts.rho_max >= opts.rho0))
    throw ConfigError("penalty schedule requires 0 < rho0 <= rho_max");
  const int sub = opts.steps_per_interval > 0 ? opts.steps_per_interval
                                              : default_steps_per_interval(T, K);
  const double tol = opts.endpoint_tol > 0.0 ? opts.endpoint_tol : 1e-6 * (1.0 + y.norm());

  ControlGrid start = fbl_control(sys, x, y, T, K);
  if (opts.warm_start) {
    if (opts.warm_start->u.rows() != sys.dim() || opts.warm_start->intervals() != K)
      throw ConfigError("warm start has the wrong shape");
    start = *opts.warm_start;
    start.T = T;
  }

  const int runs = 1 + std::max(0, opts.n_restarts);
  std::vector<RunResult> results(static_cast<std::size_t>(runs));
  std::vector<int> failed(static_cast<std::size_t>(runs), 0);
  const double scale = opts.restart_scale * (1.0 + start.u.cwiseAbs().maxCoeff());

#pragma omp parallel for schedule(dynamic) if (runs > 1)
  for (int r = 0; r < runs; ++r) {
    ControlGrid init = start;
    if (r > 0) {
      SplitMix64 rng(derive_seed(opts.seed, stream::kRestart, static_cast<std::uint64_t>(r)));
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index i = 0; i < init.u.size(); ++i) init.u.data()[i] += scale * normal(rng);
    }
    try {
      results[r] = continuation(sys, x, y, std::move(init), sub, tol, opts);
    } catch (const NumericError&) {
      failed[r] = 1;
    }
  }

  int best = -1;
  for (int r = 0; r < runs; ++r) {
    if (failed[r]) continue;
    if (best < 0) {
      best = r;
      continue;
    }
    const RunResult& a = results[r];
    const RunResult& b = results[best];
    if (a.converged != b.converged) {
      if (a.converged) best = r;
      continue;
    }
    if (a.control.cost() < b.control.cost()) best = r;
  }
  if (best < 0) throw NumericError("every solver run blew up");

  const RunResult& run = results[best];
  ActionCertificate cert;
  cert.control = run.control;
  cert.value = run.control.cost();
  cert.residual = run.residual;
  cert.endpoint_tol = tol;
  cert.iterations = run.iterations;
  cert.stages = run.stages;
  cert.final_penalty = run.rho;
  cert.converged = run.converged;
  cert.best_restart = best;
  cert.steps_per_interval = sub;
  cert.upper = upper_bound_I(sys, x, y, T);

  if (opts.s_t) {
    cert.s_t_used = *opts.s_t;
    cert.lower_certified = true;
    cert.M = std::numeric_limits<double>::quiet_NaN();
  } else if (auto certified = certified_M(sys)) {
    cert.M = *certified;
    cert.s_t_used = s_t_bound(*certified, T);
    cert.lower_certified = true;
  } else {
    // No certified M: use the largest μ[f_*] seen along the free flow and the
    // optimal path. The resulting lower value is a diagnostic only.
    const Trajectory free = flow(sys, x, T, flow_steps_for(T));
    const Mat path = forward_states(sys, x, run.control, sub);
    double m = -std::numeric_limits<double>::infinity();
    Mat jac(sys.dim(), sys.dim());
    for (int k = 0; k < free.size(); ++k) {
      sys.drift_jacobian(free.states.col(k), jac);
      m = std::max(m, matrix_measure(jac));
    }
    for (int k = 0; k < path.cols(); ++k) {
      sys.drift_jacobian(path.col(k), jac);
      m = std::max(m, matrix_measure(jac));
    }
    cert.M = m;
    cert.s_t_used = s_t_bound(m, T);
    cert.lower_certified = false;
  }
  cert.lower = lower_bound_I(sys, x, y, T, cert.s_t_used);
  return cert;
}

}  // namespace nsde
