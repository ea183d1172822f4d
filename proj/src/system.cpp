#include "nsde/system.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nsde/rng.hpp"

namespace nsde {

namespace {

double tanh_slope(double r) {
  const double t = std::tanh(r);
  return 1.0 - t * t;
}
double logistic_value(double r) { return 1.0 / (1.0 + std::exp(-r)); }
double logistic_slope(double r) {
  const double s = logistic_value(r);
  return s * (1.0 - s);
}
double atan_value(double r) { return std::atan(r); }
double atan_slope(double r) { return 1.0 / (1.0 + r * r); }
double softsign_value(double r) { return r / (1.0 + std::abs(r)); }
double softsign_slope(double r) {
  const double d = 1.0 + std::abs(r);
  return 1.0 / (d * d);
}
double tanh_value(double r) { return std::tanh(r); }

constexpr double kEllipticityTol = 1e-12;

}  // namespace

Sigmoid sigmoid_by_name(const std::string& name) {
  if (name == "tanh") return {"tanh", 1.0, &tanh_value, &tanh_slope};
  if (name == "logistic") return {"logistic", 0.25, &logistic_value, &logistic_slope};
  if (name == "atan") return {"atan", 1.0, &atan_value, &atan_slope};
  if (name == "softsign") return {"softsign", 1.0, &softsign_value, &softsign_slope};
  throw ConfigError("unknown sigmoid '" + name + "'");
}

double RnnParams::slope_bound() const {
  return gamma ? *gamma : sigmoid_by_name(sigmoid).gamma;
}

Box Box::cube(int dim, double half_width) {
  return {Vec::Constant(dim, -half_width), Vec::Constant(dim, half_width)};
}

ControlAffineSystem ControlAffineSystem::custom(int dim, DriftFn drift, MatrixFn diffusion,
                                                MatrixFn jacobian, Ellipticity ellipticity,
                                                std::optional<Mat> constant_diffusion) {
  if (dim < 1) throw ConfigError("dimension must be positive");
  if (!drift) throw ConfigError("custom system needs a drift");
  if (!diffusion && !constant_diffusion) throw ConfigError("custom system needs a diffusion");
  if (!(ellipticity.lambda0 > 0.0) || ellipticity.lambda0 > ellipticity.lambda1)
    throw ConfigError("ellipticity requires 0 < lambda0 <= lambda1");
  if (constant_diffusion &&
      (constant_diffusion->rows() != dim || constant_diffusion->cols() != dim))
    throw ConfigError("constant diffusion must be d x d");
  ControlAffineSystem s;
  s.dim_ = dim;
  s.kind_ = Kind::kCustom;
  s.drift_ = std::move(drift);
  s.diffusion_ = std::move(diffusion);
  s.jacobian_ = std::move(jacobian);
  s.constant_g_ = std::move(constant_diffusion);
  s.ellipticity_ = ellipticity;
  return s;
}

std::string ControlAffineSystem::kind_name() const {
  switch (kind_) {
    case Kind::kLinear: return "linear";
    case Kind::kRnn: return "rnn";
    case Kind::kCustom: return "custom-expression";
  }
  return "custom-expression";
}

Vec ControlAffineSystem::drift(const Vec& x) const {
  Vec out(dim_);
  drift_(x, out);
  return out;
}

void ControlAffineSystem::diffusion(const Vec& x, Mat& out) const {
  if (constant_g_) {
    out = *constant_g_;
    return;
  }
  out.resize(dim_, dim_);
  diffusion_(x, out);
}

Mat ControlAffineSystem::diffusion(const Vec& x) const {
  Mat out(dim_, dim_);
  diffusion(x, out);
  return out;
}

void ControlAffineSystem::drift_jacobian(const Vec& x, Mat& out) const {
  if (jacobian_) {
    out.resize(dim_, dim_);
    jacobian_(x, out);
  } else {
    out = fd_drift_jacobian(x);
  }
}

Mat ControlAffineSystem::drift_jacobian(const Vec& x) const {
  Mat out(dim_, dim_);
  drift_jacobian(x, out);
  return out;
}

Mat ControlAffineSystem::fd_drift_jacobian(const Vec& x) const {
  Mat jac(dim_, dim_);
  Vec xp = x, xm = x, fp(dim_), fm(dim_);
  for (int j = 0; j < dim_; ++j) {
    const double h = std::max(1e-5, 1e-7 * std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    drift_(xp, fp);
    drift_(xm, fm);
    jac.col(j) = (fp - fm) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return jac;
}

Mat ControlAffineSystem::diffusion_action_jacobian(const Vec& x, const Vec& u) const {
  if (constant_g_) return Mat::Zero(dim_, dim_);
  Mat jac(dim_, dim_);
  Vec xp = x, xm = x;
  Mat gp(dim_, dim_), gm(dim_, dim_);
  for (int j = 0; j < dim_; ++j) {
    const double h = std::max(1e-5, 1e-7 * std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    diffusion_(xp, gp);
    diffusion_(xm, gm);
    jac.col(j) = (gp - gm) * u / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return jac;
}

ControlAffineSystem ControlAffineSystem::with_ellipticity(Ellipticity e) const {
  if (!(e.lambda0 > 0.0) || e.lambda0 > e.lambda1)
    throw ConfigError("ellipticity requires 0 < lambda0 <= lambda1");
  ControlAffineSystem copy = *this;
  copy.ellipticity_ = e;
  return copy;
}

ControlAffineSystem build_rnn_system(const RnnParams& p) {
  if (!(p.tau > 0.0)) throw ConfigError("rnn: tau must be positive");
  if (!(p.c > 0.0)) throw ConfigError("rnn: c must be positive");
  if (p.A.rows() != p.A.cols() || p.A.rows() < 1) throw ConfigError("rnn: A must be square");
  if (p.gamma && !(*p.gamma > 0.0)) throw ConfigError("rnn: gamma must be positive");
  const Sigmoid sig = sigmoid_by_name(p.sigmoid);
  const int d = static_cast<int>(p.A.rows());
  const double inv_tau = 1.0 / p.tau;
  const Mat A = p.A;

  ControlAffineSystem s;
  s.dim_ = d;
  s.kind_ = ControlAffineSystem::Kind::kRnn;
  s.drift_ = [A, inv_tau, sig, d](const Vec& x, Vec& out) {
    thread_local Vec act;
    act.resize(d);
    for (int j = 0; j < d; ++j) act[j] = sig.value(x[j]);
    out.noalias() = A * act;
    out -= inv_tau * x;
  };
  s.jacobian_ = [A, inv_tau, sig, d](const Vec& x, Mat& out) {
    for (int j = 0; j < d; ++j) out.col(j) = A.col(j) * sig.slope(x[j]);
    out.diagonal().array() -= inv_tau;
  };
  s.constant_g_ = p.c * Mat::Identity(d, d);
  s.ellipticity_ = {p.c * p.c, p.c * p.c};
  s.rnn_ = p;
  return s;
}

ControlAffineSystem build_linear_system(const LinearParams& p) {
  if (p.A.rows() != p.A.cols() || p.A.rows() < 1) throw ConfigError("linear: A must be square");
  if (p.G.rows() != p.A.rows() || p.G.cols() != p.A.cols())
    throw ConfigError("linear: G must have the shape of A");
  const Mat ggt = p.G * p.G.transpose();
  const Vec ev = symmetric_eigenvalues(ggt);
  if (ev.minCoeff() <= kEllipticityTol * std::max(1.0, ev.maxCoeff()))
    throw ConfigError("linear: G G^T is singular; uniform ellipticity fails");
  const Mat A = p.A;

  ControlAffineSystem s;
  s.dim_ = static_cast<int>(p.A.rows());
  s.kind_ = ControlAffineSystem::Kind::kLinear;
  s.drift_ = [A](const Vec& x, Vec& out) { out.noalias() = A * x; };
  s.jacobian_ = [A](const Vec&, Mat& out) { out = A; };
  s.constant_g_ = p.G;
  s.ellipticity_ = {ev.minCoeff(), ev.maxCoeff()};
  s.linear_ = p;
  return s;
}

double matrix_measure(const Mat& a) {
  if (a.rows() != a.cols()) throw ConfigError("matrix_measure: matrix must be square");
  return lambda_max_symmetric(0.5 * (a + a.transpose()));
}

Vec sample_box(const Box& box, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vec x(box.dim());
  for (int i = 0; i < box.dim(); ++i) x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * unif(rng);
  return x;
}

double estimate_M(const ControlAffineSystem& sys, const Box& box, int n_samples,
                  std::uint64_t seed) {
  if (box.dim() != sys.dim()) throw ConfigError("estimate_M: box dimension mismatch");
  if ((box.hi.array() < box.lo.array()).any()) throw ConfigError("estimate_M: empty box");
  if (const auto* lin = sys.linear_params()) return matrix_measure(lin->A);
  double best = -std::numeric_limits<double>::infinity();
  Mat jac(sys.dim(), sys.dim());
  for (int i = 0; i < std::max(1, n_samples); ++i) {
    const Vec x = sample_box(box, derive_seed(seed, stream::kProbe, static_cast<std::uint64_t>(i)));
    sys.drift_jacobian(x, jac);
    best = std::max(best, matrix_measure(jac));
  }
  return best;
}

double gershgorin_M_bound(const RnnParams& p) {
  const Mat& A = p.A;
  const int d = static_cast<int>(A.rows());
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    double radius = 0.0;
    for (int j = 0; j < d; ++j)
      if (j != i) radius += std::abs(A(i, j)) + std::abs(A(j, i));
    worst = std::max(worst, std::max(A(i, i), 0.0) + 0.5 * radius);
  }
  return -1.0 / p.tau + p.slope_bound() * worst;
}

std::optional<double> certified_M(const ControlAffineSystem& sys) {
  if (const auto* lin = sys.linear_params()) return matrix_measure(lin->A);
  if (const auto* rnn = sys.rnn_params()) return gershgorin_M_bound(*rnn);
  return std::nullopt;
}

EllipticityReport check_ellipticity(const ControlAffineSystem& sys, const Box& box,
                                    int n_samples, std::uint64_t seed, double eps) {
  EllipticityReport r;
  r.min_eigenvalue = std::numeric_limits<double>::infinity();
  r.max_eigenvalue = -std::numeric_limits<double>::infinity();
  Mat g(sys.dim(), sys.dim());
  for (int i = 0; i < std::max(1, n_samples); ++i) {
    const Vec x = sample_box(box, derive_seed(seed, stream::kProbe, static_cast<std::uint64_t>(i)));
    sys.diffusion(x, g);
    const Vec ev = symmetric_eigenvalues(g * g.transpose());
    r.min_eigenvalue = std::min(r.min_eigenvalue, ev.minCoeff());
    r.max_eigenvalue = std::max(r.max_eigenvalue, ev.maxCoeff());
  }
  const auto& e = sys.ellipticity();
  r.ok = e.lambda0 - eps <= r.min_eigenvalue && r.max_eigenvalue <= e.lambda1 + eps;
  return r;
}

double estimate_drift_lipschitz(const ControlAffineSystem& sys, const Box& box,
                                int n_samples, std::uint64_t seed) {
  double best = 0.0;
  Mat jac(sys.dim(), sys.dim());
  for (int i = 0; i < std::max(1, n_samples); ++i) {
    const Vec x = sample_box(box, derive_seed(seed, stream::kProbe, static_cast<std::uint64_t>(i)));
    sys.drift_jacobian(x, jac);
    best = std::max(best, spectral_norm(jac));
  }
  return best;
}

}  // namespace nsde
