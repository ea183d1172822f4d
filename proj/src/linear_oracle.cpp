#include "nsde/linear_oracle.hpp"

#include <cmath>
#include <numbers>

namespace nsde {

namespace {

void check_near_singular(const GramianResult& g) {
  if (!(g.condition <= kGramianConditionLimit))
    throw NumericError("controllability Gramian is near-singular (condition " +
                       std::to_string(g.condition) + ")");
}

Vec mean_offset(const GramianResult& g, const Vec& x, const Vec& y) {
  if (x.size() != g.W.rows() || y.size() != g.W.rows())
    throw ConfigError("linear oracle: point dimension mismatch");
  return y - g.exp_TA * x;
}

}  // namespace

int default_gramian_steps(double T) {
  return std::max(100, static_cast<int>(std::ceil(1000.0 * T)));
}

Mat expm_rk4(const Mat& A, double t, int steps) {
  const int d = static_cast<int>(A.rows());
  if (t == 0.0) return Mat::Identity(d, d);
  const double h = t / steps;
  // RK4 on a linear ODE is multiplication by the degree-4 Taylor polynomial.
  const Mat hA = h * A;
  const Mat hA2 = hA * hA;
  const Mat step = Mat::Identity(d, d) + hA + hA2 / 2.0 + hA2 * hA / 6.0 + hA2 * hA2 / 24.0;
  Mat phi = Mat::Identity(d, d);
  for (int n = 0; n < steps; ++n) phi = step * phi;
  return phi;
}

GramianResult gramian(const LinearParams& p, double T, int steps) {
  if (!(T > 0.0)) throw ConfigError("gramian: T must be positive");
  if (steps < 1) throw ConfigError("gramian: steps must be at least 1");
  const Mat& A = p.A;
  const int d = static_cast<int>(A.rows());
  if (A.cols() != d || p.G.rows() != d || p.G.cols() != d)
    throw ConfigError("gramian: A and G must be square of equal size");
  const Mat Q = p.G * p.G.transpose();
  const double h = T / steps;

  auto rhs = [&](const Mat& w) -> Mat {
    Mat aw = A * w;
    return aw + aw.transpose() + Q;
  };

  Mat W = Mat::Zero(d, d);
  Mat phi = Mat::Identity(d, d);
  for (int n = 0; n < steps; ++n) {
    const Mat k1 = rhs(W);
    const Mat k2 = rhs(W + 0.5 * h * k1);
    const Mat k3 = rhs(W + 0.5 * h * k2);
    const Mat k4 = rhs(W + h * k3);
    W += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    W = 0.5 * (W + W.transpose()).eval();

    const Mat p1 = A * phi;
    const Mat p2 = A * (phi + 0.5 * h * p1);
    const Mat p3 = A * (phi + 0.5 * h * p2);
    const Mat p4 = A * (phi + h * p3);
    phi += (h / 6.0) * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
  }

  GramianResult out;
  out.W = W;
  out.exp_TA = phi;
  out.condition = spd_condition(W);
  return out;
}

double exact_action_linear(const GramianResult& g, const Vec& x, const Vec& y) {
  check_near_singular(g);
  const Vec r = mean_offset(g, x, y);
  const Vec z = g.W.llt().solve(r);
  return 0.5 * r.dot(z);
}

double exact_action_linear(const LinearParams& p, const Vec& x, const Vec& y, double T) {
  return exact_action_linear(gramian(p, T, default_gramian_steps(T)), x, y);
}

double log_density_normalizer(const GramianResult& g) {
  check_near_singular(g);
  const auto llt = g.W.llt();
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double d = static_cast<double>(g.W.rows());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det);
}

double exact_density_linear(const GramianResult& g, const Vec& x, const Vec& y) {
  return std::exp(log_density_normalizer(g) - exact_action_linear(g, x, y));
}

double exact_density_linear(const LinearParams& p, const Vec& x, const Vec& y, double T) {
  return exact_density_linear(gramian(p, T, default_gramian_steps(T)), x, y);
}

Vec exact_optimal_control(const LinearParams& p, const GramianResult& g, const Vec& x,
                          const Vec& y, double T, double t) {
  check_near_singular(g);
  const Vec nu = g.W.llt().solve(mean_offset(g, x, y));
  const double rem = T - t;
  const int steps = std::max(1, static_cast<int>(std::ceil(1000.0 * std::abs(rem))));
  const Mat e = expm_rk4(p.A, rem, steps);
  return p.G.transpose() * (e.transpose() * nu);
}

}  // namespace nsde
