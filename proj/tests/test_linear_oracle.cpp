#include <cmath>
#include <random>

#include "doctest.h"
#include "nsde/linear_oracle.hpp"
#include "oracles.hpp"

using namespace nsde;

TEST_CASE("gramian of the zero drift") {
  for (int d = 1; d <= 4; ++d) {
    const GramianResult g = gramian({Mat::Zero(d, d), Mat::Identity(d, d)}, 2.5, 100);
    CHECK((g.W - 2.5 * Mat::Identity(d, d)).norm() < 1e-12);
    CHECK(g.condition == doctest::Approx(1.0));
  }
}

TEST_CASE("scalar gramian closed form") {
  for (double a : {-2.0, -0.5, 0.5, 1.0}) {
    const double T = 1.0;
    const GramianResult g = gramian({Mat::Constant(1, 1, a), Mat::Identity(1, 1)}, T, 1000);
    CHECK(g.W(0, 0) == doctest::Approx(std::expm1(2 * a * T) / (2 * a)).epsilon(1e-10));
    CHECK(g.exp_TA(0, 0) == doctest::Approx(std::exp(a * T)).epsilon(1e-10));
  }
}

TEST_CASE("diagonal drift decouples entrywise") {
  Mat A = Mat::Zero(2, 2);
  A(0, 0) = -1.0;
  A(1, 1) = 0.7;
  Mat G = Mat::Zero(2, 2);
  G(0, 0) = 2.0;
  G(1, 1) = 0.5;
  const GramianResult g = gramian({A, G}, 1.3, 1300);
  CHECK(g.W(0, 0) == doctest::Approx(4.0 * std::expm1(-2 * 1.3) / -2).epsilon(1e-10));
  CHECK(g.W(1, 1) == doctest::Approx(0.25 * std::expm1(1.4 * 1.3) / 1.4).epsilon(1e-10));
  CHECK(std::abs(g.W(0, 1)) < 1e-14);
}

TEST_CASE("gramian against the block-exponential oracle") {
  std::mt19937_64 rng(21);
  for (int d = 1; d <= 4; ++d) {
    const Mat A = oracle::random_matrix(rng, d, d, 0.8);
    const Mat G = Mat::Identity(d, d) + oracle::random_matrix(rng, d, d, 0.3);
    const GramianResult g = gramian({A, G}, 1.0, 1000);
    const Mat W = oracle::gramian(A, G, 1.0);
    CHECK((g.W - W).norm() <= 1e-8 * W.norm());
    CHECK((g.exp_TA - oracle::expm(A)).norm() < 1e-9);
    CHECK((g.W - g.W.transpose()).norm() == 0.0);
  }
}

TEST_CASE("near-singular gramian is reported") {
  const LinearParams p{Mat::Constant(1, 1, -50.0), Mat::Constant(1, 1, 1e-9)};
  CHECK_THROWS_AS(build_linear_system(p), ConfigError);
  Mat A = Mat::Zero(2, 2);
  A(0, 0) = -50.0;
  Mat G = Mat::Identity(2, 2);
  G(0, 0) = 1e-5;
  const GramianResult g = gramian({A, G}, 10.0, 10000);
  CHECK(g.condition > kGramianConditionLimit);
  CHECK_THROWS_AS(exact_action_linear(g, Vec::Zero(2), Vec::Ones(2)), NumericError);
}

TEST_CASE("exact action") {
  const LinearParams zero{Mat::Zero(2, 2), Mat::Identity(2, 2)};
  Vec x(2), y(2);
  x << 1, -1;
  y << 2, 3;
  CHECK(exact_action_linear(zero, x, y, 2.0) == doctest::Approx((y - x).squaredNorm() / 4.0));

  const LinearParams a1{Mat::Ones(1, 1), Mat::Ones(1, 1)};
  CHECK(exact_action_linear(a1, Vec::Zero(1), Vec::Ones(1), 1.0) ==
        doctest::Approx(1.0 / (std::exp(2.0) - 1.0)).epsilon(1e-9));
  CHECK(exact_action_linear(a1, Vec::Ones(1), Vec::Constant(1, std::exp(1.0)), 1.0) ==
        doctest::Approx(0.0).epsilon(1e-12));

  std::mt19937_64 rng(4);
  for (int d = 1; d <= 3; ++d) {
    const Mat A = oracle::random_matrix(rng, d, d, 1.0);
    const Mat G = Mat::Identity(d, d) + oracle::random_matrix(rng, d, d, 0.2);
    const Vec xs = oracle::random_vector(rng, d, 1.0), ys = oracle::random_vector(rng, d, 1.0);
    CHECK(exact_action_linear({A, G}, xs, ys, 1.0) ==
          doctest::Approx(oracle::linear_action(A, G, xs, ys, 1.0)).epsilon(1e-8));
  }
}

TEST_CASE("exact density") {
  for (int d = 1; d <= 3; ++d) {
    const LinearParams p{Mat::Zero(d, d), Mat::Identity(d, d)};
    const Vec x = Vec::Ones(d);
    CHECK(exact_density_linear(p, x, x, 0.7) == doctest::Approx(std::pow(2 * M_PI * 0.7, -d / 2.0)));
  }

  const LinearParams ou{-Mat::Identity(1, 1), Mat::Constant(1, 1, 0.8)};
  const GramianResult g = gramian(ou, 1.0, 1000);
  double mass = 0.0;
  const double h = 1e-3;
  for (double y = -8; y <= 8; y += h) mass += exact_density_linear(g, Vec::Constant(1, 0.5), Vec::Constant(1, y)) * h;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));

  const Vec x = Vec::Constant(1, 0.5), y1 = Vec::Constant(1, 0.9), y2 = Vec::Constant(1, -0.4);
  const double dlog = std::log(exact_density_linear(g, x, y1)) - std::log(exact_density_linear(g, x, y2));
  CHECK(dlog == doctest::Approx(-(exact_action_linear(g, x, y1) - exact_action_linear(g, x, y2))));

  std::mt19937_64 rng(8);
  const Mat A = oracle::random_matrix(rng, 2, 2, 0.5);
  const Mat G = Mat::Identity(2, 2);
  const Vec x2 = oracle::random_vector(rng, 2, 1.0), y = oracle::random_vector(rng, 2, 1.0);
  CHECK(exact_density_linear({A, G}, x2, y, 1.0) ==
        doctest::Approx(oracle::gaussian_density(oracle::expm(A) * x2, oracle::gramian(A, G, 1.0), y))
            .epsilon(1e-8));
}

TEST_CASE("optimal control steers to the target at the exact cost") {
  std::mt19937_64 rng(13);
  for (int d = 1; d <= 3; ++d) {
    const Mat A = oracle::random_matrix(rng, d, d, 0.8);
    const Mat G = Mat::Identity(d, d);
    const LinearParams p{A, G};
    const GramianResult g = gramian(p, 1.0, 1000);
    const Vec x = oracle::random_vector(rng, d, 1.0), y = oracle::random_vector(rng, d, 1.0);

    // independent forward Euler-free check: RK4 with the control sampled at stage times
    const int n = 2000;
    const double h = 1.0 / n;
    Vec z = x;
    double cost = 0.0;
    for (int k = 0; k < n; ++k) {
      const double t = k * h;
      const Vec u0 = exact_optimal_control(p, g, x, y, 1.0, t);
      const Vec um = exact_optimal_control(p, g, x, y, 1.0, t + h / 2);
      const Vec u1 = exact_optimal_control(p, g, x, y, 1.0, t + h);
      const Vec k1 = A * z + G * u0;
      const Vec k2 = A * (z + h / 2 * k1) + G * um;
      const Vec k3 = A * (z + h / 2 * k2) + G * um;
      const Vec k4 = A * (z + h * k3) + G * u1;
      z += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      cost += h / 6 * 0.5 * (u0.squaredNorm() + 4 * um.squaredNorm() + u1.squaredNorm());
    }
    CHECK((z - y).norm() < 1e-8);
    CHECK(cost == doctest::Approx(exact_action_linear(g, x, y)).epsilon(1e-8));
  }
}

TEST_CASE("expm_rk4 agrees with scaling and squaring") {
  std::mt19937_64 rng(2);
  const Mat A = oracle::random_matrix(rng, 3, 3, 1.0);
  CHECK((expm_rk4(A, 0.8, 800) - oracle::expm(0.8 * A)).norm() < 1e-10);
}

TEST_CASE("gramian is monotone in the horizon") {
  std::mt19937_64 rng(17);
  const Mat A = oracle::random_matrix(rng, 3, 3, 0.7);
  const LinearParams p{A, Mat::Identity(3, 3)};
  Mat prev = Mat::Zero(3, 3);
  for (double T : {0.25, 0.5, 1.0, 2.0}) {
    const Mat W = gramian(p, T, default_gramian_steps(T)).W;
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(W - prev).eigenvalues().minCoeff() >= -1e-12);
    prev = W;
  }
}
