#include <cmath>
#include <random>

#include "doctest.h"
#include "nsde/density.hpp"
#include "nsde/linear_oracle.hpp"
#include "oracles.hpp"

using namespace nsde;

namespace {

ControlAffineSystem brownian(int d) { return build_linear_system({Mat::Zero(d, d), Mat::Identity(d, d)}); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

Box interval(double lo, double hi) { return {Vec::Constant(1, lo), Vec::Constant(1, hi)}; }

}  // namespace

TEST_CASE("Brownian endpoint histogram against the Gaussian") {
  const NeuralSdeModel m{brownian(1), Vec::Ones(1), 1.0, 20};
  const Vec x = Vec::Constant(1, 0.3);
  const long long n = 200000;
  const DensityHistogram h = estimate_density(m, x, n, interval(-2.7, 3.3), 30, 1);
  CHECK(h.total == n);
  CHECK(h.warnings.empty());
  const double w = 6.0 / 30;
  for (std::size_t c = 0; c < h.counts.size(); ++c) {
    const double a = -2.7 + c * w;
    const double p = (normal_cdf(a + w - 0.3) - normal_cdf(a - 0.3)) / w;
    CHECK(std::abs(h.density[c] - p) <= 4 * std::sqrt(p / (n * w)) + 1e-12);
  }
}

TEST_CASE("histogram mass never exceeds one") {
  const NeuralSdeModel m{brownian(2), Vec::Ones(2), 1.0, 10};
  for (double half : {0.5, 2.0, 10.0}) {
    const DensityHistogram h = estimate_density(m, Vec::Zero(2), 20000, Box::cube(2, half), 16, 2);
    CHECK(h.mass() <= 1.0 + 1e-12);
    CHECK(h.mass() == doctest::Approx(1.0 - double(h.outside) / h.total));
  }
  const DensityHistogram narrow = estimate_density(m, Vec::Zero(2), 20000, Box::cube(2, 0.5), 16, 2);
  CHECK_FALSE(narrow.warnings.empty());
}

TEST_CASE("l1_to_exact uses cell averages and the mass outside the box") {
  // synthetic histogram whose cells hold the exact N(0,1) cell masses on [-2,2]
  DensityHistogram h;
  h.grid = {Vec::Constant(1, -2.0), Vec::Constant(1, 2.0), 16};
  h.total = 1;
  const double w = 0.25;
  double inside = 0.0;
  for (int c = 0; c < 16; ++c) {
    const double mass = normal_cdf(-2 + (c + 1) * w) - normal_cdf(-2 + c * w);
    h.density.push_back(mass / w);
    inside += mass;
  }
  h.counts.assign(16, 0);
  const auto pdf = [](const Vec& y) { return std::exp(-0.5 * y[0] * y[0]) / std::sqrt(2 * M_PI); };
  CHECK(l1_to_exact(h, pdf) == doctest::Approx(1.0 - inside).epsilon(1e-6));

  h.density.assign(16, 0.0);
  CHECK(l1_to_exact(h, pdf) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("OU histogram is close to the exact density") {
  const LinearParams p{-Mat::Identity(1, 1), Mat::Identity(1, 1)};
  const NeuralSdeModel m{build_linear_system(p), Vec::Ones(1), 1.0, 200};
  const Vec x = Vec::Constant(1, 1.0);
  const GramianResult g = gramian(p, 1.0, 1000);
  const DensityHistogram h = estimate_density(m, x, 200000, interval(-3.0, 3.7), 64, 3);
  const double l1 = l1_to_exact(h, [&](const Vec& y) { return exact_density_linear(g, x, y); });
  CHECK(l1 <= 0.04);
}

TEST_CASE("two-dimensional histogram") {
  const NeuralSdeModel m{brownian(2), Vec::Ones(2), 1.0, 10};
  const DensityHistogram h = estimate_density(m, Vec::Zero(2), 100000, Box::cube(2, 4.0), 16, 4);
  const long long c = h.cell_of(Vec::Constant(2, 0.1));
  REQUIRE(c >= 0);
  const double want = std::pow((normal_cdf(0.5) - normal_cdf(0.0)) / 0.5, 2);
  CHECK(std::abs(h.density[static_cast<std::size_t>(c)] - want) <= 4 * h.standard_error(static_cast<std::size_t>(c)));
}

TEST_CASE("density arguments are validated") {
  const NeuralSdeModel m3{brownian(3), Vec::Ones(3), 1.0, 10};
  CHECK_THROWS_AS(estimate_density(m3, Vec::Zero(3), 100, Box::cube(3, 1.0), 16, 1), ConfigError);
  const NeuralSdeModel m1{brownian(1), Vec::Ones(1), 1.0, 10};
  CHECK_THROWS_AS(estimate_density(m1, Vec::Zero(1), 100, Box::cube(1, 1.0), 4, 1), ConfigError);
  CHECK_THROWS_AS(estimate_density(m1, Vec::Zero(1), 100, interval(1.0, -1.0), 16, 1), ConfigError);
}

TEST_CASE("Sheu fit is exact for Gaussian transitions") {
  struct Case {
    LinearParams p;
    double T;
  };
  for (const Case& c : {Case{{Mat::Zero(1, 1), Mat::Identity(1, 1)}, 1.0},
                        Case{{-Mat::Identity(1, 1), Mat::Constant(1, 1, 0.8)}, 1.0}}) {
    const NeuralSdeModel m{build_linear_system(c.p), Vec::Ones(1), c.T, 200};
    const Vec x = Vec::Constant(1, 0.5);
    const auto probes = default_probes(m, x, 10, 2, 5);
    CHECK(probes.size() == 20);
    const SheuReport r = sheu_sandwich_check(m, x, probes, 1000000, 6);
    const double W = oracle::gramian(c.p.A, c.p.G, c.T)(0, 0);
    CHECK(r.slope == doctest::Approx(1.0).epsilon(0.1));
    CHECK(std::abs(r.intercept - (-0.5 * std::log(2 * M_PI * W))) <= 0.1);
    CHECK(r.correlation > 0.99);
    for (const auto& pr : r.probes) CHECK(pr.converged);
  }
}

TEST_CASE("Sheu probes in empty bins are excluded") {
  const NeuralSdeModel m{brownian(1), Vec::Ones(1), 1.0, 20};
  const Vec x = Vec::Zero(1);
  std::vector<Vec> probes{Vec::Constant(1, 0.0), Vec::Constant(1, 0.5), Vec::Constant(1, 1.0),
                          Vec::Constant(1, 4.9)};
  SheuOptions opts;
  opts.box = interval(-5.0, 5.0);
  const SheuReport r = sheu_sandwich_check(m, x, probes, 2000, 7, opts);
  CHECK(r.excluded.size() == 1);
  CHECK(r.probes.size() == 3);
  for (const auto& p : r.probes) CHECK(r.histogram.cell_of(p.y) == r.histogram.cell_of(p.requested));
}

TEST_CASE("pearson correlation") {
  CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
}
