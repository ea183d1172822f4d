#include <random>
#include <vector>

#include "doctest.h"
#include "nsde/kernels.hpp"
#include "nsde/rng.hpp"
#include "oracles.hpp"

using namespace nsde;

namespace {

std::vector<std::uint64_t> seeds(int n, std::uint64_t base) {
  std::vector<std::uint64_t> s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = derive_seed(base, stream::kEndpoint, static_cast<std::uint64_t>(i));
  return s;
}

}  // namespace

TEST_CASE("derived seeds are distinct across tags and indices") {
  std::vector<std::uint64_t> all;
  for (std::uint64_t tag = 1; tag <= 6; ++tag)
    for (std::uint64_t i = 0; i < 1000; ++i) all.push_back(derive_seed(42, tag, i));
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
}

TEST_CASE("serial and OpenMP endpoint kernels agree bitwise") {
  for (int threads : {1, 2, 3}) {
    kernels::set_thread_count(threads);
    std::mt19937_64 rng(1);
    const auto sys = build_rnn_system({1.0, oracle::random_matrix(rng, 3, 3, 1.0), 0.5});
    const Vec x = oracle::random_vector(rng, 3, 1.0);
    const auto s = seeds(257, 9);
    const Mat a = kernels::serial::em_endpoints(sys, x, s, 1.0, 50);
    const Mat b = kernels::omp::em_endpoints(sys, x, s, 1.0, 50);
    CHECK(a.cols() == 257);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

    const Mat starts = oracle::random_matrix(rng, 3, 257, 1.0);
    CHECK((kernels::serial::em_endpoints(sys, starts, s, 1.0, 20) -
           kernels::omp::em_endpoints(sys, starts, s, 1.0, 20))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  kernels::set_thread_count(2);
}

TEST_CASE("endpoint kernel matches a single path") {
  const auto sys = build_rnn_system({1.0, Mat::Identity(2, 2), 0.3});
  const Vec x = Vec::Ones(2);
  const auto s = seeds(5, 3);
  const Mat a = kernels::omp::em_endpoints(sys, x, s, 2.0, 40);
  for (int i = 0; i < 5; ++i) CHECK((a.col(i) - kernels::em_path_endpoint(sys, x, s[i], 2.0, 40)).norm() == 0.0);
}

TEST_CASE("endpoint kernel reports blow-up") {
  const auto sys = ControlAffineSystem::custom(
      1, [](const Vec& x, Vec& f) { f = x.array().cube().matrix(); },
      [](const Vec&, Mat& g) { g = Mat::Identity(1, 1); }, {}, {1, 1});
  const auto s = seeds(4, 1);
  CHECK_THROWS_AS(kernels::serial::em_endpoints(sys, Vec::Constant(1, 5.0), s, 5.0, 10), NumericError);
  CHECK_THROWS_AS(kernels::omp::em_endpoints(sys, Vec::Constant(1, 5.0), s, 5.0, 10), NumericError);
}

TEST_CASE("Euler-Maruyama step by hand") {
  // one step with f = −x, g = 2: X₁ = x − Δx + 2√Δ w with w the first normal draw
  const auto sys = build_linear_system({-Mat::Identity(1, 1), Mat::Constant(1, 1, 2.0)});
  SplitMix64 gen(77);
  std::normal_distribution<double> n(0.0, 1.0);
  const double w = n(gen);
  const Vec end = kernels::em_path_endpoint(sys, Vec::Constant(1, 1.5), 77, 0.25, 1);
  CHECK(end[0] == doctest::Approx(1.5 - 0.25 * 1.5 + 2.0 * 0.5 * w).epsilon(1e-15));
}

TEST_CASE("probe Jacobian norms agree") {
  std::mt19937_64 rng(4);
  const auto sys = build_rnn_system({1.0, oracle::random_matrix(rng, 2, 2, 1.0), 1.0});
  std::vector<Vec> probes;
  for (int i = 0; i < 7; ++i) probes.push_back(oracle::random_vector(rng, 2, 1.0));
  const Mat a = kernels::serial::probe_jacobian_sq_norms(sys, probes, 1.0, 100);
  const Mat b = kernels::omp::probe_jacobian_sq_norms(sys, probes, 1.0, 100);
  CHECK(a.rows() == 7);
  CHECK(a.cols() == 101);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.col(0).array() - 1.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("histogram binning") {
  kernels::BinGrid g{Vec::Constant(2, 0.0), Vec::Constant(2, 1.0), 4};
  CHECK(g.cell_count() == 16);
  CHECK(g.cell_volume() == doctest::Approx(1.0 / 16));
  const double inside[2] = {0.3, 0.9};
  CHECK(g.locate(inside) == 1 * 4 + 3);
  const double outside[2] = {1.2, 0.5};
  CHECK(g.locate(outside) == -1);
  const Vec c = g.center(1 * 4 + 3);
  CHECK(c[0] == doctest::Approx(0.375));
  CHECK(c[1] == doctest::Approx(0.875));

  std::mt19937_64 rng(6);
  const Mat pts = oracle::random_matrix(rng, 2, 5000, 0.4).array() + 0.5;
  const auto a = kernels::serial::histogram_counts(pts, g);
  const auto b = kernels::omp::histogram_counts(pts, g);
  CHECK(a.counts == b.counts);
  CHECK(a.outside == b.outside);
  std::uint64_t total = a.outside;
  for (auto n : a.counts) total += n;
  CHECK(total == 5000);
}
