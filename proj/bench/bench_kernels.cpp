#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "nsde/kernels.hpp"
#include "nsde/rng.hpp"

using namespace nsde;

namespace {

ControlAffineSystem rnn(int d) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.8);
  Mat A(d, d);
  for (int i = 0; i < d * d; ++i) A.data()[i] = n(rng);
  return build_rnn_system({1.0, A, 0.5});
}

std::vector<std::uint64_t> seeds(long long n) {
  std::vector<std::uint64_t> s(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = derive_seed(7, stream::kEndpoint, static_cast<std::uint64_t>(i));
  return s;
}

template <Mat (*Kernel)(const ControlAffineSystem&, const Mat&, std::span<const std::uint64_t>, double, int)>
void BM_Endpoints(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto sys = rnn(d);
  const auto s = seeds(state.range(1));
  const Mat x = Mat::Zero(d, 1);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(sys, x, s, 1.0, 100));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

template <Mat (*Kernel)(const ControlAffineSystem&, const std::vector<Vec>&, double, int)>
void BM_ProbeNorms(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto sys = rnn(d);
  std::vector<Vec> probes;
  for (int i = 0; i < 32; ++i) probes.push_back(Vec::Constant(d, 0.1 * i - 1.6));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(sys, probes, 1.0, 1000));
}

template <kernels::BinCounts (*Kernel)(const Mat&, const kernels::BinGrid&)>
void BM_Histogram(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Mat pts(2, state.range(0));
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = n(rng);
  const kernels::BinGrid grid{Vec::Constant(2, -4.0), Vec::Constant(2, 4.0), 64};
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(pts, grid));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Endpoints<kernels::serial::em_endpoints>)->Name("em_endpoints/serial")->Args({1, 20000})->Args({4, 20000});
BENCHMARK(BM_Endpoints<kernels::omp::em_endpoints>)->Name("em_endpoints/omp")->Args({1, 20000})->Args({4, 20000});
BENCHMARK(BM_ProbeNorms<kernels::serial::probe_jacobian_sq_norms>)->Name("probe_norms/serial")->Arg(2)->Arg(4);
BENCHMARK(BM_ProbeNorms<kernels::omp::probe_jacobian_sq_norms>)->Name("probe_norms/omp")->Arg(2)->Arg(4);
BENCHMARK(BM_Histogram<kernels::serial::histogram_counts>)->Name("histogram/serial")->Arg(1 << 20);
BENCHMARK(BM_Histogram<kernels::omp::histogram_counts>)->Name("histogram/omp")->Arg(1 << 20);

BENCHMARK_MAIN();
