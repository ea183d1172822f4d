// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nsde/action.hpp"
#include "nsde/density.hpp"
#include "nsde/flow.hpp"
#include "nsde/kernels.hpp"
#include "nsde/linear_oracle.hpp"
#include "nsde/sde_mc.hpp"
#include "oracles.hpp"

using namespace nsde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double closed_form_st(double M, double T) { return M == 0.0 ? T : (std::exp(2 * M * T) - 1) / (2 * M); }

// Linear-oracle action equivalence on 20 seeded systems.
Outcome ac1() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int failures = 0;
  for (int i = 0; i < 20; ++i) {
    const int d = 1 + i % 3;
    const bool unstable = (i / 3) % 2 == 1;
    Mat A = oracle::random_matrix(rng, d, d, 0.5);
    A += (unstable ? 0.6 : -0.6) * Mat::Identity(d, d);
    const Mat G = Mat::Identity(d, d) + oracle::random_matrix(rng, d, d, 0.2);
    const Vec x = oracle::random_vector(rng, d, 1.0), y = oracle::random_vector(rng, d, 1.0);
    const double exact = oracle::linear_action(A, G, x, y, 1.0);
    const ActionCertificate c = solve_min_action(build_linear_system({A, G}), x, y, 1.0, 200);
    const double rel = std::abs(c.value - exact) / (1.0 + exact);
    worst = std::max(worst, rel);
    if (!c.converged || rel > 0.01) ++failures;
  }
  return {failures == 0, "worst relative error " + fmt("%.3g", worst) + ", failures " + std::to_string(failures)};
}

// Tight sandwich on f = 0, g = I.
Outcome ac2() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  bool all_converged = true;
  for (int d = 1; d <= 5; ++d) {
    for (double T : {0.5, 1.0, 2.0}) {
      const auto sys = build_linear_system({Mat::Zero(d, d), Mat::Identity(d, d)});
      const Vec x = oracle::random_vector(rng, d, 1.0), y = oracle::random_vector(rng, d, 1.0);
      const double want = (y - x).squaredNorm() / (2 * T);
      SolverOptions opts;
      opts.endpoint_tol = 1e-9;
      const ActionCertificate c = solve_min_action(sys, x, y, T, 50, opts);
      all_converged = all_converged && c.converged && c.lower_certified;
      for (double v : {c.upper, c.lower, c.value}) worst = std::max(worst, std::abs(v - want) / want);
    }
  }
  return {all_converged && worst <= 1e-4, "worst relative deviation " + fmt("%.3g", worst)};
}

// Bound sandwich on 100 seeded RNN instances.
Outcome ac3() {
  std::mt19937_64 rng(303);
  int converged = 0, violations = 0;
  double worst = -1e300;
  for (int i = 0; i < 100; ++i) {
    const int d = 1 + i % 4;
    RnnParams p{0.5 + std::uniform_real_distribution<double>(0, 1)(rng),
                oracle::random_matrix(rng, d, d, 1.2 / std::sqrt(d)),
                std::uniform_real_distribution<double>(0.3, 1.0)(rng)};
    const auto sys = build_rnn_system(p);
    const Vec x = oracle::random_vector(rng, d, 1.0), y = oracle::random_vector(rng, d, 1.0);
    const ActionCertificate c = solve_min_action(sys, x, y, 1.0, 200);
    if (!c.converged) continue;
    ++converged;
    const double tol = 1e-6 * (1.0 + c.upper);
    worst = std::max({worst, c.lower - c.value - tol, c.value - c.upper - tol});
    if (c.lower > c.value + tol || c.value > c.upper + tol) ++violations;
  }
  return {violations == 0 && converged >= 90,
          std::to_string(converged) + "/100 converged, " + std::to_string(violations) +
              " violations, worst margin " + fmt("%.3g", worst)};
}

// Coppel inequality and the closed-form S_T bound with certified M.
Outcome ac4() {
  std::mt19937_64 rng(404);
  double worst_coppel = 0.0, worst_st = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int d = 1 + i % 4;
    const double T = 1.0 + (i % 3) * 0.5;
    const int steps = static_cast<int>(2000 * T);
    ControlAffineSystem sys = [&] {
      if (i % 2 == 0) return build_linear_system({oracle::random_matrix(rng, d, d, 0.7), Mat::Identity(d, d)});
      return build_rnn_system({1.0, oracle::random_matrix(rng, d, d, 0.8), 0.5});
    }();
    const double M = *certified_M(sys);
    const auto probes = latin_hypercube(Box::cube(d, 2.0), 8, static_cast<std::uint64_t>(i));
    for (const Vec& p : probes) {
      const CoppelReport r = coppel_check(sys, p, T, steps, M);
      for (std::size_t k = 0; k < r.norms.size(); ++k) {
        const double t = T * static_cast<double>(k) / steps;
        worst_coppel = std::max(worst_coppel, r.norms[k] / std::exp(M * t) - 1.0);
      }
    }
    const StabilityEstimate s = s_t_numeric(sys, T, probes, steps);
    worst_st = std::max(worst_st, s.numeric / closed_form_st(M, T) - 1.0);
  }
  return {worst_coppel <= 1e-6 && worst_st <= 1e-6,
          "max ||Lambda||/e^{Mt} - 1 = " + fmt("%.3g", worst_coppel) + ", max S_num/S_bound - 1 = " +
              fmt("%.3g", worst_st)};
}


// Brute-force oracle for d = 1, K = 2. For each u₀ on the 0.01 grid of
// [−5, 5] the endpoint constraint fixes u₁ (the scalar endpoint is
// increasing in u₁), which is found by bisection with an independent RK4.
Outcome ac5() {
  const double tau = 1.0, a = 1.7, c = 0.6, T = 1.0, x0 = -0.4, y = 1.1;
  const auto sys = build_rnn_system({tau, Mat::Constant(1, 1, a), c});
  const int sub = default_steps_per_interval(T, 2);
  const auto f = [&](double x, double u) { return -x / tau + a * std::tanh(x) + c * u; };
  const auto endpoint = [&](double u0, double u1) {
    return oracle::rk4_scalar(f, oracle::rk4_scalar(f, x0, u0, T / 2, sub), u1, T / 2, sub);
  };

  const double h = 0.01;
  std::vector<double> cost;
  for (int i = 0; i <= 1000; ++i) {
    const double u0 = -5.0 + i * h;
    double lo = -5.0, hi = 5.0;
    if (endpoint(u0, lo) > y || endpoint(u0, hi) < y) {
      cost.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (endpoint(u0, mid) < y ? lo : hi) = mid;
    }
    const double u1 = 0.5 * (lo + hi);
    cost.push_back(0.5 * (u0 * u0 + u1 * u1) * (T / 2));
  }
  const auto best = std::min_element(cost.begin(), cost.end()) - cost.begin();
  const double grid_min = cost[static_cast<std::size_t>(best)];
  if (!std::isfinite(grid_min) || best == 0 || best == 1000) return {false, "grid minimum not interior"};
  // A quadratic through the minimizing node and its neighbours bounds how far
  // the continuous minimum can sit below the grid minimum.
  const double d2 = (cost[best - 1] - 2 * grid_min + cost[best + 1]) / (h * h);
  const double slope = (cost[best + 1] - cost[best - 1]) / (2 * h);
  const double local = d2 > 0 ? slope * slope / (2 * d2) : std::abs(slope) * h;
  const double err = std::max(local, std::abs(d2) * h * h / 8);

  SolverOptions opts;
  opts.n_restarts = 4;
  opts.seed = 5;
  const ActionCertificate cert = solve_min_action(sys, Vec::Constant(1, x0), Vec::Constant(1, y), T, 2, opts);
  const double tol = 1e-6 * (1 + grid_min);
  const bool pass = cert.converged && cert.value <= grid_min + err + tol && cert.value >= grid_min - err - tol;
  return {pass, "solver " + fmt("%.10f", cert.value) + ", grid " + fmt("%.10f", grid_min) + ", error bound " +
                    fmt("%.2g", err)};
}

// Maurey 1/N law on a linear model with closed-form F.
Outcome ac6() {
  Mat A(2, 2);
  A << -0.5, 0.3, -0.2, -0.8;
  const Mat G = Mat::Identity(2, 2);
  Vec alpha(2);
  alpha << 1.0, -0.5;
  const NeuralSdeModel m{build_linear_system({A, G}), alpha, 1.0, 200};
  const PiSampler pi = PiSampler::gaussian(Vec::Zero(2), Vec::Ones(2));
  std::vector<long long> Ns;
  for (long long N = 8; N <= 1024; N *= 2) Ns.push_back(N);
  const auto ref = [&](const Vec& x) { return alpha.dot(oracle::expm(A) * x); };
  const MaureyTable t = maurey_rate_experiment(m, pi, Ns, 50, 10, 606, ref);
  const double v_exact = alpha.dot(oracle::gramian(A, G, 1.0) * alpha);
  const McEstimate v_hat = estimate_Vpi(m, pi, 200, 500, 607);
  bool within = std::abs(v_hat.mean - v_exact) <= 3 * v_hat.se;
  double worst_z = 0.0;
  for (const auto& r : t.rows) {
    const double z = std::abs(r.N * r.mse - v_exact) / (r.N * r.se);
    worst_z = std::max(worst_z, z);
    within = within && z <= 3.0;
  }
  return {std::abs(t.slope + 1.0) <= 0.15 && within,
          "slope " + fmt("%.4f", t.slope) + ", worst |N*MSE - V|/SE " + fmt("%.2f", worst_z) + ", V_hat " +
              fmt("%.4f", v_hat.mean) + " vs " + fmt("%.4f", v_exact)};
}

// Density exactness and the Sheu fit for a linear d = 1 model.
Outcome ac7() {
  const LinearParams p{Mat::Constant(1, 1, -0.8), Mat::Constant(1, 1, 0.9)};
  const NeuralSdeModel m{build_linear_system(p), Vec::Ones(1), 1.0, 200};
  const Vec x = Vec::Constant(1, 0.7);
  const double mean = std::exp(-0.8) * 0.7;
  const double sd = std::sqrt(oracle::gramian(p.A, p.G, 1.0)(0, 0));
  const Box box{Vec::Constant(1, mean - 5 * sd), Vec::Constant(1, mean + 5 * sd)};
  const DensityHistogram h = estimate_density(m, x, 1000000, box, 64, 707);
  const auto exact = [&](const Vec& y) {
    return oracle::gaussian_density(Vec::Constant(1, mean), Mat::Constant(1, 1, sd * sd), y);
  };
  const double l1 = l1_to_exact(h, exact);

  SheuOptions so;
  so.box = box;
  const SheuReport r = sheu_sandwich_check(m, x, default_probes(m, x, 12, 2, 708), 1000000, 709, so);
  return {l1 <= 0.02 && std::abs(r.slope - 1.0) <= 0.1,
          "L1 " + fmt("%.4f", l1) + ", slope " + fmt("%.4f", r.slope) + " over " +
              std::to_string(r.probes.size()) + " probes"};
}

// Qualitative log-density versus action correlation for a d = 1 RNN.
Outcome ac8() {
  const NeuralSdeModel m{build_rnn_system({1.0, Mat::Constant(1, 1, 1.5), 0.7}), Vec::Ones(1), 1.0, 200};
  const Vec x = Vec::Constant(1, 0.2);
  const SheuReport r = sheu_sandwich_check(m, x, default_probes(m, x, 12, 2, 808), 1000000, 809);
  return {r.probes.size() >= 20 && r.correlation >= 0.9,
          "Pearson(log p, -I) " + fmt("%.4f", r.correlation) + " over " + std::to_string(r.probes.size()) +
              " probes"};
}

// Adjoint gradient against central finite differences.
Outcome ac9() {
  std::mt19937_64 rng(909);
  double worst = 0.0;
  for (int prob = 0; prob < 5; ++prob) {
    const int d = 1 + prob % 3;
    const int K = 16;
    const auto sys = build_rnn_system({0.8, oracle::random_matrix(rng, d, d, 1.0), 0.6});
    const Vec x = oracle::random_vector(rng, d, 1.0), y = oracle::random_vector(rng, d, 1.0);
    const ControlGrid u{1.0, oracle::random_matrix(rng, d, K, 1.0)};
    const double rho = 100.0;
    const int sub = 4;
    const PenaltyValue pv = penalty_objective(sys, x, y, u, rho, sub);
    std::uniform_int_distribution<int> row(0, d - 1), col(0, K - 1);
    for (int s = 0; s < 20; ++s) {
      const int i = row(rng), k = col(rng);
      const double step = 1e-6;
      ControlGrid up = u, um = u;
      up.u(i, k) += step;
      um.u(i, k) -= step;
      const double fd = (penalty_objective(sys, x, y, up, rho, sub, false).value -
                         penalty_objective(sys, x, y, um, rho, sub, false).value) /
                        (2 * step);
      const double rel = std::abs(pv.gradient(i, k) - fd) / std::max({std::abs(fd), std::abs(pv.gradient(i, k)), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  return {worst <= 1e-5, "worst relative error " + fmt("%.3g", worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Two selftest runs with the same seed and thread count are byte-identical.
Outcome ac10() {
  const fs::path root = fs::temp_directory_path() / "nsde_acceptance";
  fs::remove_all(root);
  for (const char* run : {"a", "b"}) {
    fs::create_directories(root / run);
    const std::string cmd = std::string(NSDE_CLI_PATH) + " --seed 12345 --threads 2 --csv-dir " +
                            (root / run).string() + " --out " + (root / run / "out.json").string() + " selftest";
    if (std::system(cmd.c_str()) != 0) return {false, "selftest did not exit 0"};
  }
  const std::string ja = slurp(root / "a" / "out.json"), jb = slurp(root / "b" / "out.json");
  const std::string ca = slurp(root / "a" / "selftest.csv"), cb = slurp(root / "b" / "selftest.csv");
  const bool same = !ja.empty() && !ca.empty() && ja == jb && ca == cb;
  return {same, same ? "JSON (" + std::to_string(ja.size()) + " bytes) and CSV identical" : "outputs differ"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"AC1 linear-oracle action equivalence", 60, ac1},
      {"AC2 tight sandwich on the trivial system", 10, ac2},
      {"AC3 bound sandwich on RNN instances", 300, ac3},
      {"AC4 Coppel inequality and S_T bound", 60, ac4},
      {"AC5 brute-force action oracle", 30, ac5},
      {"AC6 Monte Carlo 1/N rate", 120, ac6},
      {"AC7 linear density exactness and fit slope", 120, ac7},
      {"AC8 log-density vs action correlation (RNN)", 180, ac8},
      {"AC9 adjoint gradient check", 30, ac9},
      {"AC10 selftest determinism", 60, ac10},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failed;
    std::printf("%s %s: %s; %.1f s (budget %.0f s%s)\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                c.budget_s, in_budget ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
