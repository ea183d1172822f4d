#include "nsde/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "nsde/action.hpp"
#include "nsde/density.hpp"
#include "nsde/expression.hpp"
#include "nsde/flow.hpp"
#include "nsde/kernels.hpp"
#include "nsde/linear_oracle.hpp"
#include "nsde/rng.hpp"
#include "nsde/sde_mc.hpp"
#include "nsde/system_config.hpp"

namespace nsde {

namespace {

struct Context {
  Json config;
  std::uint64_t seed = 1;
  std::string csv_dir;
};

struct Outcome {
  Json result;
  int code = exit_code::kOk;
};

template <class T>
T value_or(Json& cfg, const char* key, T fallback) {
  if (!cfg.contains(key)) cfg[key] = fallback;
  try {
    return cfg[key].get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

Json& require(Json& cfg, const char* key) {
  if (!cfg.contains(key)) throw ConfigError(std::string("config is missing '") + key + "'");
  return cfg[key];
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// Opens `<csv_dir>/<name>` for writing or returns nullptr when no CSV
/// directory was requested.
std::unique_ptr<std::ofstream> open_csv(const Context& ctx, const std::string& name) {
  if (ctx.csv_dir.empty()) return nullptr;
  std::filesystem::create_directories(ctx.csv_dir);
  auto f = std::make_unique<std::ofstream>(std::filesystem::path(ctx.csv_dir) / name);
  if (!*f) throw ConfigError("cannot open " + ctx.csv_dir + "/" + name);
  f->imbue(std::locale::classic());
  *f << std::setprecision(17);
  return f;
}

int default_flow_steps(double T) { return std::max(100, static_cast<int>(std::ceil(1000.0 * T))); }

ControlAffineSystem system_of(Json& cfg) { return system_from_json(require(cfg, "system")); }

Vec point(Json& cfg, const char* key, int dim) {
  const Vec v = vec_from_json(require(cfg, key), key);
  if (v.size() != dim) throw ConfigError(std::string(key) + " has the wrong dimension");
  return v;
}

NeuralSdeModel model_of(Json& cfg) {
  NeuralSdeModel m{system_of(cfg), Vec(), value_or(cfg, "T", 1.0), value_or(cfg, "L", 100)};
  if (!cfg.contains("alpha")) cfg["alpha"] = std::vector<double>(static_cast<std::size_t>(m.system.dim()), 1.0);
  m.alpha = vec_from_json(cfg["alpha"], "alpha");
  m.validate();
  return m;
}

SolverOptions solver_options(Json& cfg, std::uint64_t seed) {
  SolverOptions o;
  if (!cfg.contains("opts")) cfg["opts"] = Json::object();
  Json& j = cfg["opts"];
  o.endpoint_tol = value_or(j, "endpoint_tol", o.endpoint_tol);
  o.max_iterations = value_or(j, "max_iterations", o.max_iterations);
  o.rho0 = value_or(j, "rho0", o.rho0);
  o.rho_factor = value_or(j, "rho_factor", o.rho_factor);
  o.rho_max = value_or(j, "rho_max", o.rho_max);
  o.steps_per_interval = value_or(j, "steps_per_interval", o.steps_per_interval);
  o.lbfgs_memory = value_or(j, "lbfgs_memory", o.lbfgs_memory);
  o.gradient_tol = value_or(j, "gradient_tol", o.gradient_tol);
  o.n_restarts = value_or(j, "n_restarts", o.n_restarts);
  o.restart_scale = value_or(j, "restart_scale", o.restart_scale);
  if (j.contains("s_t")) o.s_t = j["s_t"].get<double>();
  o.seed = seed;
  return o;
}

Json certificate_json(const ActionCertificate& c) {
  return {{"value", c.value},
          {"upper_bound", c.upper},
          {"lower_bound", c.lower},
          {"lower_bound_certified", c.lower_certified},
          {"residual", c.residual},
          {"endpoint_tol", c.endpoint_tol},
          {"converged", c.converged},
          {"iterations", c.iterations},
          {"penalty_stages", c.stages},
          {"final_penalty", c.final_penalty},
          {"best_restart", c.best_restart},
          {"steps_per_interval", c.steps_per_interval},
          {"M", std::isnan(c.M) ? Json(nullptr) : Json(c.M)},
          {"s_t_used", c.s_t_used},
          {"K", c.control.intervals()},
          {"note", "value is the best local minimum found; it upper-estimates I_T"}};
}

Json mc_json(const McEstimate& e) {
  return {{"mean", e.mean}, {"variance", e.variance}, {"n", e.n}, {"seed", e.seed}, {"se", e.se}};
}

Json stability_json(const StabilityEstimate& s) {
  return {{"s_t_numeric", s.numeric}, {"s_t_bound", s.bound},
          {"s_t_bound_displayed_form", s.displayed_bound}, {"M", s.M},
          {"M_certified", s.M_certified}, {"method", s.method}};
}

// ---------------------------------------------------------------- handlers

Outcome cmd_action(Context& ctx) {
  Json& cfg = ctx.config;
  const ControlAffineSystem sys = system_of(cfg);
  const Vec x = point(cfg, "x", sys.dim());
  const Vec y = point(cfg, "y", sys.dim());
  const double T = value_or(cfg, "T", 1.0);
  const int K = value_or(cfg, "K", 200);
  const SolverOptions opts = solver_options(cfg, ctx.seed);
  const ActionCertificate cert = solve_min_action(sys, x, y, T, K, opts);

  if (auto f = open_csv(ctx, "control.csv")) {
    *f << "k,t";
    for (int i = 0; i < sys.dim(); ++i) *f << ",u_" << i + 1;
    *f << "\n";
    for (int k = 0; k < K; ++k) {
      *f << k << "," << k * cert.control.dt();
      for (int i = 0; i < sys.dim(); ++i) *f << "," << cert.control.u(i, k);
      *f << "\n";
    }
  }
  if (auto f = open_csv(ctx, "trajectory.csv")) rollout(sys, x, cert.control, cert.steps_per_interval).write_csv(*f);

  Outcome o{certificate_json(cert)};
  if (!cert.converged) o.code = exit_code::kNotConverged;
  return o;
}

Outcome cmd_gramian(Context& ctx) {
  Json& cfg = ctx.config;
  LinearParams p;
  if (cfg.contains("system")) {
    const ControlAffineSystem sys = system_of(cfg);
    if (!sys.linear_params()) throw ConfigError("gramian needs a linear system");
    p = *sys.linear_params();
  } else {
    p = {mat_from_json(require(cfg, "A"), "A"), mat_from_json(require(cfg, "G"), "G")};
    build_linear_system(p);
  }
  const double T = value_or(cfg, "T", 1.0);
  const int steps = value_or(cfg, "steps", default_gramian_steps(T));
  const GramianResult g = gramian(p, T, steps);
  Json r = {{"W", to_json(g.W)}, {"exp_TA", to_json(g.exp_TA)}, {"condition", g.condition},
            {"near_singular", !(g.condition <= kGramianConditionLimit)}};
  if (cfg.contains("x") && cfg.contains("y")) {
    const int d = static_cast<int>(p.A.rows());
    const Vec x = point(cfg, "x", d), y = point(cfg, "y", d);
    r["action"] = exact_action_linear(g, x, y);
    r["density"] = exact_density_linear(g, x, y);
    r["log_density"] = log_density_normalizer(g) - exact_action_linear(g, x, y);
  }
  return {r};
}

Outcome cmd_flow(Context& ctx) {
  Json& cfg = ctx.config;
  const ControlAffineSystem sys = system_of(cfg);
  const Vec x = point(cfg, "x", sys.dim());
  const double T = value_or(cfg, "T", 1.0);
  const int steps = value_or(cfg, "steps", default_flow_steps(T));
  const bool with_jac = value_or(cfg, "jacobian", false);
  const Trajectory tr = with_jac ? flow_jacobian(sys, x, T, steps) : flow(sys, x, T, steps);
  Json r = {{"endpoint", to_json(tr.endpoint())}, {"steps", steps}};
  if (with_jac) {
    r["jacobian"] = to_json(tr.jacobians.back());
    r["jacobian_norm"] = spectral_norm(tr.jacobians.back());
  }
  if (auto f = open_csv(ctx, "trajectory.csv")) tr.write_csv(*f);
  return {r};
}

std::vector<Vec> probes_of(Json& cfg, int dim, std::uint64_t seed) {
  std::vector<Vec> probes;
  if (cfg.contains("probes"))
    for (const auto& p : cfg["probes"]) probes.push_back(vec_from_json(p, "probes"));
  if (cfg.contains("box")) {
    const int n = value_or(cfg, "n_probes", 16);
    for (Vec& v : latin_hypercube(box_from_json(cfg["box"], dim), n, seed)) probes.push_back(std::move(v));
  }
  if (cfg.contains("points"))
    for (const auto& p : cfg["points"]) probes.push_back(vec_from_json(p, "points"));
  if (probes.empty()) {
    cfg["box"] = {{"lo", std::vector<double>(static_cast<std::size_t>(dim), -1.0)},
                  {"hi", std::vector<double>(static_cast<std::size_t>(dim), 1.0)}};
    return probes_of(cfg, dim, seed);
  }
  for (const Vec& p : probes)
    if (p.size() != dim) throw ConfigError("probe has the wrong dimension");
  return probes;
}

Outcome cmd_stability(Context& ctx) {
  Json& cfg = ctx.config;
  const ControlAffineSystem sys = system_of(cfg);
  const double T = value_or(cfg, "T", 1.0);
  const int steps = value_or(cfg, "steps", default_flow_steps(T));
  const std::vector<Vec> probes = probes_of(cfg, sys.dim(), ctx.seed);
  const StabilityEstimate est =
      cfg.contains("M") ? s_t_numeric(sys, T, probes, steps, cfg["M"].get<double>(), false, "sampled-sup")
                        : s_t_numeric(sys, T, probes, steps);
  Json r = stability_json(est);
  r["n_probes"] = probes.size();
  double v_int = 0.0, v_uni = 0.0;
  for (const Vec& p : probes) {
    const CoppelReport c = coppel_check(sys, p, T, steps, est.M);
    v_int = std::max(v_int, c.max_relative_violation_integral);
    v_uni = std::max(v_uni, c.max_relative_violation_uniform);
  }
  r["coppel_max_relative_violation_integral"] = v_int;
  r["coppel_max_relative_violation_uniform"] = v_uni;
  return {r};
}

Outcome cmd_simulate(Context& ctx) {
  Json& cfg = ctx.config;
  const NeuralSdeModel m = model_of(cfg);
  const Vec x = point(cfg, "x", m.system.dim());
  const long long N = value_or(cfg, "N", 10000LL);
  const McEstimate e = estimate_F(m, x, N, ctx.seed);
  Json r = {{"F_hat", mc_json(e)}};
  if (auto ref = closed_form_F(m)) r["F_closed_form"] = ref(x);
  if (N <= 100000) {
    if (auto f = open_csv(ctx, "endpoints.csv")) {
      std::vector<std::uint64_t> seeds(static_cast<std::size_t>(N));
      for (long long i = 0; i < N; ++i)
        seeds[static_cast<std::size_t>(i)] = derive_seed(ctx.seed, stream::kEndpoint, static_cast<std::uint64_t>(i));
      const Mat ends = kernels::omp::em_endpoints(m.system, x, seeds, m.T, m.L);
      *f << "i";
      for (int k = 0; k < m.system.dim(); ++k) *f << ",x_" << k + 1;
      *f << "\n";
      for (long long i = 0; i < N; ++i) {
        *f << i;
        for (int k = 0; k < m.system.dim(); ++k) *f << "," << ends(k, i);
        *f << "\n";
      }
    }
  }
  return {r};
}

Outcome cmd_maurey(Context& ctx) {
  Json& cfg = ctx.config;
  const NeuralSdeModel m = model_of(cfg);
  if (!cfg.contains("pi")) cfg["pi"] = Json::object();
  const PiSampler pi = pi_from_json(cfg["pi"], m.system.dim());
  const auto N_list = value_or(cfg, "N_list", std::vector<long long>{8, 16, 32, 64, 128, 256, 512, 1024});
  const int reps = value_or(cfg, "reps", 50);
  const int n_x = value_or(cfg, "n_x", 10);
  const MaureyTable t = maurey_rate_experiment(m, pi, N_list, reps, n_x, ctx.seed);
  Json rows = Json::array();
  for (const auto& row : t.rows)
    rows.push_back({{"N", row.N}, {"mse", row.mse}, {"se", row.se}, {"N_times_mse", row.N * row.mse}});
  if (auto f = open_csv(ctx, "maurey.csv")) {
    *f << "N,mse,se\n";
    for (const auto& row : t.rows) *f << row.N << "," << row.mse << "," << row.se << "\n";
  }
  return {{{"rows", rows}, {"slope", t.slope}, {"intercept", t.intercept}, {"reference", t.reference},
           {"reference_samples", t.reference_samples}, {"reference_variance", t.reference_variance}}};
}

Outcome cmd_vpi(Context& ctx) {
  Json& cfg = ctx.config;
  const NeuralSdeModel m = model_of(cfg);
  if (!cfg.contains("pi")) cfg["pi"] = Json::object();
  const PiSampler pi = pi_from_json(cfg["pi"], m.system.dim());
  const int n_outer = value_or(cfg, "n_outer", 200);
  const int n_inner = value_or(cfg, "n_inner", 200);
  const bool illustrative = !cfg.contains("constants");
  if (illustrative) cfg["constants"] = {{"k2", 1.0}, {"c2", 1.0}};
  const double k2 = value_or(cfg["constants"], "k2", 1.0);
  const double c2 = value_or(cfg["constants"], "c2", 1.0);
  const McEstimate est = estimate_Vpi(m, pi, n_outer, n_inner, ctx.seed);

  double s_t = 0.0;
  std::string s_t_source;
  if (cfg.contains("s_t")) {
    s_t = cfg["s_t"].get<double>();
    s_t_source = "config";
  } else if (auto M = certified_M(m.system)) {
    s_t = s_t_bound(*M, m.T);
    s_t_source = "certified-M";
  } else {
    std::vector<Vec> probes;
    for (int i = 0; i < 16; ++i) probes.push_back(pi.sample(derive_seed(ctx.seed, stream::kProbe, static_cast<std::uint64_t>(i))));
    s_t = s_t_numeric(m.system, m.T, probes, default_flow_steps(m.T)).bound;
    s_t_source = "along-trajectory-M (uncertified)";
  }
  const int m2_samples = value_or(cfg, "m2_samples", 1000);
  const double m2 = flow_second_moment(m, pi, m2_samples, ctx.seed);
  Json r = {{"V_pi", mc_json(est)},
            {"bound", vpi_upper_bound(m, s_t, m2, k2, c2)},
            {"s_t", s_t},
            {"s_t_source", s_t_source},
            {"flow_second_moment", m2},
            {"illustrative_constants", illustrative}};
  if (const auto* lin = m.system.linear_params()) {
    const GramianResult g = gramian(*lin, m.T, default_gramian_steps(m.T));
    r["V_pi_closed_form"] = m.alpha.dot(g.W * m.alpha);
  }
  return {r};
}

Outcome cmd_density(Context& ctx) {
  Json& cfg = ctx.config;
  const NeuralSdeModel m = model_of(cfg);
  const Vec x = point(cfg, "x", m.system.dim());
  const long long n = value_or(cfg, "n_samples", 1000000LL);
  const int bins = value_or(cfg, "bins", 64);
  const Box box = box_from_json(require(cfg, "box"), m.system.dim());
  const DensityHistogram h = estimate_density(m, x, n, box, bins, ctx.seed);
  Json r = {{"mass", h.mass()}, {"outside", h.outside}, {"total", h.total}, {"warnings", h.warnings}};
  if (const auto* lin = m.system.linear_params()) {
    const GramianResult g = gramian(*lin, m.T, default_gramian_steps(m.T));
    r["l1_to_exact"] = l1_to_exact(h, [&](const Vec& y) { return exact_density_linear(g, x, y); });
  }
  if (auto f = open_csv(ctx, "density.csv")) {
    for (int a = 0; a < m.system.dim(); ++a) *f << "c_" << a + 1 << ",";
    *f << "count,density\n";
    for (std::size_t c = 0; c < h.counts.size(); ++c) {
      const Vec ctr = h.grid.center(c);
      for (int a = 0; a < m.system.dim(); ++a) *f << ctr[a] << ",";
      *f << h.counts[c] << "," << h.density[c] << "\n";
    }
  }
  return {r};
}

Outcome cmd_sheu(Context& ctx) {
  Json& cfg = ctx.config;
  const NeuralSdeModel m = model_of(cfg);
  const Vec x = point(cfg, "x", m.system.dim());
  const long long n = value_or(cfg, "n_samples", 1000000LL);
  SheuOptions so;
  so.bins = value_or(cfg, "bins", 64);
  so.K = value_or(cfg, "K", 100);
  so.solver = solver_options(cfg, ctx.seed);
  if (cfg.contains("box")) so.box = box_from_json(cfg["box"], m.system.dim());
  std::vector<Vec> probes;
  if (cfg.contains("probes")) {
    for (const auto& p : cfg["probes"]) probes.push_back(vec_from_json(p, "probes"));
  } else {
    probes = default_probes(m, x, value_or(cfg, "n_radii", 12), value_or(cfg, "n_dirs", 8), ctx.seed);
  }
  const SheuReport rep = sheu_sandwich_check(m, x, probes, n, ctx.seed, so);
  bool all_converged = true;
  Json pr = Json::array();
  for (const auto& p : rep.probes) {
    pr.push_back({{"y", to_json(p.y)}, {"log_density", p.log_density}, {"action", p.action},
                  {"residual", p.residual}, {"count", p.count}, {"converged", p.converged}});
    all_converged = all_converged && p.converged;
  }
  Json ex = Json::array();
  for (const Vec& y : rep.excluded) ex.push_back(to_json(y));
  if (auto f = open_csv(ctx, "sheu.csv")) {
    for (int a = 0; a < m.system.dim(); ++a) *f << "y_" << a + 1 << ",";
    *f << "log_p,I_T,residual\n";
    for (const auto& p : rep.probes) {
      for (int a = 0; a < m.system.dim(); ++a) *f << p.y[a] << ",";
      *f << p.log_density << "," << p.action << "," << p.residual << "\n";
    }
  }
  Outcome o{{{"slope_b", rep.slope}, {"intercept_a", rep.intercept},
             {"correlation_logp_vs_minus_I", rep.correlation}, {"probes", pr}, {"excluded", ex},
             {"histogram_warnings", rep.histogram.warnings}}};
  if (!all_converged) o.code = exit_code::kNotConverged;
  return o;
}

Outcome cmd_rnn_bounds(Context& ctx) {
  Json& cfg = ctx.config;
  const ControlAffineSystem sys = system_of(cfg);
  const RnnParams* p = sys.rnn_params();
  if (!p) throw ConfigError("rnn-bounds needs an rnn system");
  const double T = value_or(cfg, "T", 1.0);
  if (!cfg.contains("box")) cfg["box"] = {{"lo", -3.0}, {"hi", 3.0}};
  const Box box = box_from_json(cfg["box"], sys.dim());
  const int n = value_or(cfg, "n_samples", 2000);
  const double bound = gershgorin_M_bound(*p);
  return {{{"gershgorin_M_bound", bound},
           {"estimate_M", estimate_M(sys, box, n, ctx.seed)},
           {"lambda0", sys.ellipticity().lambda0},
           {"lambda1", sys.ellipticity().lambda1},
           {"s_t_bound", s_t_bound(bound, T)},
           {"s_t_bound_displayed_form", s_t_bound_displayed(bound, T)},
           {"drift_lipschitz_diagnostic", estimate_drift_lipschitz(sys, box, n, ctx.seed)}}};
}

// Linear-oracle equivalence suite on seeded instances.
Outcome cmd_selftest(Context& ctx) {
  Json& cfg = ctx.config;
  const int n_systems = value_or(cfg, "n_systems", 4);
  const int K = value_or(cfg, "K", 100);
  const long long N = value_or(cfg, "N", 20000LL);
  Json checks = Json::array();
  bool ok = true;
  auto record = [&](const std::string& name, double got, double want, double tol) {
    const bool pass = std::abs(got - want) <= tol;
    ok = ok && pass;
    checks.push_back({{"name", name}, {"value", got}, {"expected", want}, {"tolerance", tol}, {"pass", pass}});
  };

  for (int s = 0; s < n_systems; ++s) {
    SplitMix64 rng(derive_seed(ctx.seed, stream::kRepetition, static_cast<std::uint64_t>(s)));
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = 1 + s % 3;
    LinearParams p{Mat(d, d), Mat::Identity(d, d)};
    for (int i = 0; i < d * d; ++i) p.A.data()[i] = 0.6 * normal(rng);
    for (int i = 0; i < d; ++i) p.G(i, i) = 0.5 + std::abs(normal(rng));
    Vec x(d), y(d);
    for (int i = 0; i < d; ++i) {
      x[i] = normal(rng);
      y[i] = normal(rng);
    }
    const ControlAffineSystem sys = build_linear_system(p);
    const double exact = exact_action_linear(p, x, y, 1.0);
    const ActionCertificate c = solve_min_action(sys, x, y, 1.0, K);
    record("linear_action_" + std::to_string(s), c.value, exact, 0.01 * (1.0 + exact));

    NeuralSdeModel m{sys, Vec::Ones(d), 1.0, 200};
    const McEstimate f = estimate_F(m, x, N, derive_seed(ctx.seed, stream::kInner, static_cast<std::uint64_t>(s)));
    record("linear_F_" + std::to_string(s), f.mean, closed_form_F(m)(x), 4.0 * f.se);
  }
  {
    const LinearParams p{Mat::Constant(1, 1, 1.0), Mat::Identity(1, 1)};
    const GramianResult g = gramian(p, 1.0, 1000);
    record("scalar_gramian", g.W(0, 0), std::expm1(2.0) / 2.0, 1e-9);
  }

  if (auto f = open_csv(ctx, "selftest.csv")) {
    *f << "name,value,expected,tolerance,pass\n";
    for (const auto& c : checks)
      *f << c["name"].get<std::string>() << "," << c["value"].get<double>() << "," << c["expected"].get<double>()
         << "," << c["tolerance"].get<double>() << "," << (c["pass"].get<bool>() ? 1 : 0) << "\n";
  }
  return {{{"checks", checks}, {"all_passed", ok}}, ok ? exit_code::kOk : exit_code::kCheckFailed};
}

const std::map<std::string, std::pair<std::string, std::function<Outcome(Context&)>>>& commands() {
  static const std::map<std::string, std::pair<std::string, std::function<Outcome(Context&)>>> table = {
      {"action", {"minimum action certificate for a steering problem", cmd_action}},
      {"gramian", {"controllability Gramian, exact action and density (linear)", cmd_gramian}},
      {"flow", {"integrate the drift flow, optionally with its Jacobian", cmd_flow}},
      {"stability", {"S_T(f) numeric estimate, closed-form bound and Coppel check", cmd_stability}},
      {"simulate", {"Monte Carlo estimate of F(x)", cmd_simulate}},
      {"maurey", {"Monte Carlo approximation-rate experiment", cmd_maurey}},
      {"vpi", {"V_pi(F) estimate and upper bound", cmd_vpi}},
      {"density", {"histogram transition density", cmd_density}},
      {"sheu-check", {"log-density vs minimum action fit", cmd_sheu}},
      {"rnn-bounds", {"M(f) bounds for the stochastic RNN", cmd_rnn_bounds}},
      {"selftest", {"linear-oracle equivalence suite", cmd_selftest}},
  };
  return table;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minimum-action and neural-SDE toolkit", "nsde"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path, out_path, csv_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--out", out_path, "write the JSON summary here instead of stdout");
  auto* seed_opt = app.add_option("--seed", seed, "base RNG seed (overrides the config)");
  app.add_option("--threads", threads, "OpenMP thread count (default: NSDE_THREADS or OMP_NUM_THREADS)");
  app.add_option("--csv-dir", csv_dir, "directory for CSV outputs");

  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands()) subs[name] = app.add_subcommand(name, entry.first)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return exit_code::kConfig;
  }

  std::string name;
  for (const auto& [n, sub] : subs)
    if (sub->parsed()) name = n;

  try {
    Context ctx;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config " + config_path);
      try {
        ctx.config = Json::parse(in);
      } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
    } else {
      ctx.config = Json::object();
    }
    if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
    if (*seed_opt) ctx.config["seed"] = seed;
    ctx.seed = value_or(ctx.config, "seed", std::uint64_t{1});
    ctx.csv_dir = csv_dir;

    if (threads <= 0) {
      if (const char* env = std::getenv("NSDE_THREADS")) threads = std::atoi(env);
    }
    kernels::set_thread_count(threads);

    Outcome res = commands().at(name).second(ctx);

    Json envelope = {{"version", kVersion},
                     {"subcommand", name},
                     {"seed", ctx.seed},
                     {"threads", kernels::thread_count()},
                     {"config_hash", fnv1a_hex(ctx.config.dump())},
                     {"config", ctx.config},
                     {"result", res.result}};
    const std::string text = envelope.dump(2) + "\n";
    if (out_path.empty()) {
      out << text;
    } else {
      std::ofstream f(out_path);
      if (!f) throw ConfigError("cannot write " + out_path);
      f << text;
    }
    return res.code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::kConfig;
  } catch (const ExpressionError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::kConfig;
  } catch (const Json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::kConfig;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return exit_code::kNumeric;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    return exit_code::kNumeric;
  }
}

}  // namespace nsde
