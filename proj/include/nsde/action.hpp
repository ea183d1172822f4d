#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nsde/flow.hpp"
#include "nsde/system.hpp"

namespace nsde {

/// Piecewise-constant control on K uniform intervals of [0, T]; column k of
/// `u` is held on [t_k, t_{k+1}).
struct ControlGrid {
  double T = 1.0;
  Mat u;  // d × K

  int intervals() const { return static_cast<int>(u.cols()); }
  double dt() const { return T / intervals(); }
  /// ½ Σ_k |u_k|² Δ
  double cost() const { return 0.5 * u.squaredNorm() * dt(); }
  /// Same control on 2K intervals.
  ControlGrid refined() const;
};

struct SolverOptions {
  /// |x(T) − y| target; negative selects 1e-6·(1 + |y|).
  double endpoint_tol = -1.0;
  /// L-BFGS iteration cap per penalty stage.
  int max_iterations = 2000;
  double rho0 = 10.0;
  double rho_factor = 10.0;
  double rho_max = 1e10;
  /// RK4 substeps per control interval; 0 selects ceil(200·Δ).
  int steps_per_interval = 0;
  int lbfgs_memory = 12;
  /// Stationarity threshold on the gradient in the scaled variables √Δ·u.
  double gradient_tol = 1e-11;
  int n_restarts = 0;
  double restart_scale = 0.5;
  std::uint64_t seed = 0;
  /// Upper bound on S_T(f) for the lower bound; default is s_t_bound(M, T)
  /// with the certified M.
  std::optional<double> s_t;
  std::optional<ControlGrid> warm_start;
};

struct ActionCertificate {
  double value = 0.0;     ///< ½∫|u*|² of the best control found
  double upper = 0.0;     ///< feedback-linearization bound
  double lower = 0.0;     ///< variation-of-parameters bound
  double residual = 0.0;  ///< |x_u(T) − y|
  double endpoint_tol = 0.0;
  int iterations = 0;
  int stages = 0;
  double final_penalty = 0.0;
  bool converged = false;
  int best_restart = 0;
  double s_t_used = 0.0;
  double M = 0.0;
  bool lower_certified = false;
  int steps_per_interval = 1;
  ControlGrid control;
};

/// u_k = g(γ(t_k))⁻¹((y − x)/T − f(γ(t_k))) along γ(t) = x + (t/T)(y − x).
ControlGrid fbl_control(const ControlAffineSystem& sys, const Vec& x, const Vec& y, double T,
                        int K);

/// (1/2λ₀) ∫₀ᵀ |(y − x)/T − f(x + (t/T)(y − x))|² dt by composite Simpson.
double upper_bound_I(const ControlAffineSystem& sys, const Vec& x, const Vec& y, double T,
                     int quad_points = 1001);

/// |y − φ_T(x)|² / (2λ₁ s_t). Valid as a bound only when s_t ≥ S_T(f).
double lower_bound_I(const ControlAffineSystem& sys, const Vec& x, const Vec& y, double T,
                     double s_t);

/// RK4 of ẋ = f(x) + g(x)u with u held on each interval.
Trajectory rollout(const ControlAffineSystem& sys, const Vec& x, const ControlGrid& u,
                   int steps_per_interval);

struct PenaltyValue {
  double value = 0.0;  ///< J_ρ = cost + (ρ/2)|x(T) − y|²
  double cost = 0.0;
  Vec endpoint;
  Mat gradient;  ///< ∂J_ρ/∂u, d × K, by the discrete adjoint of RK4
};

PenaltyValue penalty_objective(const ControlAffineSystem& sys, const Vec& x, const Vec& y,
                               const ControlGrid& u, double rho, int steps_per_interval,
                               bool with_gradient = true);

int default_steps_per_interval(double T, int K);

/// Direct-transcription estimate of I_T(x, y) with both bounds attached.
ActionCertificate solve_min_action(const ControlAffineSystem& sys, const Vec& x, const Vec& y,
                                   double T, int K, const SolverOptions& opts = {});

}  // namespace nsde
