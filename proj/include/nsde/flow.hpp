#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "nsde/system.hpp"

namespace nsde {

/// Uniform-grid trajectory t_k = k·h, k = 0..K. `states` is d × (K+1);
/// `jacobians`, when present, holds Λ_k with Λ_0 = I.
struct Trajectory {
  double step = 0.0;
  Mat states;
  std::vector<Mat> jacobians;

  int size() const { return static_cast<int>(states.cols()); }
  double time(int k) const { return k * step; }
  Vec endpoint() const { return states.col(states.cols() - 1); }
  bool has_jacobians() const { return !jacobians.empty(); }

  /// CSV with header t,x_1..x_d[,L_1_1..L_d_d] (Λ row-major).
  void write_csv(std::ostream& os) const;
};

/// Classical RK4 integration of ẋ = f(x). Throws NumericError on blow-up.
Trajectory flow(const ControlAffineSystem& sys, const Vec& x, double T, int steps);

/// Co-integrates x and the variational equation Λ̇ = f_*(x)Λ, Λ(0) = I.
Trajectory flow_jacobian(const ControlAffineSystem& sys, const Vec& x, double T, int steps);

/// (e^{2MT} − 1)/(2M), or T at M = 0.
double s_t_bound(double M, double T);

/// The displayed variant e^{2 max(M,0) T}/(2|M|), or T at M = 0. Reported
/// alongside s_t_bound; never used to certify anything.
double s_t_bound_displayed(double M, double T);

struct StabilityEstimate {
  double numeric = 0.0;  ///< probe-restricted S_T, a lower estimate
  double bound = 0.0;    ///< s_t_bound(M, T)
  double displayed_bound = 0.0;
  double M = 0.0;
  bool M_certified = false;
  std::string method;  ///< "certified" | "sampled-sup" | "along-trajectory"
};

/// S_T(f) = ∫₀ᵀ max_probe ‖(φ_{T−t})_*(x̄)‖² dt by the trapezoid rule. The
/// bound fields use the certified M when the system family has one, else
/// the largest μ[f_*] seen along the probe trajectories.
StabilityEstimate s_t_numeric(const ControlAffineSystem& sys, double T,
                              const std::vector<Vec>& probes, int steps);

/// Same, with an explicit M supplied by the caller.
StabilityEstimate s_t_numeric(const ControlAffineSystem& sys, double T,
                              const std::vector<Vec>& probes, int steps, double M,
                              bool M_certified, std::string method);

struct CoppelReport {
  /// max over grid of ‖Λ(t)‖ − exp(∫₀ᵗ μ[f_*(φ_s)] ds), clipped at 0
  double max_violation_integral = 0.0;
  /// max over grid of ‖Λ(t)‖ − e^{Mt}, clipped at 0
  double max_violation_uniform = 0.0;
  /// same, divided by the bound value
  double max_relative_violation_integral = 0.0;
  double max_relative_violation_uniform = 0.0;
  std::vector<double> norms;
};

CoppelReport coppel_check(const ControlAffineSystem& sys, const Vec& x, double T, int steps,
                          double M);

/// Latin-hypercube samples in `box` (n points).
std::vector<Vec> latin_hypercube(const Box& box, int n, std::uint64_t seed);

}  // namespace nsde
