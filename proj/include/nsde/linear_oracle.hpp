#pragma once

#include "nsde/system.hpp"

namespace nsde {

struct GramianResult {
  Mat W;        ///< controllability Gramian W(T)
  Mat exp_TA;   ///< e^{TA}
  double condition = 0.0;
};

/// Integrates Ẇ = AW + WAᵀ + GGᵀ, W(0) = 0, and Φ̇ = AΦ, Φ(0) = I with RK4,
/// symmetrizing W after every step.
GramianResult gramian(const LinearParams& p, double T, int steps);

/// Default step count for gramian(): 1000 per unit time, at least 100.
int default_gramian_steps(double T);

/// W(T) with condition number above this is flagged near-singular.
inline constexpr double kGramianConditionLimit = 1e12;

/// ½⟨y − e^{TA}x, W⁻¹(y − e^{TA}x)⟩ given a precomputed Gramian.
double exact_action_linear(const GramianResult& g, const Vec& x, const Vec& y);
double exact_action_linear(const LinearParams& p, const Vec& x, const Vec& y, double T);

/// Normalized Gaussian density N(y; e^{TA}x, W(T)).
double exact_density_linear(const GramianResult& g, const Vec& x, const Vec& y);
double exact_density_linear(const LinearParams& p, const Vec& x, const Vec& y, double T);

/// −½ log((2π)^d det W).
double log_density_normalizer(const GramianResult& g);

/// Minimum-energy control u*(t) = Gᵀ e^{(T−t)Aᵀ} W(T)⁻¹ (y − e^{TA}x).
/// e^{(T−t)A} is obtained by RK4 on Φ̇ = AΦ with the same per-unit step
/// density as `gramian`.
Vec exact_optimal_control(const LinearParams& p, const GramianResult& g, const Vec& x,
                          const Vec& y, double T, double t);

/// e^{tA} via RK4 with `steps` steps.
Mat expm_rk4(const Mat& A, double t, int steps);

}  // namespace nsde
