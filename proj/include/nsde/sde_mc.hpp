#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nsde/system.hpp"

namespace nsde {

/// dX = f dt + g dW on [0, T] with readout ⟨α, X_T⟩, simulated by
/// Euler–Maruyama with L steps.
struct NeuralSdeModel {
  ControlAffineSystem system;
  Vec alpha;
  double T = 1.0;
  int L = 100;

  void validate() const;
};

struct McEstimate {
  double mean = 0.0;
  double variance = 0.0;  ///< unbiased sample variance
  long long n = 0;
  std::uint64_t seed = 0;
  double se = 0.0;  ///< sqrt(variance / n)
};

/// Distribution π of initial conditions.
class PiSampler {
 public:
  static PiSampler gaussian(Vec mean, Vec stddev);
  static PiSampler uniform(Box box);

  Vec sample(std::uint64_t seed) const;
  int dim() const { return static_cast<int>(a_.size()); }
  std::string kind() const { return gaussian_ ? "gaussian" : "uniform"; }
  const Vec& first() const { return a_; }   ///< mean or lower corner
  const Vec& second() const { return b_; }  ///< stddev or upper corner

 private:
  PiSampler(bool gaussian, Vec a, Vec b) : gaussian_(gaussian), a_(std::move(a)), b_(std::move(b)) {}
  bool gaussian_;
  Vec a_;
  Vec b_;
};

/// One endpoint sample X_T; a deterministic function of (model, x, seed).
Vec em_endpoint(const NeuralSdeModel& model, const Vec& x, std::uint64_t seed);

/// F̂_N(x) = N⁻¹ Σ ⟨α, X_T^{x,i}⟩ over seeds derived from `seed`.
McEstimate estimate_F(const NeuralSdeModel& model, const Vec& x, long long N, std::uint64_t seed);

/// Outer average over x ~ π of the inner unbiased variance of ⟨α, X_T⟩.
/// `variance`/`se` describe the spread of the inner variances.
McEstimate estimate_Vpi(const NeuralSdeModel& model, const PiSampler& pi, int n_outer,
                        int n_inner, std::uint64_t seed);

struct MaureyRow {
  long long N = 0;
  double mse = 0.0;
  double se = 0.0;
};

struct MaureyTable {
  std::vector<MaureyRow> rows;
  double slope = 0.0;
  double intercept = 0.0;
  std::string reference;  ///< "closed-form" or "pilot"
  long long reference_samples = 0;
  /// mean over the x-set of the pilot variance var/N_ref (0 for closed form)
  double reference_variance = 0.0;
  std::vector<Vec> points;
};

using ReferenceF = std::function<double(const Vec&)>;

/// Closed-form F(x) = ⟨α, e^{TA}x⟩ for linear systems; empty otherwise.
ReferenceF closed_form_F(const NeuralSdeModel& model);

/// Monte Carlo estimate of E‖F − F̂_N‖²_{L²(π)} for every N in `N_list`,
/// using `n_x` points drawn once from π and `reps` independent repetitions.
/// When `reference` is empty and no closed form exists, a pilot estimate
/// with 64·max(N) samples per point is used.
MaureyTable maurey_rate_experiment(const NeuralSdeModel& model, const PiSampler& pi,
                                   const std::vector<long long>& N_list, int reps, int n_x,
                                   std::uint64_t seed, ReferenceF reference = {});

/// Least-squares slope and intercept of log(mse) against log(N).
std::pair<double, double> loglog_fit(const std::vector<MaureyRow>& rows);

/// ∫|φ_T(x)|² π(dx) by n samples.
double flow_second_moment(const NeuralSdeModel& model, const PiSampler& pi, int n,
                          std::uint64_t seed, int flow_steps = 0);

/// k₂|α|² (λ₁ S/(c₂ λ₀ T))^{d/2} (λ₁ d S / c₂ + m₂), with S an upper bound
/// on S_T(f) and m₂ = ∫|φ_T|² dπ.
double vpi_upper_bound(const NeuralSdeModel& model, double s_t, double flow_second_moment,
                       double k2, double c2);

}  // namespace nsde
