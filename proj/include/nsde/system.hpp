#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "nsde/linalg.hpp"

namespace nsde {

/// Invalid model parameters or configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical failure: blow-up, singular matrix, non-finite state.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bounds λ₀ ≤ λ_min(g gᵀ) ≤ λ_max(g gᵀ) ≤ λ₁.
struct Ellipticity {
  double lambda0 = 1.0;
  double lambda1 = 1.0;
};

/// Scalar sigmoid with 0 ≤ σ′ ≤ gamma.
struct Sigmoid {
  std::string name;
  double gamma = 1.0;
  double (*value)(double) = nullptr;
  double (*slope)(double) = nullptr;
};

/// Looks up "tanh" (γ=1), "logistic" (γ=1/4), "atan" (γ=1) or
/// "softsign" (γ=1). Throws ConfigError for unknown names.
Sigmoid sigmoid_by_name(const std::string& name);

struct RnnParams {
  double tau = 1.0;
  Mat A;
  double c = 1.0;
  std::string sigmoid = "tanh";
  /// Slope bound; defaults to the registered sigmoid's γ.
  std::optional<double> gamma;

  double slope_bound() const;
};

struct LinearParams {
  Mat A;
  Mat G;
};

/// Axis-aligned box [lo, hi].
struct Box {
  Vec lo;
  Vec hi;

  static Box cube(int dim, double half_width);
  int dim() const { return static_cast<int>(lo.size()); }
};

/// Control-affine system ẋ = f(x) + g(x)u and its Itô counterpart
/// dX = f(X)dt + g(X)dW. Immutable after construction.
class ControlAffineSystem {
 public:
  enum class Kind { kLinear, kRnn, kCustom };

  using DriftFn = std::function<void(const Vec&, Vec&)>;
  using MatrixFn = std::function<void(const Vec&, Mat&)>;

  /// Generic system. `jacobian` may be empty, in which case central finite
  /// differences are used. `constant_diffusion`, when set, replaces
  /// `diffusion` and lets solvers skip its state derivative.
  static ControlAffineSystem custom(int dim, DriftFn drift, MatrixFn diffusion,
                                    MatrixFn jacobian, Ellipticity ellipticity,
                                    std::optional<Mat> constant_diffusion = std::nullopt);

  int dim() const { return dim_; }
  Kind kind() const { return kind_; }
  std::string kind_name() const;

  void drift(const Vec& x, Vec& out) const { drift_(x, out); }
  Vec drift(const Vec& x) const;

  void diffusion(const Vec& x, Mat& out) const;
  Mat diffusion(const Vec& x) const;
  bool has_constant_diffusion() const { return constant_g_.has_value(); }

  bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }
  void drift_jacobian(const Vec& x, Mat& out) const;
  Mat drift_jacobian(const Vec& x) const;
  Mat fd_drift_jacobian(const Vec& x) const;

  /// ∂(g(x)u)/∂x; zero for state-independent diffusion.
  Mat diffusion_action_jacobian(const Vec& x, const Vec& u) const;

  const Ellipticity& ellipticity() const { return ellipticity_; }
  ControlAffineSystem with_ellipticity(Ellipticity e) const;

  const LinearParams* linear_params() const { return linear_ ? &*linear_ : nullptr; }
  const RnnParams* rnn_params() const { return rnn_ ? &*rnn_ : nullptr; }

 private:
  friend ControlAffineSystem build_rnn_system(const RnnParams& p);
  friend ControlAffineSystem build_linear_system(const LinearParams& p);

  ControlAffineSystem() = default;

  int dim_ = 0;
  Kind kind_ = Kind::kCustom;
  DriftFn drift_;
  MatrixFn diffusion_;
  MatrixFn jacobian_;
  std::optional<Mat> constant_g_;
  Ellipticity ellipticity_;
  std::optional<LinearParams> linear_;
  std::optional<RnnParams> rnn_;
};

/// f(x) = −x/τ + A σ(x), g = c·I, λ₀ = λ₁ = c².
ControlAffineSystem build_rnn_system(const RnnParams& p);

/// f(x) = Ax, g = G, λ₀/λ₁ = extreme eigenvalues of GGᵀ.
ControlAffineSystem build_linear_system(const LinearParams& p);

/// Logarithmic norm for the spectral norm: λ_max((A + Aᵀ)/2).
double matrix_measure(const Mat& a);

/// Sampled lower estimate of M(f) = sup_x μ[f_*(x)] over `box`.
double estimate_M(const ControlAffineSystem& sys, const Box& box, int n_samples,
                  std::uint64_t seed);

/// Geršgorin upper bound on M(f) for the RNN family:
/// −1/τ + γ·max_i (max(A_ii, 0) + ½ Σ_{j≠i} (|A_ij| + |A_ji|)).
double gershgorin_M_bound(const RnnParams& p);

/// A certified upper bound on M(f) when the system family provides one
/// (exact for linear, Geršgorin for RNN); empty otherwise.
std::optional<double> certified_M(const ControlAffineSystem& sys);

struct EllipticityReport {
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  bool ok = false;
};

/// Samples λ_min/λ_max of g gᵀ over `box` and checks them against the
/// declared constants with slack `eps`.
EllipticityReport check_ellipticity(const ControlAffineSystem& sys, const Box& box,
                                    int n_samples, std::uint64_t seed, double eps = 1e-9);

/// Diagnostic only: max sampled spectral norm of f_* over `box`.
double estimate_drift_lipschitz(const ControlAffineSystem& sys, const Box& box,
                                int n_samples, std::uint64_t seed);

/// Uniform sample from `box` driven by `seed`.
Vec sample_box(const Box& box, std::uint64_t seed);

}  // namespace nsde
