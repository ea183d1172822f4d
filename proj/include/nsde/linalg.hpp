#pragma once

#include <Eigen/Dense>

namespace nsde {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Eigenvalues of the symmetric part (A + Aᵀ)/2, ascending.
Vec symmetric_eigenvalues(const Mat& a);

/// Largest eigenvalue of a symmetric matrix (only the lower triangle is read).
double lambda_max_symmetric(const Mat& s);
double lambda_min_symmetric(const Mat& s);

/// Spectral norm ‖A‖₂ computed as sqrt(λ_max(AᵀA)).
double spectral_norm(const Mat& a);

/// Condition number of a symmetric positive-definite matrix.
double spd_condition(const Mat& s);

bool all_finite(const Vec& v);
bool all_finite(const Mat& m);

}  // namespace nsde
