#include "nsde/linalg.hpp"

#include <cmath>
#include <limits>

namespace nsde {

namespace {

Vec eigenvalues_of_symmetric(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(s, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

}  // namespace

Vec symmetric_eigenvalues(const Mat& a) {
  const Mat sym = 0.5 * (a + a.transpose());
  return eigenvalues_of_symmetric(sym);
}

double lambda_max_symmetric(const Mat& s) {
  if (s.rows() == 1) return s(0, 0);
  return eigenvalues_of_symmetric(s).maxCoeff();
}

double lambda_min_symmetric(const Mat& s) {
  if (s.rows() == 1) return s(0, 0);
  return eigenvalues_of_symmetric(s).minCoeff();
}

double spectral_norm(const Mat& a) {
  if (a.size() == 1) return std::abs(a(0, 0));
  const Mat gram = a.transpose() * a;
  return std::sqrt(std::max(0.0, lambda_max_symmetric(gram)));
}

double spd_condition(const Mat& s) {
  const Vec ev = eigenvalues_of_symmetric(s);
  const double lo = ev.minCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / lo;
}

bool all_finite(const Vec& v) { return v.allFinite(); }
bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace nsde
