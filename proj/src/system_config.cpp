#include "nsde/system_config.hpp"

#include <memory>
#include <vector>

#include "nsde/expression.hpp"

namespace nsde {

namespace {

double number(const Json& j, const char* what) {
  if (!j.is_number()) throw ConfigError(std::string(what) + " must be a number");
  return j.get<double>();
}

/// Entry of a custom matrix: a number or an expression string.
Expression entry_expression(const Json& j, int dim) {
  if (j.is_number()) return Expression::constant(j.get<double>());
  if (j.is_string()) return Expression::parse(j.get<std::string>(), dim);
  throw ConfigError("matrix entries must be numbers or expression strings");
}

std::vector<std::vector<Expression>> expression_matrix(const Json& j, int dim, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ConfigError(std::string(what) + " must be a " + std::to_string(dim) + "x" + std::to_string(dim) + " array");
  std::vector<std::vector<Expression>> m;
  for (const auto& row : j) {
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw ConfigError(std::string(what) + " rows must have " + std::to_string(dim) + " entries");
    std::vector<Expression> r;
    for (const auto& e : row) r.push_back(entry_expression(e, dim));
    m.push_back(std::move(r));
  }
  return m;
}

bool all_numeric(const Json& j) {
  for (const auto& row : j)
    for (const auto& e : row)
      if (!e.is_number()) return false;
  return true;
}

ControlAffineSystem custom_from_json(Json& j) {
  if (!j.contains("dimension")) throw ConfigError("custom-expression system needs 'dimension'");
  const int d = j.at("dimension").get<int>();
  if (d < 1) throw ConfigError("dimension must be positive");
  if (!j.contains("drift") || !j["drift"].is_array() || static_cast<int>(j["drift"].size()) != d)
    throw ConfigError("'drift' must list one expression per state component");
  if (!j.contains("diffusion")) throw ConfigError("custom-expression system needs 'diffusion'");

  auto drift_exprs = std::make_shared<std::vector<Expression>>();
  for (const auto& e : j["drift"]) drift_exprs->push_back(entry_expression(e, d));
  ControlAffineSystem::DriftFn drift = [drift_exprs](const Vec& x, Vec& out) {
    const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    for (std::size_t i = 0; i < drift_exprs->size(); ++i) out[static_cast<Eigen::Index>(i)] = (*drift_exprs)[i].eval(xs);
  };

  auto matrix_fn = [](std::shared_ptr<std::vector<std::vector<Expression>>> m) {
    return ControlAffineSystem::MatrixFn([m](const Vec& x, Mat& out) {
      const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
      for (std::size_t i = 0; i < m->size(); ++i)
        for (std::size_t k = 0; k < (*m)[i].size(); ++k)
          out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (*m)[i][k].eval(xs);
    });
  };

  std::optional<Mat> constant_g;
  ControlAffineSystem::MatrixFn diffusion;
  if (all_numeric(j["diffusion"])) {
    constant_g = mat_from_json(j["diffusion"], "diffusion");
    if (constant_g->rows() != d || constant_g->cols() != d) throw ConfigError("diffusion must be d x d");
  } else {
    diffusion = matrix_fn(std::make_shared<std::vector<std::vector<Expression>>>(
        expression_matrix(j["diffusion"], d, "diffusion")));
  }

  ControlAffineSystem::MatrixFn jacobian;
  if (j.contains("jacobian"))
    jacobian = matrix_fn(std::make_shared<std::vector<std::vector<Expression>>>(
        expression_matrix(j["jacobian"], d, "jacobian")));

  if (j.contains("ellipticity")) {
    const Ellipticity e{number(j["ellipticity"].at("lambda0"), "lambda0"),
                        number(j["ellipticity"].at("lambda1"), "lambda1")};
    return ControlAffineSystem::custom(d, drift, diffusion, jacobian, e, constant_g);
  }

  // Provisional constants, then replace them with sampled extremes.
  const ControlAffineSystem provisional =
      ControlAffineSystem::custom(d, drift, diffusion, jacobian, {1.0, 1.0}, constant_g);
  if (!j.contains("ellipticity_box")) j["ellipticity_box"] = {{"lo", std::vector<double>(d, -5.0)},
                                                             {"hi", std::vector<double>(d, 5.0)}};
  const Box box = box_from_json(j["ellipticity_box"], d);
  const EllipticityReport r = check_ellipticity(provisional, box, 2000, 0);
  if (!(r.min_eigenvalue > 0.0)) throw ConfigError("diffusion is not uniformly elliptic on the sampled box");
  j["ellipticity"] = {{"lambda0", r.min_eigenvalue}, {"lambda1", r.max_eigenvalue}, {"sampled", true}};
  return provisional.with_ellipticity({r.min_eigenvalue, r.max_eigenvalue});
}

}  // namespace

Vec vec_from_json(const Json& j, const char* what) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], what);
  return v;
}

Mat mat_from_json(const Json& j, const char* what) {
  if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(std::string(what) + " must be a nested (row-major) array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(std::string(what) + " has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], what);
  }
  return m;
}

Json to_json(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_json(const Mat& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

Box box_from_json(const Json& j, int dim) {
  Box b{vec_from_json(j.at("lo"), "box.lo"), vec_from_json(j.at("hi"), "box.hi")};
  if (b.lo.size() == 1 && dim > 1) b.lo = Vec::Constant(dim, b.lo[0]);
  if (b.hi.size() == 1 && dim > 1) b.hi = Vec::Constant(dim, b.hi[0]);
  if (b.dim() != dim || b.hi.size() != dim) throw ConfigError("box dimension mismatch");
  if ((b.hi.array() < b.lo.array()).any()) throw ConfigError("box is empty");
  return b;
}

PiSampler pi_from_json(Json& j, int dim) {
  if (!j.contains("kind")) j["kind"] = "gaussian";
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "gaussian") {
    if (!j.contains("mean")) j["mean"] = std::vector<double>(dim, 0.0);
    if (!j.contains("std")) j["std"] = std::vector<double>(dim, 1.0);
    Vec mean = vec_from_json(j["mean"], "pi.mean");
    Vec sd = vec_from_json(j["std"], "pi.std");
    if (sd.size() == 1 && dim > 1) sd = Vec::Constant(dim, sd[0]);
    if (mean.size() != dim || sd.size() != dim) throw ConfigError("pi dimension mismatch");
    return PiSampler::gaussian(mean, sd);
  }
  if (kind == "uniform") return PiSampler::uniform(box_from_json(j, dim));
  throw ConfigError("pi.kind must be 'gaussian' or 'uniform'");
}

ControlAffineSystem system_from_json(Json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("system needs a 'kind'");
  const std::string kind = j["kind"].get<std::string>();
  ControlAffineSystem sys = [&]() {
    if (kind == "linear") {
      return build_linear_system({mat_from_json(j.at("A"), "A"), mat_from_json(j.at("G"), "G")});
    }
    if (kind == "rnn") {
      RnnParams p;
      p.tau = number(j.at("tau"), "tau");
      p.A = mat_from_json(j.at("A"), "A");
      p.c = number(j.at("c"), "c");
      if (!j.contains("sigmoid")) j["sigmoid"] = "tanh";
      p.sigmoid = j["sigmoid"].get<std::string>();
      if (j.contains("gamma")) p.gamma = number(j["gamma"], "gamma");
      else j["gamma"] = sigmoid_by_name(p.sigmoid).gamma;
      return build_rnn_system(p);
    }
    if (kind == "custom-expression") return custom_from_json(j);
    throw ConfigError("unknown system kind '" + kind + "'");
  }();
  if (kind != "custom-expression" && j.contains("ellipticity")) {
    sys = sys.with_ellipticity({number(j["ellipticity"].at("lambda0"), "lambda0"),
                                number(j["ellipticity"].at("lambda1"), "lambda1")});
  }
  return sys;
}

}  // namespace nsde
