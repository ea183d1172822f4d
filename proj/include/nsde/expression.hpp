#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nsde {

class ExpressionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A compiled scalar arithmetic expression over the state variables
/// x1..xd. Grammar: numbers, x<i>, pi, e, + - * / ^, unary minus,
/// parentheses, and the functions sin cos tan exp log sqrt tanh abs
/// logistic atan.
class Expression {
 public:
  /// Parses `source` for a state of dimension `dim`. Throws ExpressionError
  /// on syntax errors or out-of-range variables.
  static Expression parse(std::string_view source, int dim);
  static Expression constant(double value);

  double eval(std::span<const double> x) const;

  const std::string& source() const { return source_; }

  struct Node;

 private:
  Expression(std::string source, std::shared_ptr<const Node> root)
      : source_(std::move(source)), root_(std::move(root)) {}

  std::string source_;
  std::shared_ptr<const Node> root_;
};

}  // namespace nsde
