#include "nsde/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

namespace nsde {

struct Expression::Node {
  enum class Kind { kConst, kVar, kNeg, kAdd, kSub, kMul, kDiv, kPow, kCall };
  enum class Fn { kSin, kCos, kTan, kExp, kLog, kSqrt, kTanh, kAbs, kLogistic, kAtan };

  Kind kind = Kind::kConst;
  double value = 0.0;
  int var = 0;
  Fn fn = Fn::kSin;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;

  double eval(std::span<const double> x) const {
    switch (kind) {
      case Kind::kConst: return value;
      case Kind::kVar: return x[static_cast<std::size_t>(var)];
      case Kind::kNeg: return -lhs->eval(x);
      case Kind::kAdd: return lhs->eval(x) + rhs->eval(x);
      case Kind::kSub: return lhs->eval(x) - rhs->eval(x);
      case Kind::kMul: return lhs->eval(x) * rhs->eval(x);
      case Kind::kDiv: return lhs->eval(x) / rhs->eval(x);
      case Kind::kPow: return std::pow(lhs->eval(x), rhs->eval(x));
      case Kind::kCall: return call(lhs->eval(x));
    }
    return 0.0;
  }

  double call(double a) const {
    switch (fn) {
      case Fn::kSin: return std::sin(a);
      case Fn::kCos: return std::cos(a);
      case Fn::kTan: return std::tan(a);
      case Fn::kExp: return std::exp(a);
      case Fn::kLog: return std::log(a);
      case Fn::kSqrt: return std::sqrt(a);
      case Fn::kTanh: return std::tanh(a);
      case Fn::kAbs: return std::abs(a);
      case Fn::kLogistic: return 1.0 / (1.0 + std::exp(-a));
      case Fn::kAtan: return std::atan(a);
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

class Parser {
 public:
  Parser(std::string_view src, int dim) : src_(src), dim_(dim) {}

  NodePtr parse() {
    NodePtr root = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ExpressionError("expression '" + std::string(src_) + "': " + what +
                          " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr binary(Node::Kind k, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  NodePtr parse_sum() {
    NodePtr lhs = parse_product();
    for (;;) {
      if (accept('+')) lhs = binary(Node::Kind::kAdd, lhs, parse_product());
      else if (accept('-')) lhs = binary(Node::Kind::kSub, lhs, parse_product());
      else return lhs;
    }
  }

  NodePtr parse_product() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) lhs = binary(Node::Kind::kMul, lhs, parse_unary());
      else if (accept('/')) lhs = binary(Node::Kind::kDiv, lhs, parse_unary());
      else return lhs;
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::kNeg;
      n->lhs = parse_unary();
      return n;
    }
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  // Right-associative; binds tighter than unary minus on its left operand.
  NodePtr parse_power() {
    NodePtr base = parse_atom();
    if (accept('^')) return binary(Node::Kind::kPow, base, parse_unary());
    return base;
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = parse_sum();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr parse_number() {
    const std::string rest(src_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      fail("malformed number");
    }
    pos_ += used;
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::kConst;
    n->value = v;
    return n;
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string name(src_.substr(start, pos_ - start));

    auto n = std::make_shared<Node>();
    if (name == "pi") {
      n->value = std::numbers::pi;
      return n;
    }
    if (name == "e") {
      n->value = std::numbers::e;
      return n;
    }
    if (name.size() >= 2 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int idx = std::stoi(name.substr(1));
      if (idx < 1 || idx > dim_) fail("variable " + name + " outside x1..x" + std::to_string(dim_));
      n->kind = Node::Kind::kVar;
      n->var = idx - 1;
      return n;
    }

    static const std::vector<std::pair<std::string, Node::Fn>> kFns = {
        {"sin", Node::Fn::kSin},   {"cos", Node::Fn::kCos},   {"tan", Node::Fn::kTan},
        {"exp", Node::Fn::kExp},   {"log", Node::Fn::kLog},   {"sqrt", Node::Fn::kSqrt},
        {"tanh", Node::Fn::kTanh}, {"abs", Node::Fn::kAbs},   {"logistic", Node::Fn::kLogistic},
        {"atan", Node::Fn::kAtan}};
    for (const auto& [fname, fn] : kFns) {
      if (fname == name) {
        if (!accept('(')) fail("expected '(' after " + name);
        n->kind = Node::Kind::kCall;
        n->fn = fn;
        n->lhs = parse_sum();
        if (!accept(')')) fail("expected ')'");
        return n;
      }
    }
    fail("unknown identifier '" + name + "'");
  }

  std::string_view src_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view source, int dim) {
  Parser p(source, dim);
  return Expression(std::string(source), p.parse());
}

Expression Expression::constant(double value) {
  auto n = std::make_shared<Node>();
  n->value = value;
  return Expression(std::to_string(value), n);
}

double Expression::eval(std::span<const double> x) const { return root_->eval(x); }

}  // namespace nsde
