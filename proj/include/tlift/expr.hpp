#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tlift/error.hpp"
#include "tlift/jet.hpp"

namespace tlift {

// Grammar (whitespace ignored between tokens):
//
//   expr    = term { ("+" | "-") term } ;
//   term    = unary { ("*" | "/") unary } ;
//   unary   = "-" unary | "+" unary | power ;
//   power   = primary [ "^" unary ] ;            (right-associative)
//   primary = number | identifier | function "(" expr ")" | "(" expr ")" ;
//   number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//   function = "sin" | "cos" | "tan" | "exp" | "log" | "sqrt"
//            | "sinh" | "cosh" | "tanh" ;
//
// Identifiers resolve, in order, to: a coordinate variable `x<k>` (k < n), a
// declared coordinate name, a declared constant, or the built-in `pi`.
// Constants are substituted by their value at parse time.

enum class Op {
  Literal,
  Variable,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Neg,
  Sin,
  Cos,
  Tan,
  Exp,
  Log,
  Sqrt,
  Sinh,
  Cosh,
  Tanh,
};

struct ExprNode {
  Op op = Op::Literal;
  double literal = 0.0;       // Op::Literal, always >= 0
  std::size_t variable = 0;   // Op::Variable
  std::shared_ptr<const ExprNode> lhs;  // unary operand or left operand
  std::shared_ptr<const ExprNode> rhs;
};

/// Names visible to the parser besides `x0..x(n-1)`.
struct SymbolTable {
  std::size_t dimension = 0;
  std::vector<std::string> coordinate_names;
  std::map<std::string, double> constants;
};

/// Immutable scalar expression in the coordinates of an n-dimensional chart.
class Expression {
 public:
  using NodePtr = std::shared_ptr<const ExprNode>;

  Expression() = default;
  Expression(std::size_t dimension, NodePtr root) : dim_(dimension), root_(std::move(root)) {}

  /// Literal value; negative values are stored as Neg(|c|) so that every
  /// literal in a tree is non-negative and serialization round-trips.
  static Expression constant(std::size_t dimension, double c) {
    if (!std::isfinite(c)) throw DomainError("non-finite constant");
    auto lit = std::make_shared<ExprNode>();
    lit->op = Op::Literal;
    lit->literal = c < 0.0 ? -c : (c == 0.0 ? 0.0 : c);
    if (c < 0.0) return Expression(dimension, unary_node(Op::Neg, lit));
    return Expression(dimension, lit);
  }

  static Expression variable(std::size_t dimension, std::size_t index) {
    if (index >= dimension) throw std::out_of_range("variable index out of range");
    auto node = std::make_shared<ExprNode>();
    node->op = Op::Variable;
    node->variable = index;
    return Expression(dimension, node);
  }

  std::size_t dimension() const noexcept { return dim_; }
  const NodePtr& root() const noexcept { return root_; }
  bool empty() const noexcept { return root_ == nullptr; }

  /// True when the tree references no coordinate variable.
  bool is_constant() const { return root_ && !references_variables(*root_); }

  double evaluate(std::span<const double> x) const;
  Jet2 evaluate_jet(std::span<const double> x) const;

  /// Fully parenthesized text that parses back to an identical tree.
  std::string to_string() const;

  friend bool operator==(const Expression& a, const Expression& b) {
    if (a.dim_ != b.dim_) return false;
    if (!a.root_ || !b.root_) return a.root_ == b.root_;
    return same_tree(*a.root_, *b.root_);
  }

  friend Expression operator+(const Expression& a, const Expression& b) { return binary(Op::Add, a, b); }
  friend Expression operator-(const Expression& a, const Expression& b) { return binary(Op::Sub, a, b); }
  friend Expression operator*(const Expression& a, const Expression& b) { return binary(Op::Mul, a, b); }
  friend Expression operator/(const Expression& a, const Expression& b) { return binary(Op::Div, a, b); }
  friend Expression operator-(const Expression& a) { return Expression(a.dim_, unary_node(Op::Neg, a.root_)); }
  friend Expression operator*(double s, const Expression& a) { return constant(a.dim_, s) * a; }

  static NodePtr unary_node(Op op, NodePtr operand) {
    auto node = std::make_shared<ExprNode>();
    node->op = op;
    node->lhs = std::move(operand);
    return node;
  }

  static NodePtr binary_node(Op op, NodePtr l, NodePtr r) {
    auto node = std::make_shared<ExprNode>();
    node->op = op;
    node->lhs = std::move(l);
    node->rhs = std::move(r);
    return node;
  }

 private:
  static Expression binary(Op op, const Expression& a, const Expression& b) {
    if (a.dim_ != b.dim_) throw std::invalid_argument("expression dimensions differ");
    return Expression(a.dim_, binary_node(op, a.root_, b.root_));
  }

  static bool references_variables(const ExprNode& n) {
    if (n.op == Op::Variable) return true;
    if (n.lhs && references_variables(*n.lhs)) return true;
    return n.rhs && references_variables(*n.rhs);
  }

  static bool same_tree(const ExprNode& a, const ExprNode& b) {
    if (a.op != b.op) return false;
    if (a.op == Op::Literal) return a.literal == b.literal;
    if (a.op == Op::Variable) return a.variable == b.variable;
    if (static_cast<bool>(a.lhs) != static_cast<bool>(b.lhs)) return false;
    if (static_cast<bool>(a.rhs) != static_cast<bool>(b.rhs)) return false;
    if (a.lhs && !same_tree(*a.lhs, *b.lhs)) return false;
    return !a.rhs || same_tree(*a.rhs, *b.rhs);
  }

  std::size_t dim_ = 0;
  NodePtr root_;
};

namespace detail {

inline const char* function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tan: return "tan";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Sinh: return "sinh";
    case Op::Cosh: return "cosh";
    case Op::Tanh: return "tanh";
    default: return nullptr;
  }
}

inline std::optional<Op> function_op(std::string_view name) {
  static const std::pair<std::string_view, Op> table[] = {
      {"sin", Op::Sin},   {"cos", Op::Cos},   {"tan", Op::Tan},   {"exp", Op::Exp},   {"log", Op::Log},
      {"sqrt", Op::Sqrt}, {"sinh", Op::Sinh}, {"cosh", Op::Cosh}, {"tanh", Op::Tanh},
  };
  for (const auto& [n, op] : table)
    if (n == name) return op;
  return std::nullopt;
}

/// Integral exponent of moderate size, evaluated exactly by repeated products.
inline std::optional<long> integer_exponent(double value) {
  if (std::floor(value) != value || std::abs(value) > 1024.0) return std::nullopt;
  return static_cast<long>(value);
}

inline double pow_int(double u, long k) {
  if (k < 0) {
    const double d = pow_int(u, -k);
    if (d == 0.0) throw DomainError("division by zero");
    return 1.0 / d;
  }
  double result = 1.0, base = u;
  bool first = true;
  while (k > 0) {
    if (k & 1) {
      result = first ? base : result * base;
      first = false;
    }
    k >>= 1;
    if (k > 0) base = base * base;
  }
  return result;
}

inline bool has_variables(const ExprNode& n) {
  if (n.op == Op::Variable) return true;
  if (n.lhs && has_variables(*n.lhs)) return true;
  return n.rhs && has_variables(*n.rhs);
}

inline double eval_node(const ExprNode& n, std::span<const double> x) {
  switch (n.op) {
    case Op::Literal: return n.literal;
    case Op::Variable: return x[n.variable];
    case Op::Add: return eval_node(*n.lhs, x) + eval_node(*n.rhs, x);
    case Op::Sub: return eval_node(*n.lhs, x) - eval_node(*n.rhs, x);
    case Op::Mul: return eval_node(*n.lhs, x) * eval_node(*n.rhs, x);
    case Op::Div: {
      const double d = eval_node(*n.rhs, x);
      if (d == 0.0) throw DomainError("division by zero");
      return eval_node(*n.lhs, x) / d;
    }
    case Op::Pow: {
      const double base = eval_node(*n.lhs, x);
      const double ex = eval_node(*n.rhs, x);
      if (!has_variables(*n.rhs)) {
        if (auto k = integer_exponent(ex)) return pow_int(base, *k);
      }
      if (!(base > 0.0)) throw DomainError("non-integer power of non-positive base");
      return std::pow(base, ex);
    }
    case Op::Neg: return -eval_node(*n.lhs, x);
    case Op::Sin: return std::sin(eval_node(*n.lhs, x));
    case Op::Cos: return std::cos(eval_node(*n.lhs, x));
    case Op::Tan: return std::tan(eval_node(*n.lhs, x));
    case Op::Exp: return std::exp(eval_node(*n.lhs, x));
    case Op::Log: {
      const double u = eval_node(*n.lhs, x);
      if (!(u > 0.0)) throw DomainError("log of non-positive value " + std::to_string(u));
      return std::log(u);
    }
    case Op::Sqrt: {
      const double u = eval_node(*n.lhs, x);
      if (!(u > 0.0)) throw DomainError("sqrt of non-positive value " + std::to_string(u));
      return std::sqrt(u);
    }
    case Op::Sinh: return std::sinh(eval_node(*n.lhs, x));
    case Op::Cosh: return std::cosh(eval_node(*n.lhs, x));
    case Op::Tanh: return std::tanh(eval_node(*n.lhs, x));
  }
  return 0.0;
}

inline Jet2 jet_node(const ExprNode& n, std::span<const double> x, std::size_t dim) {
  switch (n.op) {
    case Op::Literal: return Jet2::constant(dim, n.literal);
    case Op::Variable: return Jet2::variable(dim, n.variable, x[n.variable]);
    case Op::Add: return jet_node(*n.lhs, x, dim) + jet_node(*n.rhs, x, dim);
    case Op::Sub: return jet_node(*n.lhs, x, dim) - jet_node(*n.rhs, x, dim);
    case Op::Mul: return jet_node(*n.lhs, x, dim) * jet_node(*n.rhs, x, dim);
    case Op::Div: return jet_node(*n.lhs, x, dim) / jet_node(*n.rhs, x, dim);
    case Op::Pow: {
      const Jet2 base = jet_node(*n.lhs, x, dim);
      if (!has_variables(*n.rhs)) {
        const double ex = eval_node(*n.rhs, x);
        if (auto k = integer_exponent(ex)) return tlift::pow_int(base, *k);
        return pow_real(base, ex);
      }
      const Jet2 ex = jet_node(*n.rhs, x, dim);
      return tlift::exp(ex * tlift::log(base));
    }
    case Op::Neg: return -jet_node(*n.lhs, x, dim);
    case Op::Sin: return tlift::sin(jet_node(*n.lhs, x, dim));
    case Op::Cos: return tlift::cos(jet_node(*n.lhs, x, dim));
    case Op::Tan: return tlift::tan(jet_node(*n.lhs, x, dim));
    case Op::Exp: return tlift::exp(jet_node(*n.lhs, x, dim));
    case Op::Log: return tlift::log(jet_node(*n.lhs, x, dim));
    case Op::Sqrt: return tlift::sqrt(jet_node(*n.lhs, x, dim));
    case Op::Sinh: return tlift::sinh(jet_node(*n.lhs, x, dim));
    case Op::Cosh: return tlift::cosh(jet_node(*n.lhs, x, dim));
    case Op::Tanh: return tlift::tanh(jet_node(*n.lhs, x, dim));
  }
  return Jet2(dim);
}

inline std::string format_literal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void serialize(const ExprNode& n, std::string& out) {
  switch (n.op) {
    case Op::Literal: out += format_literal(n.literal); return;
    case Op::Variable: out += "x" + std::to_string(n.variable); return;
    case Op::Neg:
      out += "(-";
      serialize(*n.lhs, out);
      out += ")";
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Pow: {
      static constexpr char symbols[] = {'+', '-', '*', '/', '^'};
      out += "(";
      serialize(*n.lhs, out);
      out += symbols[static_cast<int>(n.op) - static_cast<int>(Op::Add)];
      serialize(*n.rhs, out);
      out += ")";
      return;
    }
    default:
      out += function_name(n.op);
      out += "(";
      serialize(*n.lhs, out);
      out += ")";
      return;
  }
}

class Parser {
 public:
  Parser(std::string_view text, const SymbolTable& symbols) : text_(text), symbols_(symbols) {}

  Expression::NodePtr parse_all() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    auto root = parse_expr();
    skip_space();
    if (pos_ < text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return root;
  }

 private:
  using NodePtr = Expression::NodePtr;

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = Expression::binary_node(Op::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = Expression::binary_node(Op::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expression::binary_node(Op::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = Expression::binary_node(Op::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return Expression::unary_node(Op::Neg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (accept('^')) return Expression::binary_node(Op::Pow, base, parse_unary());
    return base;
  }

  NodePtr literal(double v) {
    auto node = std::make_shared<ExprNode>();
    node->op = Op::Literal;
    node->literal = v;
    return node;
  }

  NodePtr constant_node(double v) {
    // Negative constants become Neg(|v|) to keep literals non-negative.
    if (v < 0.0) return Expression::unary_node(Op::Neg, literal(-v));
    return literal(v);
  }

  NodePtr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = parse_expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t k = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_, ++k;
      return k;
    };
    std::size_t count = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      count += digits();
    }
    if (count == 0) throw ParseError("malformed number", start);
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = save;
    }
    double value = 0.0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc() || !std::isfinite(value)) throw ParseError("malformed number", start);
    return literal(value);
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);

    if (auto op = function_op(name)) {
      if (!accept('(')) throw ParseError("expected '(' after " + std::string(name), pos_);
      NodePtr arg = parse_expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return Expression::unary_node(*op, arg);
    }
    if (name.size() > 1 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string_view::npos) {
      std::size_t index = 0;
      std::from_chars(name.data() + 1, name.data() + name.size(), index);
      if (index >= symbols_.dimension)
        throw ParseError("variable index out of range: " + std::string(name), start);
      return variable(index);
    }
    for (std::size_t i = 0; i < symbols_.coordinate_names.size(); ++i)
      if (symbols_.coordinate_names[i] == name) return variable(i);
    if (auto it = symbols_.constants.find(std::string(name)); it != symbols_.constants.end())
      return constant_node(it->second);
    if (name == "pi") return literal(3.141592653589793238462643383279502884);
    throw ParseError("unknown identifier '" + std::string(name) + "'", start);
  }

  NodePtr variable(std::size_t index) {
    auto node = std::make_shared<ExprNode>();
    node->op = Op::Variable;
    node->variable = index;
    return node;
  }

  std::string_view text_;
  const SymbolTable& symbols_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline double Expression::evaluate(std::span<const double> x) const {
  if (!root_) throw std::logic_error("evaluating an empty expression");
  const double v = detail::eval_node(*root_, x);
  if (!std::isfinite(v)) throw DomainError("expression evaluated to a non-finite value");
  return v;
}

inline Jet2 Expression::evaluate_jet(std::span<const double> x) const {
  if (!root_) throw std::logic_error("evaluating an empty expression");
  Jet2 j = detail::jet_node(*root_, x, dim_);
  if (!std::isfinite(j.value)) throw DomainError("expression evaluated to a non-finite value");
  return j;
}

inline std::string Expression::to_string() const {
  std::string out;
  if (root_) detail::serialize(*root_, out);
  return out;
}

inline Expression parse(std::string_view text, const SymbolTable& symbols) {
  detail::Parser parser(text, symbols);
  return Expression(symbols.dimension, parser.parse_all());
}

inline Expression parse(std::string_view text, std::size_t dimension) {
  SymbolTable symbols;
  symbols.dimension = dimension;
  return parse(text, symbols);
}

/// Value, gradient and Hessian of `e` at `x`, exact to roundoff.
inline Jet2 eval_jet2(const Expression& e, std::span<const double> x) { return e.evaluate_jet(x); }

}  // namespace tlift
