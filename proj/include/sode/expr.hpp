#pragma once

#include "sode/number.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sode {

class Expression;

namespace detail {
class RatFunc;
struct Node;
const Node& node_of(const Expression& e);
Expression make_expression(std::shared_ptr<const Node> node);
}  // namespace detail

enum class FunctionKind { Exp, Log, Sin, Cos };

std::string_view function_name(FunctionKind kind);

/// Immutable symbolic scalar over the coordinates of a chart.
///
/// An Expression is a shared tree of nodes. Construction never simplifies
/// beyond trivial flattening; `normalize` produces the canonical spelling.
/// Values are cheap to copy and safe to share between threads.
class Expression {
 public:
  enum class Kind { Constant, Symbol, Sum, Product, Power, Quotient, Function };

  /// The constant 0.
  Expression();
  Expression(long long n);  // NOLINT(google-explicit-constructor)
  Expression(const Number& n);  // NOLINT(google-explicit-constructor)

  static Expression constant(const Number& n);
  static Expression real(double d);
  static Expression symbol(std::string name);
  static Expression sum(std::vector<Expression> terms);
  static Expression product(std::vector<Expression> factors);
  static Expression power(Expression base, const Rational& exponent);
  static Expression quotient(Expression numerator, Expression denominator);
  static Expression function(FunctionKind kind, Expression argument);

  Kind kind() const;
  /// Constant payload; only valid for Kind::Constant.
  const Number& number() const;
  /// Symbol name; only valid for Kind::Symbol.
  const std::string& name() const;
  /// Operands of Sum/Product, {num, den} of Quotient, {base} of Power, {arg} of Function.
  const std::vector<Expression>& children() const;
  /// Exponent; only valid for Kind::Power.
  const Rational& exponent() const;
  /// Only valid for Kind::Function.
  FunctionKind function_kind() const;

  bool is_constant() const { return kind() == Kind::Constant; }
  bool is_literal_zero() const;
  bool is_literal_one() const;
  std::uint64_t hash() const;
  /// Number of nodes in the tree.
  std::size_t size() const;

  friend bool operator==(const Expression& a, const Expression& b);
  friend bool operator!=(const Expression& a, const Expression& b) { return !(a == b); }

  friend Expression operator+(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a, const Expression& b);
  friend Expression operator*(const Expression& a, const Expression& b);
  friend Expression operator/(const Expression& a, const Expression& b);
  Expression operator-() const;

 private:
  friend const detail::Node& detail::node_of(const Expression& e);
  friend Expression detail::make_expression(std::shared_ptr<const detail::Node> node);
  explicit Expression(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const detail::Node> node_;
};

/// Total structural order; used to sort operands and atoms canonically.
int compare(const Expression& a, const Expression& b);

/// Parses the infix grammar: + - * / ^, parentheses, calls exp/log/sin/cos
/// (and sqrt as sugar for ^(1/2)), identifiers, integer/decimal literals.
/// Exponents must be rational constants. Throws ParseError.
Expression parse(std::string_view text);

/// Grammar spelling; parse(to_string(e)) evaluates identically to e.
std::string to_string(const Expression& e);

/// Canonical form: polynomial parts expanded and collected over an ordered
/// set of atoms (symbols and transcendental calls), rational parts kept as
/// numerator over a product of monic denominator factors with common
/// factors cancelled. Idempotent.
Expression normalize(const Expression& e);

/// Exact partial derivative with respect to `symbol`, normalized.
Expression differentiate(const Expression& e, std::string_view symbol);

/// Replaces every occurrence of `symbol` by `value`, normalized.
Expression substitute(const Expression& e, std::string_view symbol, const Expression& value);

std::set<std::string> free_symbols(const Expression& e);

using Assignment = std::map<std::string, double, std::less<>>;

/// IEEE evaluation. Throws MissingSymbolError or DomainError.
double evaluate(const Expression& e, const Assignment& values);

/// Flattened evaluator over a fixed ordering of variables; much faster than
/// `evaluate` for repeated numeric use (flows, sampling).
class CompiledExpression {
 public:
  CompiledExpression() = default;
  CompiledExpression(const Expression& e, std::span<const std::string> variables);

  /// Throws DomainError (message names the offending subtree).
  double operator()(std::span<const double> point) const;
  /// Non-throwing variant: returns false on a domain error.
  bool try_eval(std::span<const double> point, double& out) const;

 private:
  struct Op {
    enum Code : std::uint8_t { Const, Var, Add, Mul, Div, PowInt, PowRat, Exp, Log, Sin, Cos } code;
    std::uint32_t arg = 0;  // variable index, operand count, or subtree index
    double value = 0.0;     // constant or exponent
    long long ipow = 0;     // integer exponent, or numerator of a rational one
    long long root = 1;     // denominator of a rational exponent
  };
  std::vector<Op> program_;
  std::vector<Expression> subtrees_;  // spelled only when an error is raised
  std::size_t max_stack_ = 0;
  bool run(std::span<const double> point, double& out, std::uint32_t& failed) const;
};

}  // namespace sode
