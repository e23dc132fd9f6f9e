#pragma once

#include "node.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace sode::detail {

// Atoms are normalized Symbol, Function, or root Power(base, 1/q) nodes.
using Atom = Expression;

struct Monomial {
  std::vector<std::pair<Atom, int>> factors;  // ascending atom order, exponents > 0
  int degree = 0;

  bool is_one() const { return factors.empty(); }
};

/// Graded-lexicographic order; returns <0, 0, >0.
int compare(const Monomial& a, const Monomial& b);
Monomial operator*(const Monomial& a, const Monomial& b);
/// a / b if b divides a.
std::optional<Monomial> divide(const Monomial& a, const Monomial& b);

struct Term {
  Monomial mono;
  Number coef;
};

/// Sparse multivariate polynomial over atoms; terms sorted by descending monomial.
class Poly {
 public:
  Poly() = default;
  static Poly constant(const Number& c);
  static Poly atom(const Atom& a, int exponent = 1);
  static Poly from_terms(std::vector<Term> terms);  // sorts and combines

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_[0].mono.is_one()); }
  Number constant_value() const { return terms_.empty() ? Number(0) : terms_[0].coef; }
  bool is_exact() const;
  const Term& leading() const { return terms_.front(); }

  friend Poly operator+(const Poly& a, const Poly& b);
  friend Poly operator-(const Poly& a, const Poly& b);
  friend Poly operator*(const Poly& a, const Poly& b);
  Poly operator-() const;
  Poly scaled(const Number& c) const;
  Poly times(const Monomial& m) const;
  Poly pow(int k) const;

  /// Exact quotient when `d` divides this polynomial, otherwise nullopt.
  std::optional<Poly> exact_divide(const Poly& d) const;

  friend int compare(const Poly& a, const Poly& b);
  friend bool operator==(const Poly& a, const Poly& b) { return compare(a, b) == 0; }

 private:
  std::vector<Term> terms_;
};

struct DenFactor {
  Poly poly;  // monic; a bare atom or a content-free polynomial
  int exp = 1;
};

/// Canonical rational function: numerator over a product of distinct monic
/// denominator factors, none of which divides the numerator.
class RatFunc {
 public:
  RatFunc() = default;
  explicit RatFunc(Poly num) : num_(std::move(num)) {}
  static RatFunc constant(const Number& c) { return RatFunc(Poly::constant(c)); }
  static RatFunc atom(const Atom& a) { return RatFunc(Poly::atom(a)); }

  const Poly& num() const { return num_; }
  const std::vector<DenFactor>& den() const { return den_; }
  bool is_zero() const { return num_.is_zero(); }
  bool is_polynomial() const { return den_.empty(); }
  bool is_constant() const { return den_.empty() && num_.is_constant(); }

  friend RatFunc operator+(const RatFunc& a, const RatFunc& b);
  friend RatFunc operator-(const RatFunc& a, const RatFunc& b);
  friend RatFunc operator*(const RatFunc& a, const RatFunc& b);
  RatFunc operator-() const;
  /// Throws DomainError when the numerator is identically zero.
  RatFunc inverse() const;
  RatFunc pow(int k) const;
  RatFunc derivative(std::string_view symbol) const;

  /// Canonical tree spelling (carries this form for O(1) re-normalization).
  Expression to_expression() const;
  /// Expanded product of the denominator factors.
  Poly den_product() const;

 private:
  RatFunc(Poly num, std::vector<DenFactor> den);
  void cancel();
  void reduce_roots();
  Poly num_;
  std::vector<DenFactor> den_;
};

/// Converts any tree to its canonical form.
RatFunc to_ratfunc(const Expression& e);
RatFunc make_function(FunctionKind kind, const RatFunc& arg);
RatFunc make_power(const RatFunc& base, const Rational& exponent);

Expression monomial_to_expression(const Monomial& m);
Expression poly_to_expression(const Poly& p);

}  // namespace sode::detail
