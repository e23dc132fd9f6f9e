#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <string>
#include <variant>

namespace sode {

using Rational = boost::multiprecision::cpp_rational;

/// Scalar coefficient: an exact rational, or an inexact double once a float
/// literal has entered the computation. Exactness is contagious downwards:
/// exact op exact stays exact, anything touching a double becomes a double.
class Number {
 public:
  Number() : value_(Rational(0)) {}
  Number(const Rational& q) : value_(q) {}  // NOLINT(google-explicit-constructor)
  Number(long long n) : value_(Rational(n)) {}  // NOLINT(google-explicit-constructor)
  static Number real(double d) { return Number(Tag{}, d); }

  bool is_exact() const { return std::holds_alternative<Rational>(value_); }
  const Rational& exact() const { return std::get<Rational>(value_); }
  double inexact() const { return std::get<double>(value_); }

  bool is_zero() const;
  bool is_one() const;
  bool is_negative() const;
  bool is_integer() const;
  double to_double() const;

  Number operator-() const;
  friend Number operator+(const Number& a, const Number& b);
  friend Number operator-(const Number& a, const Number& b);
  friend Number operator*(const Number& a, const Number& b);
  /// Throws DomainError on division by an exact zero.
  friend Number operator/(const Number& a, const Number& b);
  Number& operator+=(const Number& b) { return *this = *this + b; }
  Number& operator*=(const Number& b) { return *this = *this * b; }

  /// Total order: exact values sort before inexact ones, then by value.
  friend int compare(const Number& a, const Number& b);
  friend bool operator==(const Number& a, const Number& b) { return compare(a, b) == 0; }

  std::size_t hash() const;
  /// Grammar spelling, e.g. "3", "-2/7", "0.10000000000000001".
  std::string to_string() const;

 private:
  struct Tag {};
  Number(Tag, double d) : value_(d) {}
  std::variant<Rational, double> value_;
};

Number pow(const Number& base, long long exponent);

}  // namespace sode
