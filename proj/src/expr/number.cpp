#include "sode/number.hpp"

#include "sode/errors.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

namespace sode {

bool Number::is_zero() const {
  return is_exact() ? exact() == 0 : inexact() == 0.0;
}

bool Number::is_one() const {
  return is_exact() ? exact() == 1 : inexact() == 1.0;
}

bool Number::is_negative() const {
  return is_exact() ? exact() < 0 : inexact() < 0.0;
}

bool Number::is_integer() const {
  return is_exact() && boost::multiprecision::denominator(exact()) == 1;
}

double Number::to_double() const {
  return is_exact() ? exact().convert_to<double>() : inexact();
}

Number Number::operator-() const {
  if (is_exact()) return Number(Rational(-exact()));
  return real(-inexact());
}

Number operator+(const Number& a, const Number& b) {
  if (a.is_exact() && b.is_exact()) return Number(Rational(a.exact() + b.exact()));
  return Number::real(a.to_double() + b.to_double());
}

Number operator-(const Number& a, const Number& b) {
  if (a.is_exact() && b.is_exact()) return Number(Rational(a.exact() - b.exact()));
  return Number::real(a.to_double() - b.to_double());
}

Number operator*(const Number& a, const Number& b) {
  if (a.is_exact() && b.is_exact()) return Number(Rational(a.exact() * b.exact()));
  return Number::real(a.to_double() * b.to_double());
}

Number operator/(const Number& a, const Number& b) {
  if (b.is_zero()) throw DomainError("division by zero", a.to_string() + "/" + b.to_string());
  if (a.is_exact() && b.is_exact()) return Number(Rational(a.exact() / b.exact()));
  return Number::real(a.to_double() / b.to_double());
}

int compare(const Number& a, const Number& b) {
  if (a.is_exact() != b.is_exact()) return a.is_exact() ? -1 : 1;
  if (a.is_exact()) {
    if (a.exact() < b.exact()) return -1;
    return a.exact() > b.exact() ? 1 : 0;
  }
  if (a.inexact() < b.inexact()) return -1;
  return a.inexact() > b.inexact() ? 1 : 0;
}

std::size_t Number::hash() const {
  if (!is_exact()) return std::hash<double>{}(inexact()) ^ 0x9e3779b97f4a7c15ULL;
  // Stable across runs: hash the decimal spelling.
  std::size_t h = 1469598103934665603ULL;
  for (char c : to_string()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string Number::to_string() const {
  if (is_exact()) {
    const auto& q = exact();
    auto num = boost::multiprecision::numerator(q);
    auto den = boost::multiprecision::denominator(q);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", inexact());
  std::string s(buf);
  // Keep the spelling recognisably real so it re-parses as a float literal.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

Number pow(const Number& base, long long exponent) {
  if (exponent < 0) return Number(1) / pow(base, -exponent);
  if (!base.is_exact()) return Number::real(std::pow(base.inexact(), static_cast<double>(exponent)));
  Number result(1);
  Number b = base;
  while (exponent > 0) {
    if (exponent & 1) result *= b;
    b *= b;
    exponent >>= 1;
  }
  return result;
}

}  // namespace sode
