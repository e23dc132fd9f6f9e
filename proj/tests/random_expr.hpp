#pragma once

#include "sode/expr.hpp"

#include <random>
#include <string>
#include <vector>

namespace testing {

// Random expression trees over the given symbols.
class ExprGen {
 public:
  ExprGen(std::vector<std::string> symbols, std::uint64_t seed) : symbols_(std::move(symbols)), rng_(seed) {}

  sode::Expression polynomial(int depth) {
    if (depth == 0 || pick(4) == 0) return leaf();
    switch (pick(3)) {
      case 0: return polynomial(depth - 1) + polynomial(depth - 1);
      case 1: return polynomial(depth - 1) * polynomial(depth - 1);
      default: return sode::Expression::power(polynomial(depth - 1), static_cast<long long>(pick(3) + 1));
    }
  }

  // Rational and transcendental nodes; denominators are kept away from zero.
  sode::Expression general(int depth) {
    if (depth == 0 || pick(5) == 0) return leaf();
    switch (pick(7)) {
      case 0: return general(depth - 1) + general(depth - 1);
      case 1: return general(depth - 1) * general(depth - 1);
      case 2: return general(depth - 1) / (sode::Expression(2) + square(general(depth - 1)));
      case 3: return sode::Expression::function(sode::FunctionKind::Sin, general(depth - 1));
      case 4: return sode::Expression::function(sode::FunctionKind::Cos, general(depth - 1));
      case 5: return sode::Expression::function(sode::FunctionKind::Exp, polynomial(1) * sode::Expression(sode::Rational(1, 4)));
      default: return sode::Expression::power(sode::Expression(1) + square(general(depth - 1)), sode::Rational(1, 2));
    }
  }

  std::vector<double> point(double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> p(symbols_.size());
    for (auto& v : p) v = u(rng_);
    return p;
  }

  sode::Expression leaf() {
    if (pick(3) == 0) return sode::Expression(sode::Rational(static_cast<long long>(pick(7)) - 3, static_cast<long long>(pick(3)) + 1));
    return sode::Expression::symbol(symbols_[pick(symbols_.size())]);
  }

 private:
  static sode::Expression square(const sode::Expression& e) { return e * e; }
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  std::vector<std::string> symbols_;
  std::mt19937_64 rng_;
};

inline sode::Assignment assign(const std::vector<std::string>& names, const std::vector<double>& p) {
  sode::Assignment a;
  for (std::size_t i = 0; i < names.size(); ++i) a[names[i]] = p[i];
  return a;
}

}  // namespace testing
