#include "sode/errors.hpp"
#include "sode/expr.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace sode {

namespace {

double ipow(double x, long long k) {
  double result = 1.0;
  double base = x;
  unsigned long long n = static_cast<unsigned long long>(k < 0 ? -k : k);
  while (n) {
    if (n & 1ULL) result *= base;
    n >>= 1;
    if (n) base *= base;
  }
  return k < 0 ? 1.0 / result : result;
}

}  // namespace

CompiledExpression::CompiledExpression(const Expression& e, std::span<const std::string> variables) {
  std::size_t depth = 0;
  auto emit = [&](Op op, std::size_t popped) {
    program_.push_back(op);
    depth = depth - popped + 1;
    max_stack_ = std::max(max_stack_, depth);
  };
  auto error_slot = [&](const Expression& sub) {
    subtrees_.push_back(sub);
    return static_cast<std::uint32_t>(subtrees_.size() - 1);
  };
  auto rec = [&](auto&& self, const Expression& x) -> void {
    switch (x.kind()) {
      case Expression::Kind::Constant: emit({Op::Const, 0, x.number().to_double()}, 0); return;
      case Expression::Kind::Symbol: {
        auto it = std::find(variables.begin(), variables.end(), x.name());
        if (it == variables.end()) throw MissingSymbolError(x.name());
        emit({Op::Var, static_cast<std::uint32_t>(it - variables.begin())}, 0);
        return;
      }
      case Expression::Kind::Sum:
      case Expression::Kind::Product: {
        for (const auto& c : x.children()) self(self, c);
        auto n = x.children().size();
        emit({x.kind() == Expression::Kind::Sum ? Op::Add : Op::Mul, static_cast<std::uint32_t>(n)}, n);
        return;
      }
      case Expression::Kind::Quotient:
        self(self, x.children()[0]);
        self(self, x.children()[1]);
        emit({Op::Div, error_slot(x)}, 2);
        return;
      case Expression::Kind::Power: {
        self(self, x.children()[0]);
        const Rational& r = x.exponent();
        Op op{Op::PowInt, error_slot(x)};
        op.ipow = boost::multiprecision::numerator(r).convert_to<long long>();
        op.root = boost::multiprecision::denominator(r).convert_to<long long>();
        if (op.root != 1) {
          op.code = Op::PowRat;
          op.value = r.convert_to<double>();
        }
        emit(op, 1);
        return;
      }
      case Expression::Kind::Function: {
        self(self, x.children()[0]);
        Op::Code code = Op::Exp;
        switch (x.function_kind()) {
          case FunctionKind::Exp: code = Op::Exp; break;
          case FunctionKind::Log: code = Op::Log; break;
          case FunctionKind::Sin: code = Op::Sin; break;
          case FunctionKind::Cos: code = Op::Cos; break;
        }
        emit({code, error_slot(x)}, 1);
        return;
      }
    }
  };
  rec(rec, e);
}

bool CompiledExpression::run(std::span<const double> point, double& out, std::uint32_t& failed) const {
  std::array<double, 64> small{};
  std::vector<double> large;
  double* stack = small.data();
  if (max_stack_ > small.size()) {
    large.resize(max_stack_);
    stack = large.data();
  }
  std::size_t sp = 0;
  for (const Op& op : program_) {
    switch (op.code) {
      case Op::Const: stack[sp++] = op.value; break;
      case Op::Var: stack[sp++] = point[op.arg]; break;
      case Op::Add: {
        double acc = 0.0;
        for (std::size_t i = sp - op.arg; i < sp; ++i) acc += stack[i];
        sp -= op.arg;
        stack[sp++] = acc;
        break;
      }
      case Op::Mul: {
        double acc = 1.0;
        for (std::size_t i = sp - op.arg; i < sp; ++i) acc *= stack[i];
        sp -= op.arg;
        stack[sp++] = acc;
        break;
      }
      case Op::Div: {
        double d = stack[--sp];
        if (d == 0.0) {
          failed = op.arg;
          return false;
        }
        stack[sp - 1] /= d;
        break;
      }
      case Op::PowInt: {
        double& b = stack[sp - 1];
        if (b == 0.0 && op.ipow < 0) {
          failed = op.arg;
          return false;
        }
        b = ipow(b, op.ipow);
        break;
      }
      case Op::PowRat: {
        double& b = stack[sp - 1];
        if ((b < 0.0 && op.root % 2 == 0) || (b == 0.0 && op.ipow < 0)) {
          failed = op.arg;
          return false;
        }
        double mag = std::pow(std::abs(b), op.value);
        b = (b < 0.0 && op.ipow % 2 != 0) ? -mag : mag;
        break;
      }
      case Op::Exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
      case Op::Log:
        if (!(stack[sp - 1] > 0.0)) {
          failed = op.arg;
          return false;
        }
        stack[sp - 1] = std::log(stack[sp - 1]);
        break;
      case Op::Sin: stack[sp - 1] = std::sin(stack[sp - 1]); break;
      case Op::Cos: stack[sp - 1] = std::cos(stack[sp - 1]); break;
    }
  }
  out = sp ? stack[0] : 0.0;
  return true;
}

bool CompiledExpression::try_eval(std::span<const double> point, double& out) const {
  std::uint32_t failed = 0;
  return run(point, out, failed);
}

double CompiledExpression::operator()(std::span<const double> point) const {
  double out = 0.0;
  std::uint32_t failed = 0;
  if (!run(point, out, failed)) {
    const Expression& sub = subtrees_[failed];
    const char* what = "domain error";
    switch (sub.kind()) {
      case Expression::Kind::Quotient: what = "division by zero"; break;
      case Expression::Kind::Power: what = "power outside its domain"; break;
      case Expression::Kind::Function: what = "log of nonpositive value"; break;
      default: break;
    }
    throw DomainError(what, to_string(sub));
  }
  return out;
}

double evaluate(const Expression& e, const Assignment& values) {
  std::vector<std::string> names;
  std::vector<double> point;
  for (const auto& s : free_symbols(e)) {
    auto it = values.find(s);
    if (it == values.end()) throw MissingSymbolError(s);
    names.push_back(s);
    point.push_back(it->second);
  }
  return CompiledExpression(e, names)(point);
}

}  // namespace sode
