#include "sode/expr.hpp"

#include "node.hpp"
#include "ratfunc.hpp"
#include "sode/errors.hpp"

#include <algorithm>
#include <cassert>

namespace sode {

namespace detail {

const Node& node_of(const Expression& e) { return *e.node_; }

Expression make_expression(std::shared_ptr<const Node> node) { return Expression(std::move(node)); }

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::uint64_t string_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::uint64_t symbol_bit(std::string_view name) { return 1ULL << (string_hash(name) % 64); }

std::shared_ptr<Node> new_node(Expression::Kind kind) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  return n;
}

Expression finish(std::shared_ptr<Node> n) {
  std::uint64_t h = static_cast<std::uint64_t>(n->kind) * 0x100000001b3ULL + 7;
  std::size_t size = 1;
  std::uint64_t mask = 0;
  switch (n->kind) {
    case Expression::Kind::Constant: h = mix(h, n->number.hash()); break;
    case Expression::Kind::Symbol:
      h = mix(h, string_hash(n->name));
      mask = symbol_bit(n->name);
      break;
    case Expression::Kind::Power: h = mix(h, Number(n->exponent).hash()); break;
    case Expression::Kind::Function: h = mix(h, static_cast<std::uint64_t>(n->function) + 17); break;
    default: break;
  }
  for (const auto& c : n->children) {
    const Node& cn = node_of(c);
    h = mix(h, cn.hash);
    size += cn.size;
    mask |= cn.symbol_mask;
  }
  n->hash = h;
  n->size = size;
  n->symbol_mask = mask;
  return make_expression(std::move(n));
}

bool depends_on(const Expression& e, std::string_view symbol) {
  const Node& n = node_of(e);
  if ((n.symbol_mask & symbol_bit(symbol)) == 0) return false;
  if (n.kind == Expression::Kind::Symbol) return n.name == symbol;
  return std::any_of(n.children.begin(), n.children.end(),
                     [&](const Expression& c) { return depends_on(c, symbol); });
}

}  // namespace detail

using detail::finish;
using detail::new_node;
using detail::node_of;

std::string_view function_name(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::Exp: return "exp";
    case FunctionKind::Log: return "log";
    case FunctionKind::Sin: return "sin";
    case FunctionKind::Cos: return "cos";
  }
  return "?";
}

Expression::Expression() : Expression(Number(0)) {}

Expression::Expression(long long n) : Expression(Number(n)) {}

Expression::Expression(const Number& n) {
  auto node = new_node(Kind::Constant);
  node->number = n;
  *this = finish(std::move(node));
}

Expression Expression::constant(const Number& n) { return Expression(n); }

Expression Expression::real(double d) { return Expression(Number::real(d)); }

Expression Expression::symbol(std::string name) {
  auto node = new_node(Kind::Symbol);
  node->name = std::move(name);
  return finish(std::move(node));
}

Expression Expression::sum(std::vector<Expression> terms) {
  if (terms.empty()) return Expression(0);
  if (terms.size() == 1) return terms.front();
  auto node = new_node(Kind::Sum);
  for (auto& t : terms) {
    if (t.kind() == Kind::Sum) {
      for (const auto& c : t.children()) node->children.push_back(c);
    } else {
      node->children.push_back(std::move(t));
    }
  }
  return finish(std::move(node));
}

Expression Expression::product(std::vector<Expression> factors) {
  if (factors.empty()) return Expression(1);
  if (factors.size() == 1) return factors.front();
  auto node = new_node(Kind::Product);
  for (auto& f : factors) {
    if (f.kind() == Kind::Product) {
      for (const auto& c : f.children()) node->children.push_back(c);
    } else {
      node->children.push_back(std::move(f));
    }
  }
  return finish(std::move(node));
}

Expression Expression::power(Expression base, const Rational& exponent) {
  auto node = new_node(Kind::Power);
  node->children.push_back(std::move(base));
  node->exponent = exponent;
  return finish(std::move(node));
}

Expression Expression::quotient(Expression numerator, Expression denominator) {
  auto node = new_node(Kind::Quotient);
  node->children.push_back(std::move(numerator));
  node->children.push_back(std::move(denominator));
  return finish(std::move(node));
}

Expression Expression::function(FunctionKind kind, Expression argument) {
  auto node = new_node(Kind::Function);
  node->function = kind;
  node->children.push_back(std::move(argument));
  return finish(std::move(node));
}

Expression::Kind Expression::kind() const { return node_->kind; }
const Number& Expression::number() const { return node_->number; }
const std::string& Expression::name() const { return node_->name; }
const std::vector<Expression>& Expression::children() const { return node_->children; }
const Rational& Expression::exponent() const { return node_->exponent; }
FunctionKind Expression::function_kind() const { return node_->function; }
std::uint64_t Expression::hash() const { return node_->hash; }
std::size_t Expression::size() const { return node_->size; }

bool Expression::is_literal_zero() const { return kind() == Kind::Constant && number().is_zero(); }
bool Expression::is_literal_one() const { return kind() == Kind::Constant && number().is_one(); }

namespace {

int kind_rank(Expression::Kind k) {
  switch (k) {
    case Expression::Kind::Constant: return 0;
    case Expression::Kind::Symbol: return 1;
    case Expression::Kind::Function: return 2;
    case Expression::Kind::Power: return 3;
    case Expression::Kind::Product: return 4;
    case Expression::Kind::Sum: return 5;
    case Expression::Kind::Quotient: return 6;
  }
  return 7;
}

}  // namespace

int compare(const Expression& a, const Expression& b) {
  const auto& na = node_of(a);
  const auto& nb = node_of(b);
  if (&na == &nb) return 0;
  if (na.kind != nb.kind) return kind_rank(na.kind) < kind_rank(nb.kind) ? -1 : 1;
  switch (na.kind) {
    case Expression::Kind::Constant: return compare(na.number, nb.number);
    case Expression::Kind::Symbol: {
      int c = na.name.compare(nb.name);
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case Expression::Kind::Function:
      if (na.function != nb.function) return na.function < nb.function ? -1 : 1;
      break;
    case Expression::Kind::Power: {
      int c = compare(na.children[0], nb.children[0]);
      if (c != 0) return c;
      if (na.exponent != nb.exponent) return na.exponent < nb.exponent ? -1 : 1;
      return 0;
    }
    default: break;
  }
  std::size_t n = std::min(na.children.size(), nb.children.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = compare(na.children[i], nb.children[i]);
    if (c != 0) return c;
  }
  if (na.children.size() != nb.children.size()) return na.children.size() < nb.children.size() ? -1 : 1;
  return 0;
}

bool operator==(const Expression& a, const Expression& b) {
  if (a.node_ == b.node_) return true;
  if (a.hash() != b.hash()) return false;
  return compare(a, b) == 0;
}

Expression operator+(const Expression& a, const Expression& b) {
  if (a.is_literal_zero()) return b;
  if (b.is_literal_zero()) return a;
  return Expression::sum({a, b});
}

Expression operator-(const Expression& a, const Expression& b) { return a + (-b); }

Expression operator*(const Expression& a, const Expression& b) {
  if (a.is_literal_one()) return b;
  if (b.is_literal_one()) return a;
  if (a.is_literal_zero() || b.is_literal_zero()) return Expression(0);
  return Expression::product({a, b});
}

Expression operator/(const Expression& a, const Expression& b) {
  if (b.is_literal_one()) return a;
  return Expression::quotient(a, b);
}

Expression Expression::operator-() const {
  if (is_constant()) return Expression(-number());
  return Expression::product({Expression(-1), *this});
}

// ---------------------------------------------------------------- printing

namespace {

constexpr int kPrecSum = 1;
constexpr int kPrecProduct = 2;
constexpr int kPrecPower = 3;
constexpr int kPrecAtom = 4;

bool leading_negative(const Expression& e) {
  if (e.is_constant()) return e.number().is_negative();
  if (e.kind() == Expression::Kind::Product) {
    const auto& first = e.children().front();
    return first.is_constant() && first.number().is_negative();
  }
  return false;
}

Expression negated(const Expression& e) {
  if (e.is_constant()) return Expression(-e.number());
  std::vector<Expression> f = e.children();
  Number c = -f.front().number();
  if (c.is_one()) {
    f.erase(f.begin());
  } else {
    f.front() = Expression(c);
  }
  return Expression::product(std::move(f));
}

int precedence(const Expression& e) {
  switch (e.kind()) {
    case Expression::Kind::Constant: {
      const Number& n = e.number();
      if (n.is_negative()) return kPrecProduct;
      if (n.is_exact() && !n.is_integer()) return kPrecProduct;
      return kPrecAtom;
    }
    case Expression::Kind::Symbol:
    case Expression::Kind::Function: return kPrecAtom;
    case Expression::Kind::Power: return kPrecPower;
    case Expression::Kind::Product:
    case Expression::Kind::Quotient: return kPrecProduct;
    case Expression::Kind::Sum: return kPrecSum;
  }
  return kPrecAtom;
}

void print(const Expression& e, int context, std::string& out);

void print_body(const Expression& e, std::string& out) {
  switch (e.kind()) {
    case Expression::Kind::Constant: out += e.number().to_string(); return;
    case Expression::Kind::Symbol: out += e.name(); return;
    case Expression::Kind::Function:
      out += function_name(e.function_kind());
      out += '(';
      print(e.children()[0], 0, out);
      out += ')';
      return;
    case Expression::Kind::Power: {
      print(e.children()[0], kPrecAtom, out);
      out += '^';
      Number r(e.exponent());
      if (r.is_integer() && !r.is_negative()) {
        out += r.to_string();
      } else {
        out += '(';
        out += r.to_string();
        out += ')';
      }
      return;
    }
    case Expression::Kind::Product: {
      const auto& f = e.children();
      if (leading_negative(e)) {
        out += '-';
        print(negated(e), kPrecProduct, out);
        return;
      }
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (i) out += '*';
        print(f[i], i == 0 ? kPrecProduct : kPrecPower, out);
      }
      return;
    }
    case Expression::Kind::Quotient:
      print(e.children()[0], kPrecProduct, out);
      out += '/';
      print(e.children()[1], kPrecPower, out);
      return;
    case Expression::Kind::Sum: {
      const auto& t = e.children();
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (i == 0) {
          print(t[i], kPrecSum, out);
        } else if (leading_negative(t[i])) {
          out += " - ";
          print(negated(t[i]), kPrecProduct, out);
        } else {
          out += " + ";
          print(t[i], kPrecProduct, out);
        }
      }
      return;
    }
  }
}

void print(const Expression& e, int context, std::string& out) {
  bool parens = precedence(e) < context;
  // "-x" printed as the body of a product must not swallow a following power.
  if (!parens && e.kind() == Expression::Kind::Product && leading_negative(e) && context > kPrecProduct) {
    parens = true;
  }
  if (parens) out += '(';
  print_body(e, out);
  if (parens) out += ')';
}

}  // namespace

std::string to_string(const Expression& e) {
  std::string out;
  print(e, 0, out);
  return out;
}

// ------------------------------------------------------- symbolic services

Expression normalize(const Expression& e) {
  if (node_of(e).canonical) return e;
  return detail::to_ratfunc(e).to_expression();
}

Expression differentiate(const Expression& e, std::string_view symbol) {
  if (!detail::depends_on(e, symbol)) return Expression(0);
  return detail::to_ratfunc(e).derivative(symbol).to_expression();
}

namespace {

Expression replace(const Expression& e, std::string_view symbol, const Expression& value) {
  if (!detail::depends_on(e, symbol)) return e;
  if (e.kind() == Expression::Kind::Symbol) return value;
  const auto& n = node_of(e);
  auto copy = new_node(n.kind);
  copy->number = n.number;
  copy->name = n.name;
  copy->exponent = n.exponent;
  copy->function = n.function;
  copy->children.reserve(n.children.size());
  for (const auto& c : n.children) copy->children.push_back(replace(c, symbol, value));
  return finish(std::move(copy));
}

void collect_symbols(const Expression& e, std::set<std::string>& out) {
  if (e.kind() == Expression::Kind::Symbol) {
    out.insert(e.name());
    return;
  }
  for (const auto& c : e.children()) collect_symbols(c, out);
}

}  // namespace

Expression substitute(const Expression& e, std::string_view symbol, const Expression& value) {
  return normalize(replace(e, symbol, value));
}

std::set<std::string> free_symbols(const Expression& e) {
  std::set<std::string> out;
  collect_symbols(e, out);
  return out;
}

}  // namespace sode
