#include "ratfunc.hpp"

#include "sode/errors.hpp"

#include <algorithm>
#include <cmath>

namespace sode::detail {

// ------------------------------------------------------------------ monomials

int compare(const Monomial& a, const Monomial& b) {
  if (a.degree != b.degree) return a.degree > b.degree ? 1 : -1;
  std::size_t n = std::min(a.factors.size(), b.factors.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [atom_a, exp_a] = a.factors[i];
    const auto& [atom_b, exp_b] = b.factors[i];
    int c = sode::compare(atom_a, atom_b);
    // An earlier atom is more significant.
    if (c != 0) return c < 0 ? 1 : -1;
    if (exp_a != exp_b) return exp_a > exp_b ? 1 : -1;
  }
  if (a.factors.size() != b.factors.size()) return a.factors.size() > b.factors.size() ? 1 : -1;
  return 0;
}

Monomial operator*(const Monomial& a, const Monomial& b) {
  Monomial out;
  out.degree = a.degree + b.degree;
  out.factors.reserve(a.factors.size() + b.factors.size());
  std::size_t i = 0, j = 0;
  while (i < a.factors.size() && j < b.factors.size()) {
    int c = sode::compare(a.factors[i].first, b.factors[j].first);
    if (c < 0) {
      out.factors.push_back(a.factors[i++]);
    } else if (c > 0) {
      out.factors.push_back(b.factors[j++]);
    } else {
      out.factors.emplace_back(a.factors[i].first, a.factors[i].second + b.factors[j].second);
      ++i;
      ++j;
    }
  }
  for (; i < a.factors.size(); ++i) out.factors.push_back(a.factors[i]);
  for (; j < b.factors.size(); ++j) out.factors.push_back(b.factors[j]);
  return out;
}

std::optional<Monomial> divide(const Monomial& a, const Monomial& b) {
  Monomial out;
  out.degree = a.degree - b.degree;
  std::size_t i = 0, j = 0;
  while (j < b.factors.size()) {
    if (i == a.factors.size()) return std::nullopt;
    int c = sode::compare(a.factors[i].first, b.factors[j].first);
    if (c < 0) {
      out.factors.push_back(a.factors[i++]);
    } else if (c > 0) {
      return std::nullopt;
    } else {
      int e = a.factors[i].second - b.factors[j].second;
      if (e < 0) return std::nullopt;
      if (e > 0) out.factors.emplace_back(a.factors[i].first, e);
      ++i;
      ++j;
    }
  }
  for (; i < a.factors.size(); ++i) out.factors.push_back(a.factors[i]);
  return out;
}

namespace {

bool is_sin_atom(const Atom& a) {
  return a.kind() == Expression::Kind::Function && a.function_kind() == FunctionKind::Sin;
}

bool is_root_atom(const Atom& a) { return a.kind() == Expression::Kind::Power; }

int root_index(const Atom& a) {
  return static_cast<int>(boost::multiprecision::denominator(a.exponent()));
}

// Sorts by descending monomial, merges equal monomials, drops zeros.
std::vector<Term> combine(std::vector<Term> terms) {
  std::sort(terms.begin(), terms.end(),
            [](const Term& a, const Term& b) { return compare(a.mono, b.mono) > 0; });
  std::vector<Term> out;
  out.reserve(terms.size());
  for (auto& t : terms) {
    if (!out.empty() && compare(out.back().mono, t.mono) == 0) {
      out.back().coef += t.coef;
    } else {
      out.push_back(std::move(t));
    }
  }
  std::erase_if(out, [](const Term& t) { return t.coef.is_zero(); });
  return out;
}

// Rewrites sin(u)^k (k >= 2) as sin(u)^(k-2) * (1 - cos(u)^2) until no sine
// appears squared; polynomials in sin/cos then have unique representatives.
std::vector<Term> reduce_trig(std::vector<Term> terms) {
  auto needs = [](const Term& t) {
    return std::any_of(t.mono.factors.begin(), t.mono.factors.end(),
                       [](const auto& f) { return f.second >= 2 && is_sin_atom(f.first); });
  };
  if (std::none_of(terms.begin(), terms.end(), needs)) return terms;
  std::vector<Term> work = std::move(terms);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Term> next;
    next.reserve(work.size() * 2);
    for (auto& t : work) {
      auto it = std::find_if(t.mono.factors.begin(), t.mono.factors.end(),
                             [](const auto& f) { return f.second >= 2 && is_sin_atom(f.first); });
      if (it == t.mono.factors.end()) {
        next.push_back(std::move(t));
        continue;
      }
      changed = true;
      Atom cos_atom = Expression::function(FunctionKind::Cos, it->first.children()[0]);
      Monomial reduced = t.mono;
      auto& slot = reduced.factors[static_cast<std::size_t>(it - t.mono.factors.begin())];
      slot.second -= 2;
      reduced.degree -= 2;
      if (slot.second == 0) reduced.factors.erase(reduced.factors.begin() + (&slot - reduced.factors.data()));
      Monomial cos2{{{cos_atom, 2}}, 2};
      next.push_back({reduced, t.coef});
      next.push_back({reduced * cos2, -t.coef});
    }
    work = std::move(next);
  }
  return combine(std::move(work));
}

}  // namespace

// ---------------------------------------------------------------- polynomials

Poly Poly::constant(const Number& c) {
  Poly p;
  if (!c.is_zero()) p.terms_.push_back({Monomial{}, c});
  return p;
}

Poly Poly::atom(const Atom& a, int exponent) {
  Poly p;
  if (exponent == 0) return constant(1);
  p.terms_.push_back({Monomial{{{a, exponent}}, exponent}, Number(1)});
  p.terms_ = reduce_trig(std::move(p.terms_));
  return p;
}

Poly Poly::from_terms(std::vector<Term> terms) {
  Poly p;
  p.terms_ = reduce_trig(combine(std::move(terms)));
  return p;
}

bool Poly::is_exact() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const Term& t) { return t.coef.is_exact(); });
}

Poly operator+(const Poly& a, const Poly& b) {
  Poly out;
  out.terms_.reserve(a.terms_.size() + b.terms_.size());
  std::size_t i = 0, j = 0;
  while (i < a.terms_.size() && j < b.terms_.size()) {
    int c = compare(a.terms_[i].mono, b.terms_[j].mono);
    if (c > 0) {
      out.terms_.push_back(a.terms_[i++]);
    } else if (c < 0) {
      out.terms_.push_back(b.terms_[j++]);
    } else {
      Number s = a.terms_[i].coef + b.terms_[j].coef;
      if (!s.is_zero()) out.terms_.push_back({a.terms_[i].mono, s});
      ++i;
      ++j;
    }
  }
  for (; i < a.terms_.size(); ++i) out.terms_.push_back(a.terms_[i]);
  for (; j < b.terms_.size(); ++j) out.terms_.push_back(b.terms_[j]);
  return out;
}

Poly Poly::operator-() const {
  Poly out = *this;
  for (auto& t : out.terms_) t.coef = -t.coef;
  return out;
}

Poly operator-(const Poly& a, const Poly& b) { return a + (-b); }

Poly operator*(const Poly& a, const Poly& b) {
  if (a.is_zero() || b.is_zero()) return Poly{};
  if (a.is_constant()) return b.scaled(a.constant_value());
  if (b.is_constant()) return a.scaled(b.constant_value());
  std::vector<Term> prod;
  prod.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& ta : a.terms_) {
    for (const auto& tb : b.terms_) prod.push_back({ta.mono * tb.mono, ta.coef * tb.coef});
  }
  return Poly::from_terms(std::move(prod));
}

Poly Poly::scaled(const Number& c) const {
  if (c.is_zero()) return Poly{};
  Poly out = *this;
  for (auto& t : out.terms_) t.coef = t.coef * c;
  std::erase_if(out.terms_, [](const Term& t) { return t.coef.is_zero(); });
  return out;
}

Poly Poly::times(const Monomial& m) const {
  if (m.is_one()) return *this;
  std::vector<Term> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) out.push_back({t.mono * m, t.coef});
  return Poly::from_terms(std::move(out));
}

Poly Poly::pow(int k) const {
  Poly result = constant(1);
  Poly base = *this;
  while (k > 0) {
    if (k & 1) result = result * base;
    k >>= 1;
    if (k) base = base * base;
  }
  return result;
}

std::optional<Poly> Poly::exact_divide(const Poly& d) const {
  if (d.is_zero()) return std::nullopt;
  if (is_zero()) return Poly{};
  if (d.terms_.size() == 1) {
    const Term& dt = d.terms_[0];
    std::vector<Term> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) {
      auto m = divide(t.mono, dt.mono);
      if (!m) return std::nullopt;
      out.push_back({std::move(*m), t.coef / dt.coef});
    }
    return Poly::from_terms(std::move(out));
  }
  // Floating coefficients cannot be cancelled reliably; only exact division.
  if (!is_exact() || !d.is_exact()) return std::nullopt;
  if (d.leading().mono.degree > leading().mono.degree) return std::nullopt;
  Poly rem = *this;
  std::vector<Term> quotient;
  const Term& lead = d.leading();
  for (int guard = 0; !rem.is_zero(); ++guard) {
    if (guard > 100000) return std::nullopt;
    const Term& rt = rem.leading();
    auto m = divide(rt.mono, lead.mono);
    if (!m) return std::nullopt;
    Term q{std::move(*m), rt.coef / lead.coef};
    Poly step = d.times(q.mono).scaled(q.coef);
    rem = rem - step;
    quotient.push_back(std::move(q));
  }
  return Poly::from_terms(std::move(quotient));
}

int compare(const Poly& a, const Poly& b) {
  std::size_t n = std::min(a.terms_.size(), b.terms_.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = compare(a.terms_[i].mono, b.terms_[i].mono);
    if (c != 0) return c;
    c = compare(a.terms_[i].coef, b.terms_[i].coef);
    if (c != 0) return c;
  }
  if (a.terms_.size() != b.terms_.size()) return a.terms_.size() < b.terms_.size() ? -1 : 1;
  return 0;
}

// ------------------------------------------------------- rational functions

namespace {

std::vector<DenFactor> merge_dens(const std::vector<DenFactor>& a, const std::vector<DenFactor>& b,
                                  bool add_exponents) {
  std::vector<DenFactor> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    int c = compare(a[i].poly, b[j].poly);
    if (c < 0) {
      out.push_back(a[i++]);
    } else if (c > 0) {
      out.push_back(b[j++]);
    } else {
      int e = add_exponents ? a[i].exp + b[j].exp : std::max(a[i].exp, b[j].exp);
      out.push_back({a[i].poly, e});
      ++i;
      ++j;
    }
  }
  for (; i < a.size(); ++i) out.push_back(a[i]);
  for (; j < b.size(); ++j) out.push_back(b[j]);
  return out;
}

// Product of f^(target - have) over the factors of `target`.
Poly cofactor(const std::vector<DenFactor>& target, const std::vector<DenFactor>& have) {
  Poly out = Poly::constant(1);
  std::size_t j = 0;
  for (const auto& f : target) {
    while (j < have.size() && compare(have[j].poly, f.poly) < 0) ++j;
    int e = f.exp;
    if (j < have.size() && compare(have[j].poly, f.poly) == 0) e -= have[j].exp;
    if (e > 0) out = out * f.poly.pow(e);
  }
  return out;
}

bool same_dens(const std::vector<DenFactor>& a, const std::vector<DenFactor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].exp != b[i].exp || compare(a[i].poly, b[i].poly) != 0) return false;
  }
  return true;
}

}  // namespace

RatFunc::RatFunc(Poly num, std::vector<DenFactor> den) : num_(std::move(num)), den_(std::move(den)) {
  cancel();
}

void RatFunc::cancel() {
  if (num_.is_zero()) {
    den_.clear();
    return;
  }
  for (auto& f : den_) {
    while (f.exp > 0) {
      auto q = num_.exact_divide(f.poly);
      if (!q) break;
      num_ = std::move(*q);
      --f.exp;
    }
  }
  std::erase_if(den_, [](const DenFactor& f) { return f.exp == 0; });
}

Poly RatFunc::den_product() const {
  Poly out = Poly::constant(1);
  for (const auto& f : den_) out = out * f.poly.pow(f.exp);
  return out;
}

RatFunc operator*(const RatFunc& a, const RatFunc& b) {
  if (a.is_zero() || b.is_zero()) return RatFunc{};
  RatFunc out(a.num_ * b.num_, merge_dens(a.den_, b.den_, true));
  out.reduce_roots();
  return out;
}

RatFunc operator+(const RatFunc& a, const RatFunc& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (same_dens(a.den_, b.den_)) return RatFunc(a.num_ + b.num_, a.den_);
  auto lcm = merge_dens(a.den_, b.den_, false);
  Poly num = a.num_ * cofactor(lcm, a.den_) + b.num_ * cofactor(lcm, b.den_);
  return RatFunc(std::move(num), std::move(lcm));
}

RatFunc RatFunc::operator-() const {
  RatFunc out = *this;
  out.num_ = -out.num_;
  return out;
}

RatFunc operator-(const RatFunc& a, const RatFunc& b) { return a + (-b); }

RatFunc RatFunc::inverse() const {
  if (num_.is_zero()) throw DomainError("division by zero", "0");
  Poly new_num = den_product();
  if (num_.is_constant()) return RatFunc(new_num.scaled(Number(1) / num_.constant_value()));

  Number lead = num_.leading().coef;
  Poly p = num_.scaled(Number(1) / lead);
  // Monomial content: atoms present in every term, at their minimum power.
  Monomial content = p.terms().front().mono;
  for (const auto& t : p.terms()) {
    Monomial common;
    for (const auto& [atom, e] : content.factors) {
      auto it = std::find_if(t.mono.factors.begin(), t.mono.factors.end(),
                             [&](const auto& f) { return sode::compare(f.first, atom) == 0; });
      if (it != t.mono.factors.end()) {
        int m = std::min(e, it->second);
        common.factors.emplace_back(atom, m);
        common.degree += m;
      }
    }
    content = std::move(common);
  }
  std::vector<DenFactor> den;
  // Roots leave the denominator: 1/r^e = r^(q-e)/b for r = b^(1/q).
  RatFunc rationalized = constant(1);
  for (const auto& [atom, e] : content.factors) {
    if (is_root_atom(atom)) {
      rationalized = rationalized * RatFunc(Poly::atom(atom, root_index(atom) - e)) *
                     to_ratfunc(atom.children()[0]).inverse();
    } else {
      den.push_back({Poly::atom(atom), e});
    }
  }
  if (!content.is_one()) p = *p.exact_divide(Poly::from_terms({{content, Number(1)}}));
  if (!p.is_constant()) den.push_back({p, 1});
  std::sort(den.begin(), den.end(), [](const DenFactor& a, const DenFactor& b) { return compare(a.poly, b.poly) < 0; });
  RatFunc out(new_num.scaled(Number(1) / lead), std::move(den));
  out.reduce_roots();
  return rationalized.is_constant() ? out : out * rationalized;
}

RatFunc RatFunc::pow(int k) const {
  if (k < 0) return inverse().pow(-k);
  if (k == 0) return constant(1);
  std::vector<DenFactor> den = den_;
  for (auto& f : den) f.exp *= k;
  RatFunc out(num_.pow(k), std::move(den));
  out.reduce_roots();
  return out;
}

// (b^(1/q))^e with e >= q contributes b^(e div q) as a rational factor.
void RatFunc::reduce_roots() {
  auto heavy = [](const std::pair<Atom, int>& f) { return is_root_atom(f.first) && f.second >= root_index(f.first); };
  bool num_heavy = std::any_of(num_.terms().begin(), num_.terms().end(), [&](const Term& t) {
    return std::any_of(t.mono.factors.begin(), t.mono.factors.end(), heavy);
  });
  bool den_heavy = std::any_of(den_.begin(), den_.end(), [&](const DenFactor& f) {
    return f.poly.terms().size() == 1 && heavy({f.poly.leading().mono.factors[0].first, f.exp});
  });
  if (!num_heavy && !den_heavy) return;

  RatFunc num_part;
  for (const auto& t : num_.terms()) {
    Monomial light;
    RatFunc extra = constant(t.coef);
    for (const auto& [atom, e] : t.mono.factors) {
      if (is_root_atom(atom) && e >= root_index(atom)) {
        int q = root_index(atom);
        extra = extra * to_ratfunc(atom.children()[0]).pow(e / q);
        if (e % q) {
          light.factors.emplace_back(atom, e % q);
          light.degree += e % q;
        }
      } else {
        light.factors.emplace_back(atom, e);
        light.degree += e;
      }
    }
    num_part = num_part + extra * RatFunc(Poly::from_terms({{light, Number(1)}}));
  }
  RatFunc den_part = constant(1);
  std::vector<DenFactor> kept;
  for (const auto& f : den_) {
    if (f.poly.terms().size() == 1 && heavy({f.poly.leading().mono.factors[0].first, f.exp})) {
      const Atom& atom = f.poly.leading().mono.factors[0].first;
      int q = root_index(atom);
      den_part = den_part * to_ratfunc(atom.children()[0]).pow(f.exp / q);
      if (f.exp % q) kept.push_back({f.poly, f.exp % q});
    } else {
      kept.push_back(f);
    }
  }
  RatFunc rest(Poly::constant(1), std::move(kept));
  *this = num_part * rest * den_part.inverse();
}

namespace {

RatFunc atom_derivative(const Atom& a, std::string_view s) {
  switch (a.kind()) {
    case Expression::Kind::Symbol: return RatFunc::constant(a.name() == s ? 1 : 0);
    case Expression::Kind::Function: {
      RatFunc u = to_ratfunc(a.children()[0]);
      RatFunc du = u.derivative(s);
      if (du.is_zero()) return RatFunc{};
      switch (a.function_kind()) {
        case FunctionKind::Exp: return RatFunc::atom(a) * du;
        case FunctionKind::Sin: return make_function(FunctionKind::Cos, u) * du;
        case FunctionKind::Cos: return -(make_function(FunctionKind::Sin, u) * du);
        case FunctionKind::Log: return du * u.inverse();
      }
      break;
    }
    case Expression::Kind::Power: {
      RatFunc b = to_ratfunc(a.children()[0]);
      RatFunc db = b.derivative(s);
      if (db.is_zero()) return RatFunc{};
      return RatFunc::constant(Number(a.exponent())) * RatFunc::atom(a) * db * b.inverse();
    }
    default: break;
  }
  return RatFunc{};
}

RatFunc poly_derivative(const Poly& p, std::string_view s) {
  std::vector<Term> poly_part;
  RatFunc extra;
  std::vector<std::pair<Atom, RatFunc>> cache;
  auto d_atom = [&](const Atom& a) -> const RatFunc& {
    for (const auto& [k, v] : cache) {
      if (k == a) return v;
    }
    cache.emplace_back(a, atom_derivative(a, s));
    return cache.back().second;
  };
  for (const auto& t : p.terms()) {
    for (std::size_t i = 0; i < t.mono.factors.size(); ++i) {
      const auto& [atom, e] = t.mono.factors[i];
      if (!depends_on(atom, s)) continue;
      RatFunc da = d_atom(atom);
      if (da.is_zero()) continue;
      Monomial rest = t.mono;
      rest.degree -= 1;
      if (e == 1) {
        rest.factors.erase(rest.factors.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        rest.factors[i].second -= 1;
      }
      Number c = t.coef * Number(e);
      if (da.is_polynomial()) {
        for (const auto& dt : da.num().terms()) poly_part.push_back({rest * dt.mono, c * dt.coef});
      } else {
        extra = extra + RatFunc(Poly::from_terms({{rest, c}})) * da;
      }
    }
  }
  return RatFunc(Poly::from_terms(std::move(poly_part))) + extra;
}

bool poly_depends_on(const Poly& p, std::string_view s) {
  return std::any_of(p.terms().begin(), p.terms().end(), [&](const Term& t) {
    return std::any_of(t.mono.factors.begin(), t.mono.factors.end(),
                       [&](const auto& f) { return depends_on(f.first, s); });
  });
}

}  // namespace

RatFunc RatFunc::derivative(std::string_view symbol) const {
  bool any = poly_depends_on(num_, symbol) ||
             std::any_of(den_.begin(), den_.end(), [&](const DenFactor& f) { return poly_depends_on(f.poly, symbol); });
  if (!any) return RatFunc{};
  RatFunc reciprocal_den(Poly::constant(1), den_);
  RatFunc result = poly_derivative(num_, symbol) * reciprocal_den;
  for (const auto& f : den_) {
    if (!poly_depends_on(f.poly, symbol)) continue;
    RatFunc df = poly_derivative(f.poly, symbol);
    std::vector<DenFactor> den = den_;
    for (auto& g : den) {
      if (compare(g.poly, f.poly) == 0) g.exp += 1;
    }
    result = result - RatFunc(num_.scaled(Number(f.exp)), std::move(den)) * df;
  }
  return result;
}

// ----------------------------------------------------------------- to trees

Expression monomial_to_expression(const Monomial& m) {
  std::vector<Expression> f;
  for (const auto& [atom, e] : m.factors) f.push_back(e == 1 ? atom : Expression::power(atom, e));
  return Expression::product(std::move(f));
}

Expression poly_to_expression(const Poly& p) {
  std::vector<Expression> terms;
  for (const auto& t : p.terms()) {
    if (t.mono.is_one()) {
      terms.emplace_back(t.coef);
      continue;
    }
    Expression m = monomial_to_expression(t.mono);
    if (t.coef.is_one()) {
      terms.push_back(m);
    } else {
      terms.push_back(Expression::product({Expression(t.coef), m}));
    }
  }
  return Expression::sum(std::move(terms));
}

Expression RatFunc::to_expression() const {
  Expression tree = poly_to_expression(num_);
  if (!den_.empty()) {
    std::vector<Expression> den;
    for (const auto& f : den_) {
      Expression base = poly_to_expression(f.poly);
      den.push_back(f.exp == 1 ? base : Expression::power(base, f.exp));
    }
    tree = Expression::quotient(tree, Expression::product(std::move(den)));
  }
  const Node& top = node_of(tree);
  auto copy = new_node(top.kind);
  copy->number = top.number;
  copy->name = top.name;
  copy->children = top.children;
  copy->exponent = top.exponent;
  copy->function = top.function;
  copy->canonical = std::make_shared<const RatFunc>(*this);
  return finish(std::move(copy));
}

// ------------------------------------------------------------ from trees

RatFunc make_function(FunctionKind kind, const RatFunc& arg) {
  if (arg.is_constant()) {
    Number c = arg.num().constant_value();
    if (c.is_exact()) {
      if (c.is_zero()) {
        if (kind == FunctionKind::Exp || kind == FunctionKind::Cos) return RatFunc::constant(1);
        if (kind == FunctionKind::Sin) return RatFunc{};
      }
      if (c.is_one() && kind == FunctionKind::Log) return RatFunc{};
    } else {
      double x = c.inexact();
      switch (kind) {
        case FunctionKind::Exp: return RatFunc::constant(Number::real(std::exp(x)));
        case FunctionKind::Sin: return RatFunc::constant(Number::real(std::sin(x)));
        case FunctionKind::Cos: return RatFunc::constant(Number::real(std::cos(x)));
        case FunctionKind::Log:
          if (x <= 0) throw DomainError("log of nonpositive value", c.to_string());
          return RatFunc::constant(Number::real(std::log(x)));
      }
    }
  }
  // exp(log(u)) = u and log(exp(u)) = u for a bare inner call.
  if (arg.is_polynomial() && arg.num().terms().size() == 1) {
    const Term& t = arg.num().leading();
    if (t.coef.is_one() && t.mono.factors.size() == 1 && t.mono.factors[0].second == 1) {
      const Atom& inner = t.mono.factors[0].first;
      if (inner.kind() == Expression::Kind::Function) {
        FunctionKind ik = inner.function_kind();
        if ((kind == FunctionKind::Exp && ik == FunctionKind::Log) ||
            (kind == FunctionKind::Log && ik == FunctionKind::Exp)) {
          return to_ratfunc(inner.children()[0]);
        }
      }
    }
  }
  if ((kind == FunctionKind::Sin || kind == FunctionKind::Cos) && !arg.is_zero() &&
      arg.num().leading().coef.is_negative()) {
    RatFunc flipped = make_function(kind, -arg);
    return kind == FunctionKind::Sin ? -flipped : flipped;
  }
  return RatFunc::atom(Expression::function(kind, arg.to_expression()));
}

namespace {

std::optional<Rational> exact_root(const Rational& value, long long q) {
  if (value < 0 && q % 2 == 0) return std::nullopt;
  auto root_int = [q](boost::multiprecision::cpp_int n) -> std::optional<boost::multiprecision::cpp_int> {
    bool neg = n < 0;
    if (neg) n = -n;
    double guess = std::pow(n.convert_to<double>(), 1.0 / static_cast<double>(q));
    boost::multiprecision::cpp_int r(static_cast<long long>(std::llround(guess)));
    for (int d = -1; d <= 1; ++d) {
      boost::multiprecision::cpp_int c = r + d;
      if (c < 0) continue;
      if (boost::multiprecision::pow(c, static_cast<unsigned>(q)) == n) return neg ? -c : c;
    }
    return std::nullopt;
  };
  auto n = root_int(boost::multiprecision::numerator(value));
  auto d = root_int(boost::multiprecision::denominator(value));
  if (!n || !d) return std::nullopt;
  return Rational(*n, *d);
}

}  // namespace

RatFunc make_power(const RatFunc& base, const Rational& exponent) {
  using boost::multiprecision::cpp_int;
  cpp_int p = boost::multiprecision::numerator(exponent);
  cpp_int q = boost::multiprecision::denominator(exponent);
  if (q == 1) return base.pow(p.convert_to<int>());
  // floor division keeps the fractional part in (0, 1)
  cpp_int k = p / q;
  if (p < 0 && k * q != p) k -= 1;
  cpp_int frac = p - k * q;
  long long qq = q.convert_to<long long>();
  if (base.is_constant()) {
    Number c = base.num().constant_value();
    if (c.is_zero()) {
      if (exponent < 0) throw DomainError("zero raised to a negative power", "0");
      return RatFunc{};
    }
    if (c.is_exact()) {
      if (auto r = exact_root(c.exact(), qq)) return RatFunc::constant(pow(Number(*r), p.convert_to<long long>()));
    } else {
      double x = c.inexact();
      if (x < 0 && qq % 2 == 0) throw DomainError("even root of a negative value", c.to_string());
      double mag = std::pow(std::abs(x), exponent.convert_to<double>());
      bool neg = x < 0 && (p % 2 != 0);
      return RatFunc::constant(Number::real(neg ? -mag : mag));
    }
  }
  Atom root = Expression::power(base.to_expression(), Rational(1, q));
  return base.pow(k.convert_to<int>()) * RatFunc(Poly::atom(root, frac.convert_to<int>()));
}

namespace {

RatFunc inverse_of_tree(const Expression& e);

RatFunc convert(const Expression& e) {
  const Node& n = node_of(e);
  if (n.canonical) return *n.canonical;
  switch (n.kind) {
    case Expression::Kind::Constant: return RatFunc::constant(n.number);
    case Expression::Kind::Symbol: return RatFunc::atom(e);
    case Expression::Kind::Sum: {
      RatFunc acc;
      for (const auto& c : n.children) acc = acc + convert(c);
      return acc;
    }
    case Expression::Kind::Product: {
      RatFunc acc = RatFunc::constant(1);
      for (const auto& c : n.children) {
        acc = acc * convert(c);
        if (acc.is_zero()) break;
      }
      return acc;
    }
    case Expression::Kind::Quotient: {
      RatFunc num = convert(n.children[0]);
      RatFunc inv = inverse_of_tree(n.children[1]);
      return num * inv;
    }
    case Expression::Kind::Power: {
      if (boost::multiprecision::denominator(n.exponent) == 1 && n.exponent < 0) {
        return inverse_of_tree(n.children[0]).pow(static_cast<int>(-n.exponent.convert_to<long long>()));
      }
      return make_power(convert(n.children[0]), n.exponent);
    }
    case Expression::Kind::Function: return make_function(n.function, convert(n.children[0]));
  }
  return RatFunc{};
}

// Inverts structurally so that factored denominators stay factored.
RatFunc inverse_of_tree(const Expression& e) {
  const Node& n = node_of(e);
  switch (n.kind) {
    case Expression::Kind::Product: {
      RatFunc acc = RatFunc::constant(1);
      for (const auto& c : n.children) acc = acc * inverse_of_tree(c);
      return acc;
    }
    case Expression::Kind::Power:
      if (boost::multiprecision::denominator(n.exponent) == 1) {
        int k = n.exponent.convert_to<int>();
        return k >= 0 ? inverse_of_tree(n.children[0]).pow(k) : convert(n.children[0]).pow(-k);
      }
      break;
    case Expression::Kind::Quotient: return convert(n.children[1]) * inverse_of_tree(n.children[0]);
    default: break;
  }
  RatFunc value = convert(e);
  if (value.is_zero()) throw DomainError("division by zero", to_string(e));
  return value.inverse();
}

}  // namespace

RatFunc to_ratfunc(const Expression& e) { return convert(e); }

}  // namespace sode::detail
