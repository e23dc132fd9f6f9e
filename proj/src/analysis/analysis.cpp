#include "sode/analysis.hpp"

#include "expr/ratfunc.hpp"
#include "sode/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace sode {

namespace {

const Expression& half() {
  static const Expression h(Number(Rational(1, 2)));
  return h;
}

void append_components(std::vector<Expression>& out, const VectorField& X) {
  for (const auto& c : X.components()) out.push_back(c);
}

Check field_check(std::string name, const std::vector<VectorField>& fields, const ExtendedFrame& ef) {
  std::vector<Expression> exprs;
  for (const auto& f : fields) append_components(exprs, f);
  return zero_check(std::move(name), exprs, ef.box(), ef.zero);
}

Check failed_check(std::string name, std::string detail, std::vector<double> witness = {}) {
  Check c;
  c.name = std::move(name);
  c.status = Check::Status::Fail;
  c.detail = std::move(detail);
  c.witness = std::move(witness);
  return c;
}

VectorField combine(const ChartPtr& chart, const std::vector<Expression>& coef, const std::vector<VectorField>& basis,
                    std::size_t offset = 0) {
  std::vector<Expression> comps(chart->dim());
  for (std::size_t i = 0; i < chart->dim(); ++i) {
    std::vector<Expression> terms;
    for (std::size_t k = 0; k < basis.size(); ++k) {
      const Expression& c = coef[offset + k];
      if (!c.is_literal_zero() && !basis[k][i].is_literal_zero()) terms.push_back(c * basis[k][i]);
    }
    comps[i] = normalize(Expression::sum(std::move(terms)));
  }
  return VectorField(chart, std::move(comps));
}

}  // namespace

std::string to_string(Check::Status s) {
  switch (s) {
    case Check::Status::Pass: return "Pass";
    case Check::Status::Fail: return "Fail";
    case Check::Status::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

Check zero_check(std::string name, const std::vector<Expression>& exprs, const SamplingBox& box,
                 const ZeroTestOptions& options) {
  Check c;
  c.name = std::move(name);
  c.status = Check::Status::Pass;
  c.exact = true;
  for (std::size_t i = 0; i < exprs.size(); ++i) {
    ZeroVerdict v = is_zero(exprs[i], box, options);
    if (v.zero()) continue;
    c.exact = false;
    if (v.nonzero()) {
      c.status = Check::Status::Fail;
      c.witness = v.witness;
      c.witness_value = v.witness_value;
      std::vector<double> p = v.witness;
      double value = 0.0;
      if (CompiledExpression(exprs[i], box.names).try_eval(p, value)) c.witness_value = value;
      c.detail = "component " + std::to_string(i) + " is nonzero at the witness";
      return c;
    }
    if (v.evaluated == 0) {
      c.status = Check::Status::Inconclusive;
      c.detail = "component " + std::to_string(i) + ": " + v.diagnostic;
      continue;
    }
    c.max_residual = std::max(c.max_residual, v.max_relative_residual);
  }
  if (c.status == Check::Status::Pass && !c.exact) {
    c.detail = "numerically zero at all samples (not structurally zero)";
  }
  return c;
}

// ---------------------------------------------------------------- problem

SecondOrderProblem::SecondOrderProblem(ChartPtr chart, VectorField F, Frame V, AnalysisOptions options)
    : chart_(std::move(chart)), F_(std::move(F)), V_(std::move(V)), options_(options) {
  if (!F_.chart()->same_as(*chart_) || !V_.chart()->same_as(*chart_)) throw InputError("F and V must share the chart");
  if (2 * V_.size() > chart_->dim()) throw InputError("need 2n <= m");
  InvolutivityVerdict inv = is_involutive(V_, options_.zero);
  if (!inv.involutive) throw InputError("V is not involutive: " + inv.diagnostic);
}

RegularityResult check_regularity(const SecondOrderProblem& p) {
  std::vector<VectorField> fields = p.V().fields();
  for (const auto& v : p.V().fields()) fields.push_back(lie_bracket(p.F(), v));
  RegularityResult r;
  r.rank = frame_rank(fields, p.options().samples, p.options().seed);
  const std::size_t target = 2 * p.n();
  r.rank.deficient_points.clear();
  // Ranks are recorded for evaluated samples; recover their points.
  HaltonSampler sampler(p.chart()->box(), p.options().seed);
  std::size_t k = 0;
  for (std::size_t s = 0; s < p.options().samples && k < r.rank.ranks.size(); ++s) {
    auto pt = sampler.next();
    if (std::find(r.rank.skipped_points.begin(), r.rank.skipped_points.end(), pt) != r.rank.skipped_points.end()) continue;
    if (r.rank.ranks[k] < target) r.rank.deficient_points.push_back(pt);
    ++k;
  }
  r.pass = r.rank.claimed_rank == target && r.rank.deficient_points.empty();
  return r;
}

ExtendedFrame build_W(const ChartPtr& chart, const VectorField& F, std::vector<VectorField> V,
                      const AnalysisOptions& options) {
  ExtendedFrame ef;
  ef.chart = chart;
  ef.F = F;
  ef.V = std::move(V);
  ef.zero = options.zero;
  for (const auto& v : ef.V) ef.W.push_back(lie_bracket(F, v));
  std::vector<VectorField> all = ef.V;
  all.insert(all.end(), ef.W.begin(), ef.W.end());
  try {
    ef.combined = std::make_shared<const Frame>(chart, all, options.samples, options.seed);
  } catch (const InputError& e) {
    throw NumericError(std::string("inconsistent extended frame: ") + e.what());
  }
  ef.solver = std::make_shared<const FrameSolver>(*ef.combined, options.zero);
  if (!ef.solver->ok()) throw NumericError("extended frame cannot be inverted: " + ef.solver->diagnostic());

  std::vector<VectorField> brackets;
  for (std::size_t i = 0; i < ef.n(); ++i) {
    for (std::size_t j = i + 1; j < ef.n(); ++j) brackets.push_back(lie_bracket(ef.V[i], ef.V[j]));
  }
  ef.commuting = brackets.empty() || field_check("commuting", brackets, ef).passed();

  ef.adapted = true;
  std::vector<Expression> w_parts;
  for (std::size_t i = 0; i < ef.n() && ef.adapted; ++i) {
    for (std::size_t j = 0; j < ef.n(); ++j) {
      Decomposition d = ef.solver->decompose(lie_bracket(ef.V[i], ef.W[j]));
      if (!d.ok) {
        ef.adapted = false;
        break;
      }
      for (std::size_t k = 0; k < ef.n(); ++k) w_parts.push_back(d.coefficients[ef.n() + k]);
    }
  }
  if (ef.adapted) ef.adapted = zero_check("adapted", w_parts, ef.box(), ef.zero).passed();
  return ef;
}

ExtendedFrame build_W(const SecondOrderProblem& p) { return build_W(p.chart(), p.F(), p.V().fields(), p.options()); }

InvolutivityVerdict check_W_involutive(const ExtendedFrame& ef) { return is_involutive(*ef.combined, ef.zero); }

// -------------------------------------------------------------------- beta

BetaCoefficients beta_coefficients(const ExtendedFrame& ef) {
  const std::size_t n = ef.n();
  BetaCoefficients b;
  b.n = n;
  b.alpha.assign(n, std::vector<std::vector<Expression>>(n, std::vector<Expression>(n)));
  b.beta = b.alpha;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Decomposition d = ef.solver->decompose(lie_bracket(ef.V[i], ef.W[j]));
      if (!d.ok) throw NumericError("[V_i, W_j] is not in W: " + d.diagnostic, d.witness);
      for (std::size_t k = 0; k < n; ++k) {
        b.alpha[k][i][j] = d.coefficients[k];
        b.beta[k][i][j] = d.coefficients[n + k];
      }
    }
  }
  b.all_beta_zero = true;
  for (const auto& bk : b.beta) {
    for (const auto& row : bk) {
      for (const auto& e : row) b.all_beta_zero = b.all_beta_zero && e.is_literal_zero();
    }
  }
  if (!ef.commuting) {
    b.symmetric.name = "alpha/beta symmetry";
    b.symmetric.status = Check::Status::Inconclusive;
    b.symmetric.detail = "V basis does not commute; symmetry not expected";
    return b;
  }
  std::vector<Expression> diffs;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        diffs.push_back(b.alpha[k][i][j] - b.alpha[k][j][i]);
        diffs.push_back(b.beta[k][i][j] - b.beta[k][j][i]);
      }
    }
  }
  b.symmetric = zero_check("alpha/beta symmetry", diffs, ef.box(), ef.zero);
  return b;
}

Check verify_beta_integrability(const ExtendedFrame& ef, const BetaCoefficients& b) {
  if (!ef.commuting) return failed_check("beta integrability", "V basis does not commute");
  const std::size_t n = b.n;
  std::vector<Expression> residuals;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < n; ++l) {
          std::vector<Expression> t{ef.V[i].apply(b.beta[l][j][k]), -ef.V[j].apply(b.beta[l][i][k])};
          for (std::size_t m = 0; m < n; ++m) {
            t.push_back(b.beta[l][i][m] * b.beta[m][j][k]);
            t.push_back(-(b.beta[l][j][m] * b.beta[m][i][k]));
          }
          residuals.push_back(Expression::sum(std::move(t)));
        }
      }
    }
  }
  Check c = zero_check("beta integrability", residuals, ef.box(), ef.zero);
  if (n == 1) c.detail = "single index: holds trivially";
  return c;
}

namespace {

// Gauss-Jordan inverse over expressions with probabilistic pivot tests.
std::optional<std::vector<std::vector<Expression>>> symbolic_inverse(std::vector<std::vector<Expression>> A,
                                                                     const SamplingBox& box,
                                                                     const ZeroTestOptions& zero) {
  const std::size_t n = A.size();
  std::vector<std::vector<Expression>> inv(n, std::vector<Expression>(n, Expression(0)));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = Expression(1);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = n;
    for (std::size_t r = col; r < n; ++r) {
      if (!A[r][col].is_literal_zero() && is_zero(A[r][col], box, zero).nonzero()) {
        piv = r;
        break;
      }
    }
    if (piv == n) return std::nullopt;
    std::swap(A[piv], A[col]);
    std::swap(inv[piv], inv[col]);
    Expression p = normalize(Expression(1) / A[col][col]);
    for (auto& e : A[col]) e = normalize(p * e);
    for (auto& e : inv[col]) e = normalize(p * e);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || A[r][col].is_literal_zero()) continue;
      Expression f = A[r][col];
      for (std::size_t j = 0; j < n; ++j) {
        A[r][j] = normalize(A[r][j] - f * A[col][j]);
        inv[r][j] = normalize(inv[r][j] - f * inv[col][j]);
      }
    }
  }
  return inv;
}

}  // namespace

std::vector<std::vector<std::vector<Expression>>> transform_beta(const ExtendedFrame& ef, const BetaCoefficients& b,
                                                                 const std::vector<std::vector<Expression>>& A) {
  const std::size_t n = b.n;
  auto inv = symbolic_inverse(A, ef.box(), ef.zero);
  if (!inv) throw NumericError("basis change matrix is singular");
  std::vector<std::vector<std::vector<Expression>>> out(
      n, std::vector<std::vector<Expression>>(n, std::vector<Expression>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<Expression> c(n);
      for (std::size_t k = 0; k < n; ++k) {
        std::vector<Expression> t;
        for (std::size_t l = 0; l < n; ++l) {
          t.push_back(A[i][l] * ef.V[l].apply(A[j][k]));
          for (std::size_t m = 0; m < n; ++m) t.push_back(A[i][l] * A[j][m] * b.beta[k][l][m]);
        }
        c[k] = Expression::sum(std::move(t));
      }
      for (std::size_t p = 0; p < n; ++p) {
        std::vector<Expression> t;
        for (std::size_t k = 0; k < n; ++k) t.push_back(c[k] * (*inv)[k][p]);
        out[p][i][j] = normalize(Expression::sum(std::move(t)));
      }
    }
  }
  return out;
}

// ------------------------------------------------------------ adaptation

std::string to_string(BasisAdaptation::Method m) {
  switch (m) {
    case BasisAdaptation::Method::Identity: return "Identity";
    case BasisAdaptation::Method::Symbolic: return "Symbolic";
    case BasisAdaptation::Method::Numeric: return "Numeric";
    case BasisAdaptation::Method::Failed: return "Failed";
  }
  return "Failed";
}

namespace {

Check adapted_check(const ExtendedFrame& ef) {
  std::vector<Expression> w_parts;
  for (std::size_t i = 0; i < ef.n(); ++i) {
    for (std::size_t j = 0; j < ef.n(); ++j) {
      Decomposition d = ef.solver->decompose(lie_bracket(ef.V[i], ef.W[j]));
      if (!d.ok) return failed_check("adapted basis", d.diagnostic, d.witness);
      for (std::size_t k = 0; k < ef.n(); ++k) w_parts.push_back(d.coefficients[ef.n() + k]);
    }
  }
  return zero_check("adapted basis", w_parts, ef.box(), ef.zero);
}

// Best rational with a small denominator, if within tolerance.
std::optional<Rational> snap(double x) {
  for (long long q = 1; q <= 12; ++q) {
    double p = std::round(x * static_cast<double>(q));
    if (std::abs(p / static_cast<double>(q) - x) < 1e-6) return Rational(static_cast<long long>(p), q);
  }
  return std::nullopt;
}

// n = 1 and V = g d/ds: solve d(log A)/ds = -beta/g with A = prod D_k^e_k.
std::optional<Expression> scalar_adaptation(const ExtendedFrame& ef, const BetaCoefficients& b,
                                            const AnalysisOptions& options) {
  const VectorField& V = ef.V[0];
  std::size_t s = ef.chart->dim();
  for (std::size_t i = 0; i < V.dim(); ++i) {
    if (normalize(V[i]).is_literal_zero()) continue;
    if (s != ef.chart->dim()) return std::nullopt;
    s = i;
  }
  if (s == ef.chart->dim()) return std::nullopt;
  const std::string& var = ef.chart->names()[s];
  Expression g = normalize(V[s]);
  Expression beta = b.beta[0][0][0];
  Expression target = normalize(-beta / g);

  std::vector<Expression> candidates;
  auto add_poly = [&](const detail::Poly& p) {
    if (p.is_constant()) return;
    Expression e = normalize(detail::poly_to_expression(p));
    if (!detail::depends_on(e, var)) return;
    for (const auto& c : candidates) {
      if (c == e) return;
    }
    candidates.push_back(e);
  };
  for (const Expression& e : {g, beta}) {
    detail::RatFunc rf = detail::to_ratfunc(e);
    add_poly(rf.num());
    for (const auto& f : rf.den()) add_poly(f.poly);
  }
  // Split monomial numerators into their atoms as well.
  std::vector<Expression> extra;
  for (const Expression& e : {g, beta}) {
    detail::RatFunc rf = detail::to_ratfunc(e);
    if (rf.num().terms().size() == 1) {
      for (const auto& [atom, k] : rf.num().leading().mono.factors) {
        if (detail::depends_on(atom, var)) extra.push_back(normalize(atom));
      }
    }
  }
  for (const auto& e : extra) {
    if (std::find(candidates.begin(), candidates.end(), e) == candidates.end()) candidates.push_back(e);
  }
  if (candidates.empty()) return std::nullopt;

  std::vector<CompiledExpression> logder;
  for (const auto& c : candidates) logder.emplace_back(normalize(differentiate(c, var) / c), ef.chart->names());
  CompiledExpression rhs(target, ef.chart->names());
  const std::size_t rows = std::max<std::size_t>(4 * candidates.size(), 32);
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(candidates.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  HaltonSampler sampler(ef.box(), options.seed + 101);
  std::size_t filled = 0;
  for (std::size_t tries = 0; filled < rows && tries < 4 * rows; ++tries) {
    auto p = sampler.next();
    double v = 0.0;
    if (!rhs.try_eval(p, v) || !std::isfinite(v)) continue;
    bool good = true;
    for (std::size_t k = 0; k < candidates.size() && good; ++k) {
      double d = 0.0;
      good = logder[k].try_eval(p, d) && std::isfinite(d);
      M(static_cast<Eigen::Index>(filled), static_cast<Eigen::Index>(k)) = d;
    }
    if (!good) continue;
    y(static_cast<Eigen::Index>(filled)) = v;
    ++filled;
  }
  if (filled < candidates.size()) return std::nullopt;
  Eigen::VectorXd e = M.topRows(static_cast<Eigen::Index>(filled)).completeOrthogonalDecomposition().solve(y.head(static_cast<Eigen::Index>(filled)));

  double s0 = 0.0;
  const SamplingBox& box = ef.box();
  if (!(box.lo[s] <= 0.0 && 0.0 <= box.hi[s])) s0 = 0.5 * (box.lo[s] + box.hi[s]);
  Expression s0e(Number(Rational(static_cast<long long>(std::llround(s0 * 1e6)), 1000000)));
  std::vector<Expression> factors;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    auto r = snap(e(static_cast<Eigen::Index>(k)));
    if (!r) return std::nullopt;
    if (*r == 0) continue;
    Expression ratio = candidates[k] / substitute(candidates[k], var, s0e);
    factors.push_back(Expression::power(ratio, *r));
  }
  Expression A = normalize(Expression::product(std::move(factors)));
  // A-system: V(A) + A beta = 0.
  Check c = zero_check("scalar A-system", {V.apply(A) + A * beta}, ef.box(), ef.zero);
  if (!c.passed()) return std::nullopt;
  return A;
}

}  // namespace

BasisAdaptation adapt_commuting_basis(const ExtendedFrame& ef, const BetaCoefficients& b) {
  BasisAdaptation out;
  const std::size_t n = ef.n();
  AnalysisOptions options;
  options.zero = ef.zero;
  options.seed = ef.zero.seed;
  if (b.all_beta_zero) {
    out.method = BasisAdaptation::Method::Identity;
    out.A.assign(n, std::vector<Expression>(n, Expression(0)));
    for (std::size_t i = 0; i < n; ++i) out.A[i][i] = Expression(1);
    out.adapted = ef;
    out.verification = adapted_check(ef);
    out.detail = "beta vanishes; the basis already satisfies the condition";
    return out;
  }
  if (n == 1) {
    if (auto A = scalar_adaptation(ef, b, options)) {
      out.method = BasisAdaptation::Method::Symbolic;
      out.A = {{*A}};
      std::vector<VectorField> V{*A * ef.V[0]};
      options.samples = ef.combined ? 64 : 64;
      out.adapted = build_W(ef.chart, ef.F, std::move(V), options);
      out.verification = adapted_check(*out.adapted);
      out.detail = "closed form from a product ansatz over the factors of the basis and beta";
      if (!out.verification.passed()) {
        out.method = BasisAdaptation::Method::Failed;
        out.adapted.reset();
      }
      return out;
    }
  }
  out.method = BasisAdaptation::Method::Numeric;
  out.detail = "no closed form; A is integrated numerically from the cross-section";
  return out;
}

// ------------------------------------------------------------ S and friends

FieldResult apply_S(const ExtendedFrame& ef, const VectorField& X) {
  FieldResult r;
  Decomposition d = ef.solver->decompose(X);
  if (!d.ok) {
    r.diagnostic = "field is not in W: " + d.diagnostic;
    r.witness = d.witness;
    return r;
  }
  std::vector<Expression> coef(ef.n());
  for (std::size_t i = 0; i < ef.n(); ++i) coef[i] = normalize(-d.coefficients[ef.n() + i]);
  r.field = combine(ef.chart, coef, ef.V);
  r.ok = true;
  return r;
}

FieldResult lie_derivative_S(const ExtendedFrame& ef, const VectorField& X) {
  FieldResult sx = apply_S(ef, X);
  if (!sx.ok) return sx;
  FieldResult sfx = apply_S(ef, lie_bracket(ef.F, X));
  if (!sfx.ok) return sfx;
  FieldResult r;
  r.field = lie_bracket(ef.F, sx.field) - sfx.field;
  r.ok = true;
  return r;
}

FieldResult apply_PH(const ExtendedFrame& ef, const VectorField& X) {
  FieldResult l = lie_derivative_S(ef, X);
  if (!l.ok) return l;
  l.field = half() * (X - l.field);
  return l;
}

FieldResult apply_PV(const ExtendedFrame& ef, const VectorField& X) {
  FieldResult l = lie_derivative_S(ef, X);
  if (!l.ok) return l;
  l.field = half() * (X + l.field);
  return l;
}

Check nijenhuis_check(const ExtendedFrame& ef) {
  std::vector<VectorField> frame = ef.V;
  frame.insert(frame.end(), ef.W.begin(), ef.W.end());
  std::vector<VectorField> S(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    FieldResult s = apply_S(ef, frame[i]);
    if (!s.ok) return failed_check("Nijenhuis torsion", s.diagnostic, s.witness);
    S[i] = s.field;
  }
  std::vector<VectorField> values;
  for (std::size_t a = 0; a < frame.size(); ++a) {
    for (std::size_t b = a + 1; b < frame.size(); ++b) {
      FieldResult t1 = apply_S(ef, lie_bracket(S[a], frame[b]));
      FieldResult t2 = apply_S(ef, lie_bracket(frame[a], S[b]));
      if (!t1.ok) return failed_check("Nijenhuis torsion", t1.diagnostic, t1.witness);
      if (!t2.ok) return failed_check("Nijenhuis torsion", t2.diagnostic, t2.witness);
      values.push_back(lie_bracket(S[a], S[b]) - t1.field - t2.field);
    }
  }
  return field_check("Nijenhuis torsion", values, ef);
}

Projectors projectors(const ExtendedFrame& ef) {
  Projectors P;
  std::vector<VectorField> frame = ef.V;
  frame.insert(frame.end(), ef.W.begin(), ef.W.end());
  {
    std::vector<Expression> ok;
    P.F_preserves_W.name = "[F,W] in W";
    P.F_preserves_W.status = Check::Status::Pass;
    P.F_preserves_W.exact = true;
    for (const auto& w : ef.W) {
      Decomposition d = ef.solver->decompose(lie_bracket(ef.F, w));
      if (!d.ok) {
        P.F_preserves_W = failed_check("[F,W] in W", d.diagnostic, d.witness);
        return P;
      }
      P.F_preserves_W.exact = P.F_preserves_W.exact && d.exact;
      P.F_preserves_W.max_residual = std::max(P.F_preserves_W.max_residual, d.max_residual);
    }
  }
  for (const auto& X : frame) {
    FieldResult l = lie_derivative_S(ef, X);
    if (!l.ok) {
      P.involution = failed_check("(L_F S)^2 = id", l.diagnostic, l.witness);
      return P;
    }
    P.LFS.push_back(l.field);
    P.PH.push_back(half() * (X - l.field));
    P.PV.push_back(half() * (X + l.field));
  }
  std::vector<VectorField> inv, comp, idem, vert;
  for (std::size_t a = 0; a < frame.size(); ++a) {
    FieldResult l2 = lie_derivative_S(ef, P.LFS[a]);
    if (!l2.ok) {
      P.involution = failed_check("(L_F S)^2 = id", l2.diagnostic, l2.witness);
      return P;
    }
    inv.push_back(l2.field - frame[a]);
    comp.push_back(P.PH[a] + P.PV[a] - frame[a]);
    FieldResult ph2 = apply_PH(ef, P.PH[a]);
    FieldResult pv2 = apply_PV(ef, P.PV[a]);
    if (!ph2.ok || !pv2.ok) {
      P.idempotent = failed_check("projector idempotence", ph2.ok ? pv2.diagnostic : ph2.diagnostic);
      return P;
    }
    idem.push_back(ph2.field - P.PH[a]);
    idem.push_back(pv2.field - P.PV[a]);
  }
  for (std::size_t i = 0; i < ef.n(); ++i) {
    vert.push_back(P.PV[i] - ef.V[i]);
    vert.push_back(P.PH[i]);
  }
  P.involution = field_check("(L_F S)^2 = id", inv, ef);
  P.complementary = field_check("P_H + P_V = id", comp, ef);
  P.idempotent = field_check("projector idempotence", idem, ef);
  P.vertical = field_check("P_V(V) = V, P_H(V) = 0", vert, ef);
  return P;
}

HorizontalLifts horizontal_lift(const ExtendedFrame& ef) {
  HorizontalLifts L;
  std::vector<VectorField> residuals;
  for (std::size_t i = 0; i < ef.n(); ++i) {
    FieldResult ph = apply_PH(ef, ef.W[i]);
    if (!ph.ok) {
      L.verification = failed_check("horizontal lift", ph.diagnostic, ph.witness);
      return L;
    }
    L.h.push_back(-ph.field);
  }
  for (std::size_t i = 0; i < ef.n(); ++i) {
    FieldResult s = apply_S(ef, L.h[i]);
    FieldResult pv = apply_PV(ef, L.h[i]);
    if (!s.ok || !pv.ok) {
      L.verification = failed_check("horizontal lift", s.ok ? pv.diagnostic : s.diagnostic);
      return L;
    }
    residuals.push_back(s.field - ef.V[i]);
    residuals.push_back(pv.field);
  }
  L.verification = field_check("horizontal lift", residuals, ef);
  return L;
}

FieldResult extended_connection(const ExtendedFrame& ef, const HorizontalLifts& lifts, const VectorField& X,
                                const VectorField& Y) {
  FieldResult r;
  Decomposition dy = ef.solver->decompose(Y);
  if (!dy.ok) {
    r.diagnostic = "second argument is not in W: " + dy.diagnostic;
    r.witness = dy.witness;
    return r;
  }
  Check vertical = zero_check("vertical argument",
                              std::vector<Expression>(dy.coefficients.begin() + static_cast<std::ptrdiff_t>(ef.n()),
                                                      dy.coefficients.end()),
                              ef.box(), ef.zero);
  if (!vertical.passed()) {
    r.diagnostic = "second argument is not vertical";
    r.witness = vertical.witness;
    return r;
  }
  VectorField Yh = combine(ef.chart, dy.coefficients, lifts.h);
  FieldResult ph = apply_PH(ef, X);
  FieldResult pv = apply_PV(ef, X);
  if (!ph.ok || !pv.ok) return ph.ok ? pv : ph;
  FieldResult a = apply_PV(ef, lie_bracket(ph.field, Y));
  FieldResult b = apply_S(ef, lie_bracket(pv.field, Yh));
  if (!a.ok || !b.ok) return a.ok ? b : a;
  r.field = a.field + b.field;
  r.ok = true;
  return r;
}

FieldResult vertical_connection(const ExtendedFrame& ef, std::size_t a, std::size_t b) {
  FieldResult s = apply_S(ef, lie_bracket(ef.V[a], ef.W[b]));
  if (s.ok) s.field = -s.field;
  return s;
}

ConnectionData connection_data(const ExtendedFrame& ef, const HorizontalLifts& lifts) {
  const std::size_t n = ef.n();
  ConnectionData C;
  C.sign_convention =
      "nabla_{V_i} V_j = +beta^k_ij V_k; h(V_i) = -P_H(W_i) with W_i = [F, V_i]; "
      "Gamma^i_j = (1/2) W-coefficient i of [F, W_j] (= -1/2 dF^i/dy^j in natural coordinates); "
      "Gamma^k_ij = V-coefficient k of nabla_{h(V_i)} V_j (= -1/2 d2F^k/dy^i dy^j in natural coordinates)";
  C.gamma1.assign(n, std::vector<Expression>(n));
  for (std::size_t j = 0; j < n; ++j) {
    Decomposition d = ef.solver->decompose(lie_bracket(ef.F, ef.W[j]));
    if (!d.ok) throw NumericError("[F, W_j] is not in W: " + d.diagnostic, d.witness);
    for (std::size_t i = 0; i < n; ++i) C.gamma1[i][j] = normalize(half() * d.coefficients[n + i]);
  }
  C.gamma2.assign(n, std::vector<std::vector<Expression>>(n, std::vector<Expression>(n)));
  std::vector<std::vector<VectorField>> D(n, std::vector<VectorField>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      FieldResult r = extended_connection(ef, lifts, lifts.h[i], ef.V[j]);
      if (!r.ok) throw NumericError("connection evaluation failed: " + r.diagnostic, r.witness);
      D[i][j] = r.field;
      auto c = ef.solver->coefficients(r.field);
      for (std::size_t k = 0; k < n; ++k) C.gamma2[k][i][j] = c[k];
    }
  }
  std::vector<Expression> sym;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) sym.push_back(C.gamma2[k][i][j] - C.gamma2[k][j][i]);
    }
  }
  C.torsion_symmetric = zero_check("torsion symmetry Gamma^k_ij = Gamma^k_ji", sym, ef.box(), ef.zero);
  std::vector<VectorField> tors;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      FieldResult s = apply_S(ef, lie_bracket(lifts.h[i], lifts.h[j]));
      if (!s.ok) throw NumericError("[h_i, h_j] is not in W: " + s.diagnostic, s.witness);
      tors.push_back(D[i][j] - D[j][i] - s.field);
    }
  }
  C.torsion_free = field_check("torsion D_{V_i}V_j - D_{V_j}V_i - S[h_i,h_j] = 0", tors, ef);
  return C;
}

MixedCurvature mixed_curvature(const ExtendedFrame& ef, const HorizontalLifts& lifts) {
  const std::size_t n = ef.n();
  MixedCurvature T;
  T.n = n;
  T.theta.assign(n, std::vector<std::vector<std::vector<Expression>>>(
                        n, std::vector<std::vector<Expression>>(n, std::vector<Expression>(n))));
  auto need = [](FieldResult r) {
    if (!r.ok) throw NumericError("mixed curvature: " + r.diagnostic, r.witness);
    return r.field;
  };
  std::vector<std::vector<VectorField>> vert(n, std::vector<VectorField>(n));
  std::vector<std::vector<VectorField>> hor(n, std::vector<VectorField>(n));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      vert[j][k] = need(vertical_connection(ef, j, k));
      hor[j][k] = need(extended_connection(ef, lifts, lifts.h[j], ef.V[k]));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      VectorField bracket = lie_bracket(lifts.h[i], ef.V[j]);
      for (std::size_t k = 0; k < n; ++k) {
        VectorField t1 = need(extended_connection(ef, lifts, lifts.h[i], vert[j][k]));
        VectorField t2 = need(extended_connection(ef, lifts, ef.V[j], hor[i][k]));
        VectorField t3 = need(extended_connection(ef, lifts, bracket, ef.V[k]));
        auto c = ef.solver->coefficients(t1 - t2 - t3);
        for (std::size_t l = 0; l < n; ++l) T.theta[l][i][j][k] = c[l];
      }
    }
  }
  return T;
}

std::string to_string(QuadraticVerdict::Kind k) {
  switch (k) {
    case QuadraticVerdict::Kind::Quadratic: return "Quadratic";
    case QuadraticVerdict::Kind::NotQuadratic: return "NotQuadratic";
    case QuadraticVerdict::Kind::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

QuadraticVerdict quadratic_test(const ExtendedFrame& ef, const MixedCurvature& theta) {
  std::vector<Expression> comps;
  for (const auto& a : theta.theta) {
    for (const auto& b : a) {
      for (const auto& c : b) {
        for (const auto& e : c) comps.push_back(e);
      }
    }
  }
  QuadraticVerdict q;
  q.check = zero_check("theta = 0", comps, ef.box(), ef.zero);
  switch (q.check.status) {
    case Check::Status::Pass: q.kind = QuadraticVerdict::Kind::Quadratic; break;
    case Check::Status::Fail: {
      q.kind = QuadraticVerdict::Kind::NotQuadratic;
      for (const auto& e : comps) {
        double v = 0.0;
        if (CompiledExpression(e, ef.chart->names()).try_eval(q.check.witness, v)) {
          q.witness_magnitude = std::max(q.witness_magnitude, std::abs(v));
        }
      }
      break;
    }
    case Check::Status::Inconclusive: q.kind = QuadraticVerdict::Kind::Inconclusive; break;
  }
  return q;
}

// --------------------------------------------------------- cross-section

CrossSection find_cross_section(const ExtendedFrame& ef, const std::vector<Expression>& b,
                                const AnalysisOptions& options) {
  CrossSection cs;
  const auto& names = ef.chart->names();
  const std::size_t m = names.size();
  const std::size_t n = b.size();
  std::vector<CompiledExpression> fb;
  std::vector<std::vector<CompiledExpression>> jac(n);
  for (std::size_t i = 0; i < n; ++i) {
    fb.emplace_back(b[i], names);
    for (std::size_t j = 0; j < m; ++j) jac[i].emplace_back(differentiate(b[i], names[j]), names);
  }
  const SamplingBox& box = ef.box();
  HaltonSampler starts(box, options.seed);
  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd J(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  auto eval = [&](const std::vector<double>& z, bool with_jacobian) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      if (!fb[i].try_eval(z, v) || !std::isfinite(v)) return false;
      r(static_cast<Eigen::Index>(i)) = v;
      if (!with_jacobian) continue;
      for (std::size_t j = 0; j < m; ++j) {
        if (!jac[i][j].try_eval(z, v) || !std::isfinite(v)) return false;
        J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      }
    }
    return true;
  };
  std::size_t failures = 0;
  for (std::size_t s = 0; s < options.newton_starts; ++s) {
    // The box centre first, then quasi-random starts.
    std::vector<double> z = s == 0 ? box.center() : starts.next();
    bool converged = false;
    for (int it = 0; it < options.newton_iterations; ++it) {
      if (!eval(z, true)) break;
      if (r.norm() < options.newton_tolerance) {
        converged = true;
        break;
      }
      Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(r);
      for (std::size_t j = 0; j < m; ++j) z[j] -= step(static_cast<Eigen::Index>(j));
      if (!box.contains(z, 0.5)) break;
    }
    if (!converged && eval(z, false) && r.norm() < options.newton_tolerance) converged = true;
    if (!converged || !box.contains(z)) {
      ++failures;
      continue;
    }
    bool dup = false;
    for (const auto& p : cs.all_points) {
      double d = 0.0;
      for (std::size_t j = 0; j < m; ++j) d = std::max(d, std::abs(p[j] - z[j]) / box.width(j));
      dup = dup || d < 1e-8;
    }
    if (!dup) cs.all_points.push_back(z);
  }
  if (cs.all_points.empty()) {
    cs.detail = "cross-section not found in box (" + std::to_string(failures) + " starts failed)";
    return cs;
  }
  auto centre = box.center();
  auto dist = [&](const std::vector<double>& p) {
    double d = 0.0;
    for (std::size_t j = 0; j < m; ++j) d += std::pow((p[j] - centre[j]) / box.width(j), 2);
    return d;
  };
  cs.point = *std::min_element(cs.all_points.begin(), cs.all_points.end(),
                               [&](const auto& a, const auto& c) { return dist(a) < dist(c); });
  eval(cs.point, false);
  cs.residual = r.norm();
  cs.found = true;
  cs.detail = std::to_string(cs.all_points.size()) + " distinct points from " + std::to_string(options.newton_starts) +
              " starts; using the one nearest the box centre";
  return cs;
}

// ------------------------------------------------------------- classify

std::string to_string(AnalysisReport::Case c) {
  switch (c) {
    case AnalysisReport::Case::Case1: return "Case1-SODE-with-parameters";
    case AnalysisReport::Case::Case2: return "Case2-time-dependent";
    case AnalysisReport::Case::NotSecondOrder: return "NotSecondOrder";
  }
  return "NotSecondOrder";
}

std::vector<Check> AnalysisReport::identity_checks() const {
  std::vector<Check> out;
  if (beta_integrability) out.push_back(*beta_integrability);
  if (beta && beta->symmetric.status != Check::Status::Inconclusive) out.push_back(beta->symmetric);
  if (nijenhuis) out.push_back(*nijenhuis);
  if (projectors) {
    out.push_back(projectors->involution);
    out.push_back(projectors->complementary);
    out.push_back(projectors->idempotent);
    out.push_back(projectors->vertical);
  }
  if (lifts) out.push_back(lifts->verification);
  if (connection) {
    out.push_back(connection->torsion_symmetric);
    out.push_back(connection->torsion_free);
  }
  return out;
}

AnalysisReport classify(const SecondOrderProblem& p, const ClassifyOptions& what) {
  AnalysisReport rep;
  rep.m = p.m();
  rep.n = p.n();
  rep.v_involutive.involutive = true;
  rep.regularity = check_regularity(p);
  if (!rep.regularity.pass) {
    rep.reason = "regularity";
    return rep;
  }
  ExtendedFrame ef = build_W(p);
  rep.frame = ef;
  rep.w_involutive = check_W_involutive(ef);
  if (!rep.w_involutive->involutive) {
    rep.reason = "W is not involutive";
    return rep;
  }

  Decomposition dF = ef.solver->decompose(p.F());
  Check fin;
  fin.name = "F in W";
  if (dF.ok) {
    fin.status = Check::Status::Pass;
    fin.exact = dF.exact;
    fin.max_residual = dF.max_residual;
    rep.F_a.assign(dF.coefficients.begin(), dF.coefficients.begin() + static_cast<std::ptrdiff_t>(p.n()));
    rep.F_b.assign(dF.coefficients.begin() + static_cast<std::ptrdiff_t>(p.n()), dF.coefficients.end());
  } else {
    fin.status = Check::Status::Fail;
    fin.witness = dF.witness;
    fin.detail = dF.diagnostic;
  }
  rep.F_in_W = fin;

  bool case1 = dF.ok;
  if (!case1) {
    std::vector<VectorField> fields = ef.V;
    fields.insert(fields.end(), ef.W.begin(), ef.W.end());
    fields.push_back(p.F());
    RankReport rr = frame_rank(fields, p.options().samples, p.options().seed);
    bool independent = std::all_of(rr.ranks.begin(), rr.ranks.end(), [&](std::size_t r) { return r == 2 * p.n() + 1; });
    rep.F_independent = rr;
    if (!independent) {
      rep.reason = "F neither lies in W nor is independent of W on the sampled box (mixed)";
      return rep;
    }
  }

  Projectors P = projectors(ef);
  rep.F_preserves_W = P.F_preserves_W;
  if (!P.F_preserves_W.passed()) {
    rep.reason = "[F, W] is not contained in W";
    return rep;
  }
  rep.classification = case1 ? AnalysisReport::Case::Case1 : AnalysisReport::Case::Case2;
  rep.parameters = case1 ? p.m() - 2 * p.n() : p.m() - 2 * p.n() - 1;
  if (!case1) rep.warnings.push_back("independence of F from W is certified only at the sampled points");

  if (ef.commuting) {
    rep.beta = beta_coefficients(ef);
    rep.beta_integrability = verify_beta_integrability(ef, *rep.beta);
    if (!rep.beta_integrability->passed()) {
      rep.warnings.push_back("internal inconsistency: beta integrability conditions fail");
    }
    rep.adaptation = adapt_commuting_basis(ef, *rep.beta);
    rep.working = rep.adaptation->adapted ? *rep.adaptation->adapted : ef;
  } else {
    rep.warnings.push_back("V basis does not commute; beta analysis skipped");
    rep.working = ef;
  }

  if (case1) {
    rep.cross_section = find_cross_section(ef, rep.F_b, p.options());
    if (!rep.cross_section->found) rep.warnings.push_back("cross-section not found in box");
  }

  const ExtendedFrame& wf = *rep.working;
  if (what.connection || what.curvature) {
    rep.nijenhuis = nijenhuis_check(wf);
    rep.projectors = rep.adaptation && rep.adaptation->adapted && rep.adaptation->method != BasisAdaptation::Method::Identity
                         ? projectors(wf)
                         : P;
    rep.lifts = horizontal_lift(wf);
    rep.connection = connection_data(wf, *rep.lifts);
    for (const auto& c : rep.identity_checks()) {
      if (c.status == Check::Status::Fail) rep.warnings.push_back("internal inconsistency: " + c.name + " fails");
    }
  }
  if (what.curvature) {
    rep.theta = mixed_curvature(wf, *rep.lifts);
    rep.quadratic = quadratic_test(wf, *rep.theta);
  }
  return rep;
}

}  // namespace sode
