#include "sode/geometry.hpp"

#include "sode/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <set>

namespace sode {

// --------------------------------------------------------------------- chart

Chart::Chart(std::vector<std::string> names, std::vector<double> lo, std::vector<double> hi, std::uint64_t seed)
    : seed_(seed) {
  if (names.empty()) throw InputError("chart needs at least one coordinate");
  if (lo.size() != names.size() || hi.size() != names.size()) throw InputError("box dimension does not match the chart");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!seen.insert(names[i]).second) throw InputError("duplicate coordinate name '" + names[i] + "'");
    if (!(hi[i] > lo[i])) throw InputError("degenerate box interval for '" + names[i] + "'");
  }
  box_.names = std::move(names);
  box_.lo = std::move(lo);
  box_.hi = std::move(hi);
}

std::size_t Chart::index_of(std::string_view name) const {
  auto it = std::find(box_.names.begin(), box_.names.end(), name);
  return static_cast<std::size_t>(it - box_.names.begin());
}

// -------------------------------------------------------------- vector fields

VectorField::VectorField(ChartPtr chart, std::vector<Expression> components)
    : chart_(std::move(chart)), comps_(std::move(components)) {
  if (!chart_) throw InputError("vector field without a chart");
  if (comps_.size() != chart_->dim()) {
    throw InputError("vector field has " + std::to_string(comps_.size()) + " components on a chart of dimension " +
                     std::to_string(chart_->dim()));
  }
}

VectorField VectorField::coordinate(ChartPtr chart, std::size_t i) {
  std::vector<Expression> c(chart->dim(), Expression(0));
  c[i] = Expression(1);
  return VectorField(std::move(chart), std::move(c));
}

VectorField VectorField::zero(ChartPtr chart) {
  std::vector<Expression> c(chart->dim(), Expression(0));
  return VectorField(std::move(chart), std::move(c));
}

namespace {

void require_same_chart(const VectorField& a, const VectorField& b) {
  if (!a.chart() || !b.chart() || !a.chart()->same_as(*b.chart())) throw InputError("vector fields live on different charts");
}

}  // namespace

Expression VectorField::apply(const Expression& f) const {
  std::vector<Expression> terms;
  for (std::size_t j = 0; j < comps_.size(); ++j) {
    if (comps_[j].is_literal_zero()) continue;
    Expression d = differentiate(f, chart_->names()[j]);
    if (d.is_literal_zero()) continue;
    terms.push_back(comps_[j] * d);
  }
  return normalize(Expression::sum(std::move(terms)));
}

VectorField VectorField::normalized() const {
  std::vector<Expression> c;
  c.reserve(comps_.size());
  for (const auto& e : comps_) c.push_back(normalize(e));
  return VectorField(chart_, std::move(c));
}

VectorField operator+(const VectorField& a, const VectorField& b) {
  require_same_chart(a, b);
  std::vector<Expression> c;
  for (std::size_t i = 0; i < a.dim(); ++i) c.push_back(normalize(a[i] + b[i]));
  return VectorField(a.chart_, std::move(c));
}

VectorField operator-(const VectorField& a, const VectorField& b) {
  require_same_chart(a, b);
  std::vector<Expression> c;
  for (std::size_t i = 0; i < a.dim(); ++i) c.push_back(normalize(a[i] - b[i]));
  return VectorField(a.chart_, std::move(c));
}

VectorField operator*(const Expression& f, const VectorField& a) {
  std::vector<Expression> c;
  for (std::size_t i = 0; i < a.dim(); ++i) c.push_back(normalize(f * a[i]));
  return VectorField(a.chart_, std::move(c));
}

VectorField VectorField::operator-() const { return Expression(-1) * *this; }

std::vector<double> VectorField::at(std::span<const double> point) const {
  std::vector<double> out(comps_.size());
  for (std::size_t i = 0; i < comps_.size(); ++i) out[i] = CompiledExpression(comps_[i], chart_->names())(point);
  return out;
}

std::string VectorField::to_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < comps_.size(); ++i) {
    if (i) s += ", ";
    s += sode::to_string(comps_[i]);
  }
  return s + ")";
}

CompiledField::CompiledField(const VectorField& X) {
  for (const auto& c : X.components()) comps_.emplace_back(c, X.chart()->names());
}

bool CompiledField::eval(std::span<const double> point, std::span<double> out) const {
  for (std::size_t i = 0; i < comps_.size(); ++i) {
    if (!comps_[i].try_eval(point, out[i])) return false;
  }
  return true;
}

VectorField lie_bracket(const VectorField& X, const VectorField& Y) {
  require_same_chart(X, Y);
  std::vector<Expression> c;
  c.reserve(X.dim());
  for (std::size_t k = 0; k < X.dim(); ++k) c.push_back(normalize(X.apply(Y[k]) - Y.apply(X[k])));
  return VectorField(X.chart(), std::move(c));
}

// ----------------------------------------------------------------------- rank

RankReport frame_rank(std::span<const VectorField> fields, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw InputError("frame_rank needs at least one sample");
  if (fields.empty()) throw InputError("frame_rank of an empty frame");
  const Chart& chart = *fields[0].chart();
  std::vector<CompiledField> compiled;
  for (const auto& f : fields) {
    require_same_chart(fields[0], f);
    compiled.emplace_back(f);
  }
  const std::size_t m = chart.dim();
  const std::size_t k = fields.size();
  RankReport rep;
  rep.samples = samples;
  rep.worst_conditioning = std::numeric_limits<double>::infinity();
  HaltonSampler sampler(chart.box(), seed);
  std::vector<std::vector<double>> evaluated;
  Eigen::MatrixXd M(m, k);
  std::vector<double> col(m);
  for (std::size_t s = 0; s < samples; ++s) {
    auto p = sampler.next();
    bool good = true;
    for (std::size_t j = 0; j < k && good; ++j) {
      good = compiled[j].eval(p, col);
      for (std::size_t i = 0; i < m && good; ++i) {
        if (!std::isfinite(col[i])) good = false;
        M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
      }
    }
    if (!good) {
      rep.skipped_points.push_back(std::move(p));
      continue;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& sv = svd.singularValues();
    double tol = 1e-9 * (sv.size() ? sv(0) : 0.0);
    std::size_t r = 0;
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > tol && sv(i) > 0.0) {
        ++r;
        smallest = std::min(smallest, sv(i));
      }
    }
    if (r > 0) rep.worst_conditioning = std::min(rep.worst_conditioning, smallest);
    rep.ranks.push_back(r);
    evaluated.push_back(std::move(p));
  }
  if (rep.ranks.empty()) throw NumericError("frame_rank: every sample point hit a domain error");
  rep.claimed_rank = *std::max_element(rep.ranks.begin(), rep.ranks.end());
  for (std::size_t s = 0; s < rep.ranks.size(); ++s) {
    if (rep.ranks[s] < rep.claimed_rank) rep.deficient_points.push_back(evaluated[s]);
  }
  if (!std::isfinite(rep.worst_conditioning)) rep.worst_conditioning = 0.0;
  return rep;
}

RankReport frame_rank(const Frame& fr, std::size_t samples, std::uint64_t seed) {
  return frame_rank(std::span<const VectorField>(fr.fields()), samples, seed);
}

// ---------------------------------------------------------------------- frames

Frame::Frame(ChartPtr chart, std::vector<VectorField> fields, std::size_t samples, std::uint64_t seed)
    : chart_(std::move(chart)), fields_(std::move(fields)) {
  if (fields_.empty()) throw InputError("empty frame");
  if (fields_.size() > chart_->dim()) throw InputError("frame has more fields than the chart dimension");
  for (const auto& f : fields_) {
    if (!f.chart() || !f.chart()->same_as(*chart_)) throw InputError("frame field on a different chart");
  }
  RankReport rep = frame_rank(*this, samples, seed);
  if (rep.claimed_rank < fields_.size() || !rep.deficient_points.empty()) {
    throw InputError("frame is not of constant full rank " + std::to_string(fields_.size()) + " on the box (rank " +
                     std::to_string(rep.claimed_rank) + ", " + std::to_string(rep.deficient_points.size()) +
                     " deficient samples)");
  }
}

Frame Frame::unchecked(ChartPtr chart, std::vector<VectorField> fields) {
  Frame f;
  f.chart_ = std::move(chart);
  f.fields_ = std::move(fields);
  return f;
}

// ------------------------------------------------------------- decomposition

FrameSolver::FrameSolver(const Frame& fr, const ZeroTestOptions& options) : frame_(fr), options_(options) {
  const std::size_t m = fr.chart()->dim();
  const std::size_t k = fr.size();
  const SamplingBox& box = fr.chart()->box();
  // Row-reduce the m x k component matrix, tracking row operations in E.
  std::vector<std::vector<Expression>> M(m, std::vector<Expression>(k));
  std::vector<std::vector<Expression>> E(m, std::vector<Expression>(m, Expression(0)));
  for (std::size_t i = 0; i < m; ++i) {
    E[i][i] = Expression(1);
    for (std::size_t j = 0; j < k; ++j) M[i][j] = normalize(fr[j][i]);
  }
  std::vector<bool> used(m, false);
  std::vector<std::size_t> pivot_row(k);
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t best = m;
    bool ambiguous = false;
    for (std::size_t r = 0; r < m; ++r) {
      if (used[r] || M[r][col].is_literal_zero()) continue;
      if (best < m && M[r][col].size() >= M[best][col].size()) continue;
      ZeroVerdict v = is_zero(M[r][col], box, options_);
      if (v.nonzero()) {
        best = r;
      } else if (!v.zero()) {
        ambiguous = true;
      }
    }
    if (best == m) {
      diagnostic_ = ambiguous ? "no unambiguous pivot in column " + std::to_string(col)
                              : "frame is rank deficient at column " + std::to_string(col);
      return;
    }
    used[best] = true;
    pivot_row[col] = best;
    Expression inv = normalize(Expression(1) / M[best][col]);
    for (auto& e : M[best]) e = normalize(inv * e);
    for (auto& e : E[best]) e = normalize(inv * e);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == best || M[r][col].is_literal_zero()) continue;
      Expression factor = M[r][col];
      for (std::size_t j = 0; j < k; ++j) {
        if (!M[best][j].is_literal_zero()) M[r][j] = normalize(M[r][j] - factor * M[best][j]);
      }
      for (std::size_t j = 0; j < m; ++j) {
        if (!E[best][j].is_literal_zero()) E[r][j] = normalize(E[r][j] - factor * E[best][j]);
      }
    }
  }
  left_inverse_.resize(k);
  for (std::size_t col = 0; col < k; ++col) left_inverse_[col] = E[pivot_row[col]];
  ok_ = true;
}

std::vector<Expression> FrameSolver::coefficients(const VectorField& X) const {
  if (!ok_) throw InputError("frame solver unavailable: " + diagnostic_);
  std::vector<Expression> c;
  for (const auto& row : left_inverse_) {
    std::vector<Expression> terms;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!row[i].is_literal_zero() && !X[i].is_literal_zero()) terms.push_back(row[i] * X[i]);
    }
    c.push_back(normalize(Expression::sum(std::move(terms))));
  }
  return c;
}

Decomposition FrameSolver::decompose(const VectorField& X) const {
  Decomposition d;
  if (!ok_) {
    d.diagnostic = diagnostic_;
    return d;
  }
  d.coefficients = coefficients(X);
  d.exact = true;
  const SamplingBox& box = frame_.chart()->box();
  for (std::size_t i = 0; i < X.dim(); ++i) {
    std::vector<Expression> terms{X[i]};
    for (std::size_t j = 0; j < frame_.size(); ++j) {
      if (!d.coefficients[j].is_literal_zero() && !frame_[j][i].is_literal_zero()) {
        terms.push_back(-(d.coefficients[j] * frame_[j][i]));
      }
    }
    ZeroVerdict v = is_zero(Expression::sum(std::move(terms)), box, options_);
    if (v.zero()) continue;
    d.exact = false;
    if (v.nonzero()) {
      d.witness = v.witness;
      d.diagnostic = "field is not in the span of the frame (component " + std::to_string(i) + ")";
      return d;
    }
    if (v.evaluated == 0) {
      d.diagnostic = "span residual could not be evaluated: " + v.diagnostic;
      return d;
    }
    d.max_residual = std::max(d.max_residual, v.max_relative_residual);
  }
  d.ok = true;
  return d;
}

Decomposition decompose_in_frame(const VectorField& X, const Frame& fr, const ZeroTestOptions& options) {
  return FrameSolver(fr, options).decompose(X);
}

InvolutivityVerdict is_involutive(const Frame& fr, const ZeroTestOptions& options) {
  InvolutivityVerdict v;
  FrameSolver solver(fr, options);
  if (!solver.ok()) {
    v.diagnostic = solver.diagnostic();
    return v;
  }
  for (std::size_t i = 0; i < fr.size(); ++i) {
    for (std::size_t j = i + 1; j < fr.size(); ++j) {
      Decomposition d = solver.decompose(lie_bracket(fr[i], fr[j]));
      if (!d.ok) {
        v.i = i;
        v.j = j;
        v.witness = d.witness;
        v.diagnostic = "bracket of fields " + std::to_string(i) + " and " + std::to_string(j) + ": " + d.diagnostic;
        return v;
      }
    }
  }
  v.involutive = true;
  return v;
}

}  // namespace sode
