#include "sode/straighten.hpp"

#include "sode/errors.hpp"
#include "straighten/beta_flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sode {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd identity(std::size_t n) {
  return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

Eigen::MatrixXd unpack_A(const std::vector<double>& y, std::size_t m, std::size_t n) {
  return Eigen::Map<const RowMajor>(y.data() + m, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

std::vector<double> field_at(const OdeSystem& sys, std::span<const double> y) {
  std::vector<double> out(sys.dim);
  if (!sys.rhs(y, out)) throw NumericError("field not evaluable", std::vector<double>(y.begin(), y.end()));
  return out;
}

Stat stat(std::vector<double> v) {
  Stat s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.max = v.back();
  const std::size_t k = v.size() / 2;
  s.median = v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
  return s;
}

double max_abs(const Eigen::MatrixXd& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

std::size_t default_grid(std::size_t m) { return m <= 4 ? 10 : 5; }

// ------------------------------------------------------------- A-system

std::size_t BasisOdeSolution::n() const { return flow_->n(); }

BasisOdeSolution::Value BasisOdeSolution::at(std::span<const double> section_point, std::span<const double> sigma) const {
  const std::size_t m = flow_->m(), n = flow_->n();
  if (section_point.size() != m || sigma.size() != n) throw InputError("solve_basis_ode: dimension mismatch");
  auto run = [&](bool reversed) {
    std::vector<double> y(flow_->state_dim(), 0.0);
    std::copy(section_point.begin(), section_point.end(), y.begin());
    for (std::size_t j = 0; j < n; ++j) y[m + j * n + j] = 1.0;
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t l = reversed ? n - 1 - step : step;
      try {
        integrate(flow_->system(l, false, options_.integrator, options_.singular_det), y, sigma[l], options_.integrator);
      } catch (const NumericError& e) {
        throw NumericError(std::string("A-system: A became singular or the path left the box (") + e.what() + ")",
                           e.last_point());
      }
    }
    return y;
  };
  std::vector<double> a = run(false);
  Value v;
  v.point.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(m));
  v.A = unpack_A(a, m, n);
  if (std::abs(v.A.determinant()) < options_.singular_det) {
    throw NumericError("A-system: A is singular at the requested point", v.point);
  }
  if (n > 1) {
    std::vector<double> b = run(true);
    for (std::size_t i = 0; i < a.size(); ++i) v.path_discrepancy = std::max(v.path_discrepancy, std::abs(a[i] - b[i]));
    if (v.path_discrepancy > options_.path_tolerance) {
      throw NumericError("A-system: path discrepancy " + std::to_string(v.path_discrepancy) + " exceeds tolerance",
                         v.point);
    }
  }
  return v;
}

BasisOdeSolution solve_basis_ode(const ExtendedFrame& ef, const BetaCoefficients& b, const StraightenOptions& options) {
  if (!ef.commuting) throw InputError("solve_basis_ode requires a commuting V basis");
  BasisOdeSolution s;
  s.flow_ = std::make_shared<const BetaFlow>(ef, b);
  s.options_ = options;
  return s;
}

// ----------------------------------------------------- normal coordinates

struct CoordinateTransform::Flows {
  std::optional<FlowMap> F;
  std::vector<FlowMap> minus_W;
  std::vector<FlowMap> V;                  // identity or symbolic adaptation
  std::shared_ptr<const BetaFlow> beta;  // numeric adaptation
  std::vector<std::vector<CompiledExpression>> A;  // symbolic adaptation
  std::vector<CompiledExpression> b;               // W-coefficients of F, case 1
  IntegratorOptions integrator;
  double singular_det = 1e-10;
};

CoordinateTransform::Evaluation CoordinateTransform::evaluate(std::span<const double> q, bool with_jacobian) const {
  if (q.size() != m_) throw InputError("parameter dimension mismatch");
  const Flows& fl = *flows_;
  const std::size_t p = t_count();
  const std::size_t slice_count = static_cast<std::size_t>(slice_.cols());
  const std::size_t slice_offset = kind_ == Kind::Case2 ? 1 : 0;

  std::vector<double> z = z0_;
  for (std::size_t c = 0; c < slice_count; ++c) {
    for (std::size_t r = 0; r < m_; ++r) z[r] += slice_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * q[slice_offset + c];
  }
  Eigen::MatrixXd T;
  std::vector<std::size_t> param_of_column;
  if (with_jacobian) {
    T = slice_;
    for (std::size_t c = 0; c < slice_count; ++c) param_of_column.push_back(slice_offset + c);
  }
  auto append = [&](const std::vector<double>& col, std::size_t param) {
    if (!with_jacobian) return;
    T.conservativeResize(T.rows(), T.cols() + 1);
    for (std::size_t r = 0; r < static_cast<std::size_t>(T.rows()); ++r) T(static_cast<Eigen::Index>(r), T.cols() - 1) = col[r];
    param_of_column.push_back(param);
  };
  auto step = [&](const FlowMap& f, double s, std::size_t param) {
    if (with_jacobian) {
      z = f.flow(z, s, T);
      append(field_at(f.system(), z), param);
    } else {
      z = f(z, s);
    }
  };
  if (kind_ == Kind::Case2) step(*fl.F, q[0], 0);
  for (std::size_t i = 0; i < n_; ++i) step(fl.minus_W[i], q[p + i], p + i);

  Evaluation ev;
  if (fl.beta) {
    std::vector<double> y(fl.beta->state_dim(), 0.0);
    std::copy(z.begin(), z.end(), y.begin());
    for (std::size_t j = 0; j < n_; ++j) y[m_ + j * n_ + j] = 1.0;
    Eigen::MatrixXd T2;
    if (with_jacobian) {
      T2 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(y.size()), T.cols());
      T2.topRows(static_cast<Eigen::Index>(m_)) = T;
    }
    for (std::size_t i = 0; i < n_; ++i) {
      OdeSystem sys = fl.beta->system(i, true, fl.integrator, fl.singular_det);
      integrate(sys, y, q[p + n_ + i], fl.integrator, with_jacobian ? &T2 : nullptr);
      if (with_jacobian) {
        auto col = field_at(sys, y);
        T2.conservativeResize(T2.rows(), T2.cols() + 1);
        for (std::size_t r = 0; r < col.size(); ++r) T2(static_cast<Eigen::Index>(r), T2.cols() - 1) = col[r];
        param_of_column.push_back(p + n_ + i);
      }
    }
    ev.point.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(m_));
    ev.A = unpack_A(y, m_, n_);
    if (with_jacobian) T = T2.topRows(static_cast<Eigen::Index>(m_));
  } else {
    for (std::size_t i = 0; i < n_; ++i) step(fl.V[i], q[p + n_ + i], p + n_ + i);
    ev.point = z;
    ev.A = identity(n_);
    if (!fl.A.empty()) {
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
          double v = 0.0;
          if (!fl.A[i][j].try_eval(z, v)) throw NumericError("adapted basis not evaluable", z);
          ev.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
      }
    }
  }
  if (with_jacobian) {
    ev.jacobian.resize(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    for (std::size_t c = 0; c < param_of_column.size(); ++c) {
      ev.jacobian.col(static_cast<Eigen::Index>(param_of_column[c])) = T.col(static_cast<Eigen::Index>(c));
    }
  }
  return ev;
}

Eigen::MatrixXd CoordinateTransform::jacobian_fd(std::span<const double> q, double h) const {
  Eigen::MatrixXd J(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
  std::vector<double> a(q.begin(), q.end());
  for (std::size_t c = 0; c < m_; ++c) {
    std::vector<double> plus = a, minus = a;
    plus[c] += h;
    minus[c] -= h;
    auto zp = map(plus), zm = map(minus);
    for (std::size_t r = 0; r < m_; ++r) J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (zp[r] - zm[r]) / (2 * h);
  }
  return J;
}

std::optional<std::vector<double>> CoordinateTransform::adapted_b(std::span<const double> z, const Eigen::MatrixXd& A) const {
  const auto& b = flows_->b;
  if (b.empty()) return std::nullopt;
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    double v = 0.0;
    if (!b[i].try_eval(z, v)) return std::nullopt;
    row(static_cast<Eigen::Index>(i)) = v;
  }
  Eigen::RowVectorXd out = row * A.inverse();
  return std::vector<double>(out.data(), out.data() + out.size());
}

CoordinateTransform build_normal_coordinates(const AnalysisReport& rep, const StraightenOptions& options) {
  using Case = AnalysisReport::Case;
  if (rep.classification == Case::NotSecondOrder || !rep.frame) {
    throw InputError("straightening needs a Case1 or Case2 classification");
  }
  const ExtendedFrame& ef = *rep.frame;
  CoordinateTransform tr;
  tr.kind_ = rep.classification == Case::Case1 ? CoordinateTransform::Kind::Case1 : CoordinateTransform::Kind::Case2;
  tr.m_ = ef.chart->dim();
  tr.n_ = ef.n();
  tr.chart_ = ef.chart;
  const std::size_t m = tr.m_, n = tr.n_;

  if (tr.kind_ == CoordinateTransform::Kind::Case1) {
    if (!rep.cross_section || !rep.cross_section->found) throw NumericError("cross-section not found in box");
    tr.z0_ = rep.cross_section->point;
  } else {
    tr.z0_ = ef.box().center();
  }
  if (!rep.adaptation) throw InputError("V basis does not commute; cannot adapt it");
  tr.method_ = rep.adaptation->method;
  if (tr.method_ == BasisAdaptation::Method::Failed) throw NumericError("basis adaptation failed: " + rep.adaptation->detail);
  if (options.force_numeric_adaptation) tr.method_ = BasisAdaptation::Method::Numeric;

  auto flows = std::make_shared<CoordinateTransform::Flows>();
  flows->integrator = options.integrator;
  flows->singular_det = options.singular_det;
  if (tr.kind_ == CoordinateTransform::Kind::Case2) flows->F.emplace(ef.F, options.integrator);
  for (const auto& w : ef.W) flows->minus_W.emplace_back(-w, options.integrator);
  switch (tr.method_) {
    case BasisAdaptation::Method::Numeric:
      if (!rep.beta) throw InputError("numeric adaptation needs beta coefficients");
      flows->beta = std::make_shared<const BetaFlow>(ef, *rep.beta);
      break;
    case BasisAdaptation::Method::Symbolic:
      for (const auto& v : rep.adaptation->adapted->V) flows->V.emplace_back(v, options.integrator);
      for (const auto& row : rep.adaptation->A) {
        std::vector<CompiledExpression> r;
        for (const auto& e : row) r.emplace_back(e, ef.chart->names());
        flows->A.push_back(std::move(r));
      }
      break;
    default:
      for (const auto& v : ef.V) flows->V.emplace_back(v, options.integrator);
  }
  if (tr.kind_ == CoordinateTransform::Kind::Case1) {
    for (const auto& e : rep.F_b) flows->b.emplace_back(e, ef.chart->names());
  }

  // Transversal slice: left singular vectors completing span{V, W (, F)} at z0.
  std::vector<VectorField> span_fields = ef.V;
  span_fields.insert(span_fields.end(), ef.W.begin(), ef.W.end());
  if (tr.kind_ == CoordinateTransform::Kind::Case2) span_fields.push_back(ef.F);
  Eigen::MatrixXd M(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(span_fields.size()));
  for (std::size_t c = 0; c < span_fields.size(); ++c) {
    auto v = span_fields[c].at(tr.z0_);
    for (std::size_t r = 0; r < m; ++r) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r];
  }
  const std::size_t k = span_fields.size();
  tr.slice_.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m - k));
  if (m > k) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU);
    tr.slice_ = svd.matrixU().rightCols(static_cast<Eigen::Index>(m - k));
    for (Eigen::Index c = 0; c < tr.slice_.cols(); ++c) {
      Eigen::Index arg = 0;
      tr.slice_.col(c).cwiseAbs().maxCoeff(&arg);
      if (tr.slice_(arg, c) < 0) tr.slice_.col(c) *= -1.0;
    }
  }

  const std::size_t p = m - 2 * n;
  for (std::size_t i = 0; i < p; ++i) tr.names_.push_back("t" + std::to_string(i + 1));
  for (std::size_t i = 0; i < n; ++i) tr.names_.push_back("x" + std::to_string(i + 1));
  for (std::size_t i = 0; i < n; ++i) tr.names_.push_back("y" + std::to_string(i + 1));
  std::string comp = tr.kind_ == CoordinateTransform::Kind::Case2 ? "t1: flow of F; " : "";
  if (m > k) comp += "t: straight slice along singular-vector complement; ";
  comp += "x: flows of -W_1..-W_n in ascending order; y: flows of the ";
  comp += tr.method_ == BasisAdaptation::Method::Numeric ? "numerically adapted" : "adapted";
  comp += " V basis in ascending order; fibre coordinates redefined as the x-components of F";
  tr.composition_ = comp;
  tr.flows_ = flows;

  std::vector<double> zero(m, 0.0);
  auto ev = tr.evaluate(zero);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ev.jacobian);
  const auto& sv = svd.singularValues();
  tr.base_conditioning_ = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  if (!(tr.base_conditioning_ < options.conditioning_limit)) {
    throw NumericError("singular Jacobian of the coordinate map at the base point", tr.z0_);
  }
  return tr;
}

// ------------------------------------------------------------- residuals

namespace {

struct Pushed {
  CoordinateTransform::Evaluation ev;
  Eigen::VectorXd G;  // (D Phi)^-1 F
};

Pushed push(const CoordinateTransform& tr, const CompiledField& F, std::span<const double> q) {
  Pushed p;
  p.ev = tr.evaluate(q);
  std::vector<double> f(tr.m());
  if (!F.eval(p.ev.point, f)) throw NumericError("F not evaluable", p.ev.point);
  Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(f.size()));
  p.G = p.ev.jacobian.fullPivLu().solve(fv);
  return p;
}

}  // namespace

ResidualReport pushforward_residuals(const CoordinateTransform& tr, const VectorField& F, const StraightenOptions& options) {
  const std::size_t m = tr.m(), n = tr.n(), p = tr.t_count();
  ResidualReport res;
  res.grid = options.grid ? options.grid : default_grid(m);
  if (res.grid < 3) throw InputError("grid needs at least 3 points per coordinate");
  double half = INFINITY;
  for (std::size_t i = 0; i < m; ++i) half = std::min(half, 0.5 * tr.chart()->box().width(i));
  res.radius = options.radius * half;
  res.parameter_names = tr.parameter_names();
  CompiledField Fc(F);
  const bool case2 = tr.kind() == CoordinateTransform::Kind::Case2;
  const std::size_t g = res.grid;

  std::size_t total = 1;
  for (std::size_t i = 0; i < m; ++i) total *= g;
  const std::size_t group = static_cast<std::size_t>(std::pow(g, n));
  std::vector<double> axis(g);
  for (std::size_t i = 0; i < g; ++i) axis[i] = -res.radius + 2.0 * res.radius * static_cast<double>(i) / static_cast<double>(g - 1);

  std::optional<Pushed> base;  // s = 0 evaluation shared by a (t, x) column
  std::vector<double> t_res, xy, x_y, aff, jac, cond;
  for (std::size_t idx = 0; idx < total; ++idx) {
    NodeResidual node;
    node.q.resize(m);
    std::size_t rem = idx;
    for (std::size_t c = m; c-- > 0;) {
      node.q[c] = axis[rem % g];
      rem /= g;
    }
    try {
      if (idx % group == 0) {
        std::vector<double> q0 = node.q;
        for (std::size_t i = 0; i < n; ++i) q0[p + n + i] = 0.0;
        base = push(tr, Fc, q0);
      }
      Pushed cur = push(tr, Fc, node.q);
      node.point = cur.ev.point;
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(cur.ev.jacobian);
      const auto& sv = svd.singularValues();
      node.conditioning = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY;

      for (std::size_t i = 0; i < p; ++i) {
        double expected = case2 && i == 0 ? 1.0 : 0.0;
        node.t_residual = std::max(node.t_residual, std::abs(cur.G(static_cast<Eigen::Index>(i)) - expected));
      }
      node.ytilde.resize(n);
      for (std::size_t i = 0; i < n; ++i) node.ytilde[i] = cur.G(static_cast<Eigen::Index>(p + i));

      // Independent recomputation of the x-components through the difference Jacobian.
      Eigen::MatrixXd Jfd = tr.jacobian_fd(node.q, options.jacobian_check_step);
      node.jacobian_agreement = max_abs(cur.ev.jacobian - Jfd) / std::max(1.0, max_abs(cur.ev.jacobian));
      std::vector<double> f(m);
      Fc.eval(node.point, f);
      Eigen::VectorXd Gfd = Jfd.fullPivLu().solve(Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(m)));
      for (std::size_t i = 0; i < n; ++i) {
        node.x_minus_ytilde = std::max(node.x_minus_ytilde, std::abs(Gfd(static_cast<Eigen::Index>(p + i)) - node.ytilde[i]));
        double s = node.q[p + n + i];
        node.x_minus_y = std::max(node.x_minus_y, std::abs(node.ytilde[i] - base->G(static_cast<Eigen::Index>(p + i)) - s));
      }

      // Derivatives of the new fibre coordinates along every parameter.
      Eigen::MatrixXd dY(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
      for (std::size_t c = 0; c < m; ++c) {
        std::vector<double> qp = node.q, qm = node.q;
        qp[c] += options.force_step;
        qm[c] -= options.force_step;
        Pushed a = push(tr, Fc, qp), b = push(tr, Fc, qm);
        for (std::size_t i = 0; i < n; ++i) {
          dY(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
              (a.G(static_cast<Eigen::Index>(p + i)) - b.G(static_cast<Eigen::Index>(p + i))) / (2 * options.force_step);
        }
      }
      Eigen::VectorXd force = dY * cur.G;
      node.force.assign(force.data(), force.data() + force.size());
      Eigen::JacobiSVD<Eigen::MatrixXd> fsvd(dY.rightCols(static_cast<Eigen::Index>(n)));
      node.fibre_sigma_min = fsvd.singularValues()(static_cast<Eigen::Index>(n) - 1);

      if (auto bt = tr.adapted_b(cur.ev.point, cur.ev.A)) {
        auto b0 = tr.adapted_b(base->ev.point, base->ev.A);
        node.fibre_affinity = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          node.fibre_affinity = std::max(node.fibre_affinity, std::abs((*bt)[i] - (*b0)[i] + node.q[p + n + i]));
        }
      }
      if (!(node.conditioning <= options.conditioning_limit)) {
        node.flagged = true;
        node.note = "Jacobian conditioning above limit";
      } else if (!(node.fibre_sigma_min >= options.fibre_sigma_min)) {
        node.flagged = true;
        node.note = "fibre coordinates degenerate";
      }
    } catch (const NumericError& e) {
      node.flagged = true;
      node.note = e.what();
    }
    if (node.flagged) {
      ++res.flagged;
    } else {
      t_res.push_back(node.t_residual);
      xy.push_back(node.x_minus_ytilde);
      x_y.push_back(node.x_minus_y);
      if (node.fibre_affinity >= 0) aff.push_back(node.fibre_affinity);
      jac.push_back(node.jacobian_agreement);
      cond.push_back(node.conditioning);
    }
    res.nodes.push_back(std::move(node));
  }
  if (res.flagged) res.warnings.push_back(std::to_string(res.flagged) + " grid nodes flagged and excluded from the maxima");
  res.t_residual = stat(t_res);
  res.x_minus_ytilde = stat(xy);
  res.x_minus_y = stat(x_y);
  res.fibre_affinity = stat(aff);
  res.jacobian_agreement = stat(jac);
  res.conditioning = stat(cond);
  res.structural_max = std::max({res.t_residual.max, res.x_minus_ytilde.max, res.fibre_affinity.max});
  if (res.jacobian_agreement.max > 1e-5) res.warnings.push_back("variational and difference Jacobians disagree beyond 1e-5");

  // Quadratic fits over each (t, x) column.
  const std::size_t terms = 1 + n + n * (n + 1) / 2;
  for (std::size_t start = 0; start < total; start += group) {
    std::vector<const NodeResidual*> good;
    for (std::size_t i = start; i < start + group; ++i) {
      if (!res.nodes[i].flagged) good.push_back(&res.nodes[i]);
    }
    if (good.size() < terms) continue;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(good.size()), static_cast<Eigen::Index>(terms));
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(good.size()), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < good.size(); ++r) {
      const auto& y = good[r]->ytilde;
      Eigen::Index c = 0;
      X(static_cast<Eigen::Index>(r), c++) = 1.0;
      for (std::size_t i = 0; i < n; ++i) X(static_cast<Eigen::Index>(r), c++) = y[i];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) X(static_cast<Eigen::Index>(r), c++) = y[i] * y[j];
      }
      for (std::size_t k = 0; k < n; ++k) Y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = good[r]->force[k];
    }
    Eigen::MatrixXd C = X.colPivHouseholderQr().solve(Y);
    QuadraticFit fit;
    fit.tx.assign(good.front()->q.begin(), good.front()->q.begin() + static_cast<std::ptrdiff_t>(p + n));
    fit.residual = max_abs(X * C - Y);
    fit.force_constant.resize(n);
    fit.force_linear.assign(n, std::vector<double>(n));
    fit.force_quadratic.assign(n, std::vector<std::vector<double>>(n, std::vector<double>(n)));
    for (std::size_t k = 0; k < n; ++k) {
      const auto kc = static_cast<Eigen::Index>(k);
      Eigen::Index c = 0;
      fit.force_constant[k] = C(c++, kc);
      for (std::size_t i = 0; i < n; ++i) fit.force_linear[k][i] = C(c++, kc);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          double v = C(c++, kc);
          if (i == j) {
            fit.force_quadratic[k][i][i] = v;
          } else {
            fit.force_quadratic[k][i][j] = fit.force_quadratic[k][j][i] = 0.5 * v;
          }
        }
      }
    }
    res.quadratic_fit_residual = std::max(res.quadratic_fit_residual, fit.residual);
    res.quadratic_fits.push_back(std::move(fit));
  }
  return res;
}

// ------------------------------------------------------------- surrogate

namespace {

void monomials(std::size_t vars, std::size_t degree, std::vector<std::vector<std::size_t>>& out) {
  std::vector<std::size_t> e(vars, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
    if (i == vars) {
      out.push_back(e);
      return;
    }
    for (std::size_t d = 0; d <= left; ++d) {
      e[i] = d;
      rec(i + 1, left - d);
    }
    e[i] = 0;
  };
  rec(0, degree);
}

Expression coefficient(double c) {
  for (long long q = 1; q <= 16; ++q) {
    double p = std::round(c * static_cast<double>(q));
    if (std::abs(p / static_cast<double>(q) - c) < 1e-7 && std::abs(p) < 1e12) {
      return Expression(Number(Rational(static_cast<long long>(p), q)));
    }
  }
  return Expression::real(c);
}

}  // namespace

SurrogateCheck surrogate_check(const CoordinateTransform& tr, const ResidualReport& res, const AnalysisReport& original,
                               const StraightenOptions& options) {
  const std::size_t m = tr.m(), n = tr.n(), p = tr.t_count();
  SurrogateCheck s;
  s.degree = options.surrogate_degree;
  std::vector<const NodeResidual*> good;
  for (const auto& node : res.nodes) {
    if (!node.flagged) good.push_back(&node);
  }
  std::vector<std::vector<std::size_t>> mons;
  monomials(m, s.degree, mons);
  if (good.size() < 2 * mons.size()) {
    s.detail = "too few usable nodes for the surrogate fit";
    return s;
  }
  auto var = [&](const NodeResidual& node, std::size_t v) { return v < p + n ? node.q[v] : node.ytilde[v - p - n]; };
  std::vector<double> lo(m, INFINITY), hi(m, -INFINITY);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(good.size()), static_cast<Eigen::Index>(mons.size()));
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(good.size()), static_cast<Eigen::Index>(n));
  double scale = 1.0;
  for (std::size_t r = 0; r < good.size(); ++r) {
    for (std::size_t v = 0; v < m; ++v) {
      lo[v] = std::min(lo[v], var(*good[r], v));
      hi[v] = std::max(hi[v], var(*good[r], v));
    }
    for (std::size_t c = 0; c < mons.size(); ++c) {
      double val = 1.0;
      for (std::size_t v = 0; v < m; ++v) val *= std::pow(var(*good[r], v), static_cast<double>(mons[c][v]));
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = val;
    }
    for (std::size_t k = 0; k < n; ++k) {
      Y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = good[r]->force[k];
      scale = std::max(scale, std::abs(good[r]->force[k]));
    }
  }
  Eigen::MatrixXd C = X.colPivHouseholderQr().solve(Y);
  s.fit_residual = max_abs(X * C - Y);

  std::vector<double> col_size(mons.size());
  for (std::size_t c = 0; c < mons.size(); ++c) col_size[c] = X.col(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff();
  auto names = tr.parameter_names();
  std::vector<Expression> comps(m);
  for (std::size_t i = 0; i < p; ++i) comps[i] = Expression(tr.kind() == CoordinateTransform::Kind::Case2 && i == 0 ? 1 : 0);
  for (std::size_t i = 0; i < n; ++i) comps[p + i] = Expression::symbol(names[p + n + i]);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<Expression> terms;
    for (std::size_t c = 0; c < mons.size(); ++c) {
      double v = C(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
      // Coefficients whose contribution is below the difference noise are dropped.
      if (std::abs(v) * col_size[c] < 1e-6 * scale) continue;
      std::vector<Expression> f{coefficient(v)};
      for (std::size_t j = 0; j < m; ++j) {
        if (mons[c][j]) f.push_back(Expression::power(Expression::symbol(names[j]), Rational(static_cast<long long>(mons[c][j]))));
      }
      terms.push_back(Expression::product(std::move(f)));
    }
    comps[p + n + k] = normalize(Expression::sum(std::move(terms)));
    s.force.push_back(to_string(comps[p + n + k]));
  }
  for (std::size_t v = 0; v < m; ++v) {
    if (hi[v] - lo[v] < 1e-6) {
      lo[v] -= 1e-3;
      hi[v] += 1e-3;
    }
  }
  try {
    auto chart = std::make_shared<Chart>(names, lo, hi, 1);
    std::vector<VectorField> V;
    for (std::size_t i = 0; i < n; ++i) V.push_back(VectorField::coordinate(chart, p + n + i));
    SecondOrderProblem sp(chart, VectorField(chart, comps), Frame(chart, V));
    AnalysisReport rep = classify(sp);
    s.classification = rep.classification;
    if (rep.quadratic) s.quadratic = rep.quadratic->kind;
    s.agrees = s.classification == original.classification;
    s.detail = s.agrees ? "surrogate reproduces the classification" : "surrogate classification differs";
    if (s.quadratic && original.quadratic && *s.quadratic != original.quadratic->kind) {
      s.detail += "; quadratic verdict differs (" + to_string(*s.quadratic) + ")";
    }
  } catch (const Error& e) {
    s.detail = std::string("surrogate analysis failed: ") + e.what();
  }
  return s;
}

StraightenResult straighten(const AnalysisReport& rep, const StraightenOptions& options) {
  StraightenResult out{build_normal_coordinates(rep, options), {}};
  out.residuals = pushforward_residuals(out.transform, rep.frame->F, options);
  if (options.surrogate) out.residuals.surrogate = surrogate_check(out.transform, out.residuals, rep, options);
  return out;
}

}  // namespace sode
