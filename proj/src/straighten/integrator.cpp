#include "sode/integrator.hpp"

#include "sode/errors.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>

namespace sode {

namespace odeint = boost::numeric::odeint;

namespace {

struct DomainFailure {};

std::string format_point(std::span<const double> z) {
  std::string s = "(";
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(z[i]);
  }
  return s + ")";
}

}  // namespace

void integrate(const OdeSystem& sys, std::vector<double>& state, double s, const IntegratorOptions& options,
               Eigen::MatrixXd* tangents) {
  const std::size_t d = sys.dim;
  const std::size_t k = tangents ? static_cast<std::size_t>(tangents->cols()) : 0;
  if (state.size() != d) throw InputError("state dimension mismatch");
  if (s == 0.0) return;

  // Full state: z followed by the tangent columns.
  std::vector<double> x(d * (1 + k));
  std::copy(state.begin(), state.end(), x.begin());
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t r = 0; r < d; ++r) x[d * (1 + c) + r] = (*tangents)(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }

  Eigen::MatrixXd J(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  auto rhs = [&](const std::vector<double>& y, std::vector<double>& dy, double) {
    std::span<const double> z(y.data(), d);
    if (!sys.rhs(z, std::span<double>(dy.data(), d))) throw DomainFailure{};
    for (std::size_t i = 0; i < d; ++i) {
      if (!std::isfinite(dy[i])) throw DomainFailure{};
    }
    if (k == 0) return;
    if (!sys.jacobian(z, J)) throw DomainFailure{};
    for (std::size_t c = 0; c < k; ++c) {
      Eigen::Map<const Eigen::VectorXd> col(y.data() + d * (1 + c), static_cast<Eigen::Index>(d));
      Eigen::Map<Eigen::VectorXd> out(dy.data() + d * (1 + c), static_cast<Eigen::Index>(d));
      out.noalias() = J * col;
    }
  };

  auto stepper = odeint::make_controlled(options.abs_tol, options.rel_tol, odeint::runge_kutta_dopri5<std::vector<double>>());
  const double dir = s > 0 ? 1.0 : -1.0;
  double t = 0.0;
  double dt = dir * std::min(options.initial_step, std::abs(s));
  std::vector<double> last(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d));
  std::size_t steps = 0;
  while (dir * (s - t) > 0.0) {
    if (dir * (t + dt - s) > 0.0) dt = s - t;
    if (options.max_step > 0.0 && std::abs(dt) > options.max_step) dt = dir * options.max_step;
    odeint::controlled_step_result r;
    try {
      r = stepper.try_step(rhs, x, t, dt);
    } catch (const DomainFailure&) {
      // Treat as a rejected step: retry with a smaller step.
      stepper.reset();
      r = odeint::fail;
      dt *= 0.5;
    }
    if (r == odeint::success) {
      ++steps;
      std::span<const double> z(x.data(), d);
      if (sys.admissible && !sys.admissible(z)) {
        throw NumericError("trajectory left the admissible region near " + format_point(last), last);
      }
      std::copy(z.begin(), z.end(), last.begin());
      if (steps > options.max_steps) throw NumericError("integrator step limit reached", last);
    } else if (std::abs(dt) < 1e-14 * std::max(1.0, std::abs(s))) {
      throw NumericError("integrator step size underflow near " + format_point(last), last);
    }
  }
  std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d), state.begin());
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t r = 0; r < d; ++r) (*tangents)(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x[d * (1 + c) + r];
  }
}

CompiledJacobian::CompiledJacobian(const VectorField& X) : m_(X.dim()) {
  const auto& names = X.chart()->names();
  entries_.reserve(m_ * m_);
  for (std::size_t r = 0; r < m_; ++r) {
    for (std::size_t c = 0; c < m_; ++c) entries_.emplace_back(differentiate(X[r], names[c]), names);
  }
}

bool CompiledJacobian::eval(std::span<const double> point, Eigen::MatrixXd& out) const {
  out.resize(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
  for (std::size_t r = 0; r < m_; ++r) {
    for (std::size_t c = 0; c < m_; ++c) {
      double v = 0.0;
      if (!entries_[r * m_ + c].try_eval(point, v)) return false;
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return true;
}

FlowMap::FlowMap(const VectorField& X, IntegratorOptions options)
    : X_(X),
      options_(options),
      f_(std::make_shared<const CompiledField>(X)),
      df_(std::make_shared<const CompiledJacobian>(X)) {
  sys_.dim = X.dim();
  auto f = f_;
  auto df = df_;
  sys_.rhs = [f](std::span<const double> z, std::span<double> out) { return f->eval(z, out); };
  sys_.jacobian = [df](std::span<const double> z, Eigen::MatrixXd& J) { return df->eval(z, J); };
  SamplingBox box = X.chart()->box();
  double margin = options.box_margin;
  sys_.admissible = [box, margin](std::span<const double> z) {
    return box.contains(std::vector<double>(z.begin(), z.end()), margin);
  };
}

std::vector<double> FlowMap::operator()(std::span<const double> z, double s) const {
  std::vector<double> state(z.begin(), z.end());
  integrate(sys_, state, s, options_);
  return state;
}

std::vector<double> FlowMap::flow(std::span<const double> z, double s, Eigen::MatrixXd& tangents) const {
  std::vector<double> state(z.begin(), z.end());
  integrate(sys_, state, s, options_, &tangents);
  return state;
}

std::vector<double> integrate_flow(const VectorField& X, std::span<const double> z, double s,
                                   const IntegratorOptions& options) {
  return FlowMap(X, options)(z, s);
}

}  // namespace sode
