#pragma once

#include "sode/geometry.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace sode {

struct IntegratorOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double initial_step = 1e-2;
  double max_step = 0.0;  // 0: unbounded
  std::size_t max_steps = 200000;
  /// Trajectories may leave the chart box by this fraction of its width.
  double box_margin = 0.5;
};

/// Autonomous ODE z' = g(z) with optional Jacobian, on R^dim.
struct OdeSystem {
  std::size_t dim = 0;
  /// Returns false on a domain failure.
  std::function<bool(std::span<const double>, std::span<double>)> rhs;
  /// dim x dim Jacobian of rhs; needed only when tangents are propagated.
  std::function<bool(std::span<const double>, Eigen::MatrixXd&)> jacobian;
  /// Admissible region check on accepted steps (e.g. box plus margin).
  std::function<bool(std::span<const double>)> admissible;
};

/// Integrates the state over [0, s] with Dormand-Prince 5(4) step control.
/// When `tangents` is given (dim x k), its columns are carried along the
/// variational equation T' = Dg T. Throws NumericError with the last valid point.
void integrate(const OdeSystem& sys, std::vector<double>& state, double s, const IntegratorOptions& options,
               Eigen::MatrixXd* tangents = nullptr);

/// Partial derivatives dX^r/dz^c, compiled.
class CompiledJacobian {
 public:
  CompiledJacobian() = default;
  explicit CompiledJacobian(const VectorField& X);
  bool eval(std::span<const double> point, Eigen::MatrixXd& out) const;

 private:
  std::size_t m_ = 0;
  std::vector<CompiledExpression> entries_;  // row-major
};

/// Flow of a vector field, restricted to its chart box plus the margin.
class FlowMap {
 public:
  explicit FlowMap(const VectorField& X, IntegratorOptions options = {});

  const VectorField& field() const { return X_; }
  const IntegratorOptions& options() const { return options_; }
  const OdeSystem& system() const { return sys_; }

  std::vector<double> operator()(std::span<const double> z, double s) const;
  /// Flows z and carries tangent vectors (columns of T) along.
  std::vector<double> flow(std::span<const double> z, double s, Eigen::MatrixXd& tangents) const;

 private:
  VectorField X_;
  IntegratorOptions options_;
  std::shared_ptr<const CompiledField> f_;
  std::shared_ptr<const CompiledJacobian> df_;
  OdeSystem sys_;
};

std::vector<double> integrate_flow(const VectorField& X, std::span<const double> z, double s,
                                   const IntegratorOptions& options = {});

}  // namespace sode
