#pragma once

#include "sode/analysis.hpp"
#include "sode/integrator.hpp"

#include <optional>

namespace sode {

/// Flows of the V basis augmented with the A-system
///   d/ds A_j^k = -c^l A_j^m beta^k_lm   along   z' = c^l V_l(z),
/// where c is either a fixed coordinate direction or row i of A itself
/// (the flow of the adapted field V~_i). State layout: z, then A row-major.
class BetaFlow {
 public:
  BetaFlow(const ExtendedFrame& ef, const BetaCoefficients& b);

  std::size_t m() const { return m_; }
  std::size_t n() const { return n_; }
  std::size_t state_dim() const { return m_ + n_ * n_; }

  /// System along V_l (adapted = false) or along V~_l (adapted = true).
  OdeSystem system(std::size_t l, bool adapted, const IntegratorOptions& options, double singular_det) const;

 private:
  bool rhs(std::size_t l, bool adapted, std::span<const double> y, std::span<double> out) const;
  bool jacobian(std::size_t l, bool adapted, std::span<const double> y, Eigen::MatrixXd& J) const;

  std::size_t m_, n_;
  SamplingBox box_;
  std::vector<CompiledField> V_;
  std::vector<CompiledJacobian> DV_;
  std::vector<CompiledExpression> beta_;                // [(k*n + l)*n + mm]
  std::vector<std::vector<CompiledExpression>> grad_;  // same index, then coordinate
};

}  // namespace sode
