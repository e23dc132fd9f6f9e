#pragma once

#include "sode/analysis.hpp"
#include "sode/integrator.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sode {

struct StraightenOptions {
  IntegratorOptions integrator;
  /// Grid points per parameter; 0 picks 10 for m <= 4 and 5 for m <= 6.
  std::size_t grid = 0;
  /// Half-extent of the parameter grid as a fraction of the smallest box half-width.
  double radius = 0.25;
  double force_step = 1e-3;          // central differences of the fibre coordinates
  double jacobian_check_step = 1e-4;  // finite-difference cross-check of the variational Jacobian
  double conditioning_limit = 1e8;
  double fibre_sigma_min = 1e-6;
  double path_tolerance = 1e-7;
  double singular_det = 1e-10;
  bool force_numeric_adaptation = false;
  std::size_t surrogate_degree = 3;
  bool surrogate = true;
};

std::size_t default_grid(std::size_t m);

class BetaFlow;

/// A-system of the basis adaptation, integrated along the V-basis flows
/// from a point of a transversal section where A = identity.
class BasisOdeSolution {
 public:
  struct Value {
    std::vector<double> point;
    Eigen::MatrixXd A;  // A(i, j): new basis V~_i = A_i^j V_j
    double path_discrepancy = 0.0;
  };

  /// Flows V_1..V_n by sigma from the section point; checks the reversed
  /// order against it. Throws NumericError when the paths disagree or A is singular.
  Value at(std::span<const double> section_point, std::span<const double> sigma) const;

  std::size_t n() const;

 private:
  friend BasisOdeSolution solve_basis_ode(const ExtendedFrame&, const BetaCoefficients&, const StraightenOptions&);
  std::shared_ptr<const BetaFlow> flow_;
  StraightenOptions options_;
};

BasisOdeSolution solve_basis_ode(const ExtendedFrame& ef, const BetaCoefficients& b, const StraightenOptions& options = {});

/// Phi: (t, x, s) -> M built from a base point, a transversal slice, flows of
/// -W_i and flows of the adapted V basis.
class CoordinateTransform {
 public:
  enum class Kind { Case1, Case2 };

  struct Evaluation {
    std::vector<double> point;
    Eigen::MatrixXd jacobian;  // m x m, columns ordered (t, x, s)
    Eigen::MatrixXd A;         // adapted basis at the point
  };

  Kind kind() const { return kind_; }
  std::size_t m() const { return m_; }
  std::size_t n() const { return n_; }
  /// Number of t parameters (m - 2n); in case 2 the first one is the F-flow time.
  std::size_t t_count() const { return m_ - 2 * n_; }
  const std::vector<double>& base_point() const { return z0_; }
  const Eigen::MatrixXd& slice() const { return slice_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  const std::string& composition() const { return composition_; }
  BasisAdaptation::Method adaptation() const { return method_; }
  double base_conditioning() const { return base_conditioning_; }
  const ChartPtr& chart() const { return chart_; }

  Evaluation evaluate(std::span<const double> q, bool with_jacobian = true) const;
  std::vector<double> map(std::span<const double> q) const { return evaluate(q, false).point; }
  Eigen::MatrixXd jacobian_fd(std::span<const double> q, double h) const;

  /// W-coefficients of F in the adapted basis at a point with known A (case 1).
  std::optional<std::vector<double>> adapted_b(std::span<const double> z, const Eigen::MatrixXd& A) const;

 private:
  friend CoordinateTransform build_normal_coordinates(const AnalysisReport&, const StraightenOptions&);
  struct Flows;
  Kind kind_ = Kind::Case1;
  std::size_t m_ = 0, n_ = 0;
  ChartPtr chart_;
  std::vector<double> z0_;
  Eigen::MatrixXd slice_;
  std::vector<std::string> names_;
  std::string composition_;
  BasisAdaptation::Method method_ = BasisAdaptation::Method::Identity;
  double base_conditioning_ = 0.0;
  std::shared_ptr<const Flows> flows_;
};

/// Throws InputError for NotSecondOrder reports and NumericError when the
/// cross-section is missing or the base Jacobian is singular.
CoordinateTransform build_normal_coordinates(const AnalysisReport& rep, const StraightenOptions& options = {});

struct Stat {
  double max = 0.0;
  double median = 0.0;
  std::size_t count = 0;
};

struct NodeResidual {
  std::vector<double> q;      // (t, x, s)
  std::vector<double> point;  // Phi(q)
  std::vector<double> ytilde;
  std::vector<double> force;
  double t_residual = 0.0;
  double x_minus_ytilde = 0.0;
  double x_minus_y = 0.0;       // |G_x(t,x,s) - G_x(t,x,0) - s|: affinity of the raw fibre parameter
  double fibre_affinity = -1.0;  // |b~(t,x,s) - b~(t,x,0) + s|, case 1 only (-1 otherwise)
  double jacobian_agreement = 0.0;
  double conditioning = 0.0;
  double fibre_sigma_min = 0.0;
  bool flagged = false;
  std::string note;
};

/// Least-squares fit force^k = Q^k + P^k_i y^i + G^k_ij y^i y^j over one (t, x) column of the grid.
struct QuadraticFit {
  std::vector<double> tx;
  std::vector<std::vector<std::vector<double>>> force_quadratic;  // [k][i][j], symmetric
  std::vector<std::vector<double>> force_linear;                  // [k][i]
  std::vector<double> force_constant;                             // [k]
  double residual = 0.0;
};

struct SurrogateCheck {
  std::size_t degree = 0;
  double fit_residual = 0.0;
  std::vector<std::string> force;  // fitted polynomials in (t, x, y)
  AnalysisReport::Case classification = AnalysisReport::Case::NotSecondOrder;
  std::optional<QuadraticVerdict::Kind> quadratic;
  bool agrees = false;
  std::string detail;
};

struct ResidualReport {
  std::size_t grid = 0;
  double radius = 0.0;
  std::vector<std::string> parameter_names;
  std::vector<NodeResidual> nodes;
  Stat t_residual, x_minus_ytilde, x_minus_y, fibre_affinity, jacobian_agreement, conditioning;
  /// max over unflagged nodes of the t-residual, |x - ytilde| and the fibre affinity.
  double structural_max = 0.0;
  std::size_t flagged = 0;
  std::vector<std::string> warnings;
  std::vector<QuadraticFit> quadratic_fits;
  double quadratic_fit_residual = 0.0;
  std::optional<SurrogateCheck> surrogate;
};

/// Evaluates (D Phi)^-1 F(Phi) on the grid, redefines the fibre coordinates
/// as the x-components and differentiates them along F to obtain the force.
ResidualReport pushforward_residuals(const CoordinateTransform& tr, const VectorField& F,
                                     const StraightenOptions& options = {});

/// Re-classifies the polynomial surrogate of the sampled normal form.
SurrogateCheck surrogate_check(const CoordinateTransform& tr, const ResidualReport& res, const AnalysisReport& original,
                               const StraightenOptions& options = {});

struct StraightenResult {
  CoordinateTransform transform;
  ResidualReport residuals;
};

StraightenResult straighten(const AnalysisReport& rep, const StraightenOptions& options = {});

}  // namespace sode
