#pragma once

#include "sode/geometry.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sode {

struct AnalysisOptions {
  std::size_t samples = 64;
  std::uint64_t seed = 1;
  ZeroTestOptions zero;
  // Cross-section search.
  std::size_t newton_starts = 16;
  int newton_iterations = 50;
  double newton_tolerance = 1e-10;
};

/// Outcome of an identity or membership check, with its evidence.
struct Check {
  enum class Status { Pass, Fail, Inconclusive };
  std::string name;
  Status status = Status::Inconclusive;
  bool exact = false;  // every component a structural zero
  double max_residual = 0.0;
  std::vector<double> witness;
  double witness_value = 0.0;
  std::string detail;

  bool passed() const { return status == Status::Pass; }
};

std::string to_string(Check::Status s);

/// Checks that every expression vanishes on the box. Structural zeros are
/// exact passes; numerically-zero residuals pass inexactly.
Check zero_check(std::string name, const std::vector<Expression>& exprs, const SamplingBox& box,
                 const ZeroTestOptions& options);

class SecondOrderProblem {
 public:
  /// Validates 2n <= m and the involutivity of V; throws InputError.
  SecondOrderProblem(ChartPtr chart, VectorField F, Frame V, AnalysisOptions options = {});

  const ChartPtr& chart() const { return chart_; }
  const VectorField& F() const { return F_; }
  const Frame& V() const { return V_; }
  std::size_t n() const { return V_.size(); }
  std::size_t m() const { return chart_->dim(); }
  const AnalysisOptions& options() const { return options_; }

 private:
  ChartPtr chart_;
  VectorField F_;
  Frame V_;
  AnalysisOptions options_;
};

struct RegularityResult {
  bool pass = false;
  RankReport rank;
};

/// rank{V_i, [F,V_i]} = 2n at every sample.
RegularityResult check_regularity(const SecondOrderProblem& p);

/// V basis, W_i = [F,V_i], and the combined frame {V_i, W_i}.
struct ExtendedFrame {
  ChartPtr chart;
  VectorField F;
  std::vector<VectorField> V;
  std::vector<VectorField> W;
  std::shared_ptr<const Frame> combined;
  std::shared_ptr<const FrameSolver> solver;
  ZeroTestOptions zero;
  bool commuting = false;  // [V_i, V_j] = 0
  bool adapted = false;    // [V_i, W_j] in V

  std::size_t n() const { return V.size(); }
  const SamplingBox& box() const { return chart->box(); }
};

/// Throws NumericError if the combined frame is not of rank 2n.
ExtendedFrame build_W(const SecondOrderProblem& p);
/// Same construction for an explicitly given V basis (used after adaptation).
ExtendedFrame build_W(const ChartPtr& chart, const VectorField& F, std::vector<VectorField> V,
                      const AnalysisOptions& options);

InvolutivityVerdict check_W_involutive(const ExtendedFrame& ef);

/// [V_i,W_j] = alpha^k_ij V_k + beta^k_ij W_k, stored as [k][i][j].
struct BetaCoefficients {
  std::size_t n = 0;
  std::vector<std::vector<std::vector<Expression>>> alpha;
  std::vector<std::vector<std::vector<Expression>>> beta;
  Check symmetric;  // both symmetric in the lower indices
  bool all_beta_zero = false;
};

/// Requires a commuting V basis; throws InputError otherwise.
BetaCoefficients beta_coefficients(const ExtendedFrame& ef);

/// V_i(b^l_jk) - V_j(b^l_ik) + b^l_im b^m_jk - b^l_jm b^m_ik = 0 for all indices.
Check verify_beta_integrability(const ExtendedFrame& ef, const BetaCoefficients& b);

/// Transformed coefficients of the basis A_i^l V_l by the transformation law
/// (A_i^l V_l(A_j^k) + A_i^l A_j^m b^k_lm)(A^-1)^p_k; indices [p][i][j].
std::vector<std::vector<std::vector<Expression>>> transform_beta(const ExtendedFrame& ef, const BetaCoefficients& b,
                                                                 const std::vector<std::vector<Expression>>& A);

struct BasisAdaptation {
  enum class Method { Identity, Symbolic, Numeric, Failed };
  Method method = Method::Failed;
  /// New basis V~_i = A_i^j V_j; A[i][j] (symbolic methods only).
  std::vector<std::vector<Expression>> A;
  std::optional<ExtendedFrame> adapted;  // symbolic methods only
  Check verification;                    // [V~_i, [F,V~_j]] in V
  std::string detail;
};

std::string to_string(BasisAdaptation::Method m);

/// Symbolic A for beta = 0 and for n = 1 with V = g d/ds; otherwise Numeric,
/// leaving the evaluation of A to the straightening module.
BasisAdaptation adapt_commuting_basis(const ExtendedFrame& ef, const BetaCoefficients& b);

/// Result of applying an operator that needs a frame decomposition.
struct FieldResult {
  bool ok = false;
  VectorField field;
  std::vector<double> witness;
  std::string diagnostic;
};

/// X = a^i V_i + b^i W_i  =>  S(X) = -b^i V_i.
FieldResult apply_S(const ExtendedFrame& ef, const VectorField& X);

/// N_S(A,B) = [SA,SB] - S[SA,B] - S[A,SB] on all pairs of the combined frame.
Check nijenhuis_check(const ExtendedFrame& ef);

/// (L_F S)(X) = [F, S(X)] - S([F,X]).
FieldResult lie_derivative_S(const ExtendedFrame& ef, const VectorField& X);

struct Projectors {
  Check F_preserves_W;  // [F,W_i] in W
  std::vector<VectorField> PH;  // P_H on V_1..V_n, W_1..W_n
  std::vector<VectorField> PV;
  std::vector<VectorField> LFS;  // L_F S on the same frame
  Check involution;      // (L_F S)^2 = id
  Check complementary;   // P_H + P_V = id
  Check idempotent;      // P_H^2 = P_H, P_V^2 = P_V
  Check vertical;        // P_V(V) = V, P_H(V) = 0
};

Projectors projectors(const ExtendedFrame& ef);

FieldResult apply_PH(const ExtendedFrame& ef, const VectorField& X);
FieldResult apply_PV(const ExtendedFrame& ef, const VectorField& X);

/// h(V_i) = -P_H(W_i), checked by S(h) = V_i and P_V(h) = 0.
struct HorizontalLifts {
  std::vector<VectorField> h;
  Check verification;
};

HorizontalLifts horizontal_lift(const ExtendedFrame& ef);

/// Covariant derivative of a vertical field Y along any X in W:
/// P_V([P_H X, Y]) + S([P_V X, Y^h]).
FieldResult extended_connection(const ExtendedFrame& ef, const HorizontalLifts& lifts, const VectorField& X,
                                const VectorField& Y);

/// Vertical directions: nabla_{V_a} V_b = -S([V_a, W_b]) = beta^k_ab V_k.
FieldResult vertical_connection(const ExtendedFrame& ef, std::size_t a, std::size_t b);

/// Connection coefficients with respect to the current V basis.
struct ConnectionData {
  std::vector<std::vector<Expression>> gamma1;  // Gamma^i_j = W-coefficient i of [F,W_j], halved
  std::vector<std::vector<std::vector<Expression>>> gamma2;  // Gamma^k_ij from nabla_{h(V_i)} V_j, [k][i][j]
  Check torsion_symmetric;  // Gamma^k_ij = Gamma^k_ji
  Check torsion_free;       // nabla_{V_i}V_j - nabla_{V_j}V_i - S[h_i, h_j] = 0
  std::string sign_convention;
};

ConnectionData connection_data(const ExtendedFrame& ef, const HorizontalLifts& lifts);

/// theta^l_ijk: V-coefficients of theta(V_i, V_j) V_k, stored [l][i][j][k].
struct MixedCurvature {
  std::size_t n = 0;
  std::vector<std::vector<std::vector<std::vector<Expression>>>> theta;
};

MixedCurvature mixed_curvature(const ExtendedFrame& ef, const HorizontalLifts& lifts);

struct QuadraticVerdict {
  enum class Kind { Quadratic, NotQuadratic, Inconclusive };
  Kind kind = Kind::Inconclusive;
  Check check;
  /// Largest |theta component| found at the witness, for NotQuadratic.
  double witness_magnitude = 0.0;
};

std::string to_string(QuadraticVerdict::Kind k);

QuadraticVerdict quadratic_test(const ExtendedFrame& ef, const MixedCurvature& theta);

/// Points of N = {F in V}: zeros of the W-coefficients b^i of F.
struct CrossSection {
  bool found = false;
  std::vector<double> point;  // the one used downstream: nearest the box centre
  std::vector<std::vector<double>> all_points;
  double residual = 0.0;
  std::string detail;
};

CrossSection find_cross_section(const ExtendedFrame& ef, const std::vector<Expression>& b,
                                const AnalysisOptions& options);

struct AnalysisReport {
  enum class Case { Case1, Case2, NotSecondOrder };
  Case classification = Case::NotSecondOrder;
  std::string reason;
  std::size_t m = 0, n = 0;
  std::size_t parameters = 0;  // m - 2n in case 1, m - 2n - 1 in case 2

  RegularityResult regularity;
  InvolutivityVerdict v_involutive;
  std::optional<InvolutivityVerdict> w_involutive;
  std::optional<Check> F_in_W;
  std::optional<RankReport> F_independent;
  std::optional<Check> F_preserves_W;
  std::vector<Expression> F_a, F_b;  // F = a^i V_i + b^i W_i (case 1)
  std::optional<CrossSection> cross_section;

  std::optional<ExtendedFrame> frame;  // extended frame of the input basis
  std::optional<BetaCoefficients> beta;
  std::optional<Check> beta_integrability;
  std::optional<BasisAdaptation> adaptation;
  std::optional<ExtendedFrame> working;  // adapted frame when symbolic, else input

  std::optional<Check> nijenhuis;
  std::optional<Projectors> projectors;
  std::optional<HorizontalLifts> lifts;
  std::optional<ConnectionData> connection;
  std::optional<MixedCurvature> theta;
  std::optional<QuadraticVerdict> quadratic;

  std::vector<std::string> warnings;

  /// Identity suite: beta integrability, Nijenhuis torsion, projector
  /// identities and torsion symmetry.
  std::vector<Check> identity_checks() const;
};

std::string to_string(AnalysisReport::Case c);

struct ClassifyOptions {
  bool connection = true;  // S, projectors, lifts, Gamma
  bool curvature = true;   // theta and the quadratic verdict
};

AnalysisReport classify(const SecondOrderProblem& p, const ClassifyOptions& what = {});

}  // namespace sode
