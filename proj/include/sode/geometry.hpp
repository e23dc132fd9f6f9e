#pragma once

#include "sode/expr.hpp"
#include "sode/sampling.hpp"
#include "sode/zero_test.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sode {

/// Coordinate patch: ordered coordinate names and a sampling box.
class Chart {
 public:
  Chart(std::vector<std::string> names, std::vector<double> lo, std::vector<double> hi, std::uint64_t seed = 1);

  std::size_t dim() const { return box_.dim(); }
  const std::vector<std::string>& names() const { return box_.names; }
  const SamplingBox& box() const { return box_; }
  std::uint64_t seed() const { return seed_; }
  /// Index of a coordinate, or dim() when absent.
  std::size_t index_of(std::string_view name) const;
  Expression coordinate(std::size_t i) const { return Expression::symbol(box_.names[i]); }

  bool same_as(const Chart& other) const { return box_.names == other.box_.names; }

 private:
  SamplingBox box_;
  std::uint64_t seed_;
};

using ChartPtr = std::shared_ptr<const Chart>;

class VectorField {
 public:
  VectorField() = default;
  VectorField(ChartPtr chart, std::vector<Expression> components);
  /// Coordinate field d/dz^i.
  static VectorField coordinate(ChartPtr chart, std::size_t i);
  static VectorField zero(ChartPtr chart);

  const ChartPtr& chart() const { return chart_; }
  std::size_t dim() const { return comps_.size(); }
  const Expression& operator[](std::size_t i) const { return comps_[i]; }
  const std::vector<Expression>& components() const { return comps_; }

  /// Directional derivative X(f).
  Expression apply(const Expression& f) const;
  VectorField normalized() const;

  friend VectorField operator+(const VectorField& a, const VectorField& b);
  friend VectorField operator-(const VectorField& a, const VectorField& b);
  friend VectorField operator*(const Expression& f, const VectorField& a);
  VectorField operator-() const;

  std::vector<double> at(std::span<const double> point) const;
  std::string to_string() const;

 private:
  ChartPtr chart_;
  std::vector<Expression> comps_;
};

/// Compiled component evaluator for repeated numeric use.
class CompiledField {
 public:
  CompiledField() = default;
  explicit CompiledField(const VectorField& X);
  std::size_t dim() const { return comps_.size(); }
  bool eval(std::span<const double> point, std::span<double> out) const;

 private:
  std::vector<CompiledExpression> comps_;
};

/// [X, Y] with components X^j dY^k/dz^j - Y^j dX^k/dz^j, normalized.
VectorField lie_bracket(const VectorField& X, const VectorField& Y);

struct RankReport {
  std::size_t claimed_rank = 0;
  std::vector<std::size_t> ranks;  // per evaluated sample
  double worst_conditioning = 0.0;  // smallest significant singular value seen
  std::vector<std::vector<double>> deficient_points;
  std::vector<std::vector<double>> skipped_points;  // domain errors
  std::size_t samples = 0;
};

/// Pointwise numeric rank of the component matrix on sampled box points.
/// Singular values below 1e-9 times the largest count as zero.
RankReport frame_rank(std::span<const VectorField> fields, std::size_t samples, std::uint64_t seed);

/// Ordered spanning set of a distribution; full rank on the sampled box.
class Frame {
 public:
  /// Validates constant full rank with `samples` points; throws InputError.
  Frame(ChartPtr chart, std::vector<VectorField> fields, std::size_t samples = 64, std::uint64_t seed = 1);
  static Frame unchecked(ChartPtr chart, std::vector<VectorField> fields);

  const ChartPtr& chart() const { return chart_; }
  std::size_t size() const { return fields_.size(); }
  const VectorField& operator[](std::size_t i) const { return fields_[i]; }
  const std::vector<VectorField>& fields() const { return fields_; }

 private:
  Frame() = default;
  ChartPtr chart_;
  std::vector<VectorField> fields_;
};

RankReport frame_rank(const Frame& fr, std::size_t samples, std::uint64_t seed);

struct Decomposition {
  bool ok = false;
  std::vector<Expression> coefficients;
  /// True when every residual component was a structural zero.
  bool exact = false;
  double max_residual = 0.0;
  std::vector<double> witness;  // residual NonZero here
  std::string diagnostic;
};

/// Symbolic left inverse of a frame, reused across many decompositions.
class FrameSolver {
 public:
  FrameSolver(const Frame& fr, const ZeroTestOptions& options = {});

  bool ok() const { return ok_; }
  const std::string& diagnostic() const { return diagnostic_; }

  /// Coefficients c^k with X = sum c^k fr_k, verified on every component.
  Decomposition decompose(const VectorField& X) const;
  /// Coefficients only, without the span verification.
  std::vector<Expression> coefficients(const VectorField& X) const;

 private:
  Frame frame_;
  ZeroTestOptions options_;
  bool ok_ = false;
  std::string diagnostic_;
  std::vector<std::vector<Expression>> left_inverse_;  // k x m
};

Decomposition decompose_in_frame(const VectorField& X, const Frame& fr, const ZeroTestOptions& options = {});

struct InvolutivityVerdict {
  bool involutive = false;
  std::size_t i = 0, j = 0;  // offending pair
  std::vector<double> witness;
  std::string diagnostic;
};

InvolutivityVerdict is_involutive(const Frame& fr, const ZeroTestOptions& options = {});

}  // namespace sode
