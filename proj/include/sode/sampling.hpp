#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sode {

/// Axis-aligned box over named coordinates.
struct SamplingBox {
  std::vector<std::string> names;
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const { return names.size(); }
  double width(std::size_t i) const { return hi[i] - lo[i]; }
  std::vector<double> center() const;
  bool contains(const std::vector<double>& p, double margin = 0.0) const;
};

/// Randomly shifted Halton sequence mapped into a box. Deterministic per seed.
class HaltonSampler {
 public:
  HaltonSampler(const SamplingBox& box, std::uint64_t seed);

  std::vector<double> next();
  /// The i-th point of the sequence (0-based), independent of next() state.
  std::vector<double> at(std::uint64_t index) const;

 private:
  SamplingBox box_;
  std::vector<double> shift_;
  std::uint64_t index_ = 0;
};

std::vector<std::vector<double>> sample_points(const SamplingBox& box, std::size_t count, std::uint64_t seed);

}  // namespace sode
