#include "sode/sampling.hpp"

#include "sode/errors.hpp"

#include <cmath>
#include <random>

namespace sode {

namespace {

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

double radical_inverse(std::uint64_t i, unsigned base) {
  double f = 1.0;
  double r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace

std::vector<double> SamplingBox::center() const {
  std::vector<double> c(dim());
  for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lo[i] + hi[i]);
  return c;
}

bool SamplingBox::contains(const std::vector<double>& p, double margin) const {
  for (std::size_t i = 0; i < dim(); ++i) {
    double pad = margin * width(i);
    if (p[i] < lo[i] - pad || p[i] > hi[i] + pad) return false;
  }
  return true;
}

HaltonSampler::HaltonSampler(const SamplingBox& box, std::uint64_t seed) : box_(box) {
  if (box.dim() > std::size(kPrimes)) throw InputError("sampling supports at most 16 coordinates");
  std::mt19937_64 rng(seed);
  shift_.resize(box.dim());
  for (auto& s : shift_) s = static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<double> HaltonSampler::at(std::uint64_t index) const {
  std::vector<double> p(box_.dim());
  for (std::size_t d = 0; d < box_.dim(); ++d) {
    double u = radical_inverse(index + 1, kPrimes[d]) + shift_[d];
    u -= std::floor(u);
    p[d] = box_.lo[d] + u * box_.width(d);
  }
  return p;
}

std::vector<double> HaltonSampler::next() { return at(index_++); }

std::vector<std::vector<double>> sample_points(const SamplingBox& box, std::size_t count, std::uint64_t seed) {
  HaltonSampler s(box, seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(s.next());
  return out;
}

}  // namespace sode
