#include "rrtk/significance.hpp"

#include <algorithm>
#include <cmath>

#include "rrtk/errors.hpp"

namespace rrtk {

void SampleSet::validate() const {
  if (samples.size() < 2)
    throw ValidationError("sample set needs n >= 2 samples");
  if (m != 24 && m != 53)
    throw ValidationError("mantissa-size contract must be 24 or 53");
  for (const auto& s : samples)
    if (s.size() != reference.size())
      throw ValidationError("sample set: sample shape differs from reference");
}

bool bit_significance(double zi, int k) {
  return std::abs(zi) < std::ldexp(1.0, -k);
}

namespace {

// Largest k with d < 2^-k, clamped to [0, m]. For 2^e <= d < 2^(e+1) the
// strict inequality holds exactly for k <= -e - 1.
int max_significant_bit(double d, int m) {
  if (d == 0.0)
    return m;
  if (std::isnan(d))
    return 0;
  return std::clamp(-std::ilogb(d) - 1, 0, m);
}

} // namespace

std::vector<int> significant_bits(const SampleSet& s, SigMode mode) {
  s.validate();
  std::vector<int> out(s.reference.size(), 0);
  for (std::size_t v = 0; v < s.reference.size(); ++v) {
    const double ref = s.reference[v];
    double worst = 0.0;
    bool no_info = false;
    for (const auto& sample : s.samples) {
      double z = sample[v] - ref;
      if (mode == SigMode::Relative && ref != 0.0)
        z /= ref;
      if (std::isnan(z)) {
        no_info = true;
        break;
      }
      worst = std::max(worst, std::abs(z));
    }
    out[v] = no_info ? 0 : max_significant_bit(worst, s.m);
  }
  return out;
}

namespace {

template <class T>
double masked_mean(const std::vector<T>& map, const LabelVolume* mask) {
  if (mask) {
    if (mask->labels.size() != map.size())
      throw ValidationError("mean_sigbits: mask shape mismatch");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < map.size(); ++i)
      if (mask->labels[i] != 0) {
        sum += static_cast<double>(map[i]);
        ++count;
      }
    if (count == 0)
      throw ValidationError("mean_sigbits: empty mask");
    return sum / static_cast<double>(count);
  }
  if (map.empty())
    throw ValidationError("mean_sigbits: empty map");
  double sum = 0.0;
  for (const T v : map)
    sum += static_cast<double>(v);
  return sum / static_cast<double>(map.size());
}

} // namespace

double mean_sigbits(const std::vector<int>& map, const LabelVolume* mask) {
  return masked_mean(map, mask);
}

double mean_sigbits(const std::vector<double>& map, const LabelVolume* mask) {
  return masked_mean(map, mask);
}

} // namespace rrtk
