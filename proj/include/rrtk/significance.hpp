#pragma once

#include <optional>
#include <vector>

#include "rrtk/volume.hpp"

namespace rrtk {

// n perturbed result arrays plus the unperturbed IEEE reference, aligned
// element-wise. m is the mantissa-size contract (24 or 53).
struct SampleSet {
  std::vector<std::vector<double>> samples;
  std::vector<double> reference;
  int m = 53;

  void validate() const;
};

enum class SigMode {
  Absolute, // |X_i - x_IEEE| < 2^-k, as the estimator is written
  Relative  // |(X_i - x_IEEE) / x_IEEE| < 2^-k
};

// Significance of mantissa bit k for one deviation Z_i: |Z_i| < 2^-k.
bool bit_significance(double zi, int k);

// Element-wise maximal bit index significant for all samples, in [0, m].
// A NaN sample at an element yields 0 there (no information).
std::vector<int> significant_bits(const SampleSet& s,
                                  SigMode mode = SigMode::Absolute);

// Mean over elements; with a mask, only voxels with a nonzero label count.
double mean_sigbits(const std::vector<int>& map,
                    const LabelVolume* mask = nullptr);

// Same estimate for real-valued per-element bit counts (e.g. warp-field
// component maps averaged before the mean).
double mean_sigbits(const std::vector<double>& map,
                    const LabelVolume* mask = nullptr);

} // namespace rrtk
