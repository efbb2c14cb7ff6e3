#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "rrtk/volume.hpp"

namespace rrtk {

// Sørensen-Dice overlap 2|A∩B| / (|A| + |B|) of one region's binary masks.
// Both masks empty counts as perfect agreement (1.0).
double dice(const LabelVolume& a, const LabelVolume& b, std::uint16_t region);

// Worst pair among all C(n,2) unordered sample pairs.
double min_pairwise_dice(const std::vector<LabelVolume>& vols,
                         std::uint16_t region);

// Per-voxel label entropy E = -sum p_i ln p_i over region frequencies across
// samples, with 0 ln 0 = 0. Every voxel label must appear in `regions`.
std::vector<double> entropy_map(const std::vector<LabelVolume>& vols,
                                const std::vector<std::uint16_t>& regions);

// Relabel through a total mapping (e.g. cortical labels to super classes).
LabelVolume mask_to_superclass(
    const LabelVolume& v,
    const std::map<std::uint16_t, std::uint16_t>& mapping);

} // namespace rrtk
