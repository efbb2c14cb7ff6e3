#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rrtk/errors.hpp"

namespace rrtk {

// Dense 3D categorical field. Every voxel's label must appear in
// region_table.
struct LabelVolume {
  std::array<std::size_t, 3> shape{}; // D, H, W
  std::vector<std::uint16_t> labels;
  std::map<std::uint16_t, std::string> region_table;

  std::size_t size() const { return shape[0] * shape[1] * shape[2]; }

  std::uint16_t& at(std::size_t z, std::size_t y, std::size_t x) {
    return labels[(z * shape[1] + y) * shape[2] + x];
  }
  std::uint16_t at(std::size_t z, std::size_t y, std::size_t x) const {
    return labels[(z * shape[1] + y) * shape[2] + x];
  }

  void validate() const {
    if (labels.size() != size())
      throw ValidationError("label volume: voxel count does not match shape");
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (!region_table.count(labels[i]))
        throw ValidationError("label volume: label " +
                              std::to_string(labels[i]) + " at voxel " +
                              std::to_string(i) + " missing from region table");
  }
};

} // namespace rrtk
