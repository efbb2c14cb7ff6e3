#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rrtk/volume_io.hpp"

namespace rrtk {

// Binary PPM (P6) export of one axial slice, viridis-like colormap.
// Values are scaled to [lo, hi]; figures here are static displays.
inline void write_slice_ppm(const std::vector<double>& values,
                            const std::array<std::size_t, 3>& shape,
                            std::size_t slice, double lo, double hi,
                            const std::string& path) {
  if (slice >= shape[0])
    throw ValidationError("render: slice out of range");
  const std::size_t h = shape[1], w = shape[2];
  std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) +
                       "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double v = values[(slice * h + y) * w + x];
      double t = (v - lo) / span;
      t = std::clamp(t, 0.0, 1.0);
      // coarse blue -> green -> yellow ramp
      const double r = std::clamp(1.5 * t - 0.25, 0.0, 1.0);
      const double g = std::clamp(1.2 * t + 0.05, 0.0, 1.0);
      const double b = std::clamp(1.0 - 1.4 * t, 0.05, 1.0);
      out.push_back(static_cast<unsigned char>(255.0 * r));
      out.push_back(static_cast<unsigned char>(255.0 * g));
      out.push_back(static_cast<unsigned char>(255.0 * b));
    }
  write_file_atomic(path, out);
}

} // namespace rrtk
