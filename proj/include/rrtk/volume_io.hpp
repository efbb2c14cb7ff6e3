#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rrtk/tensor.hpp"
#include "rrtk/volume.hpp"

namespace rrtk {

enum class DType { F32, F64, U16 };
enum class Kind { Image, Warp, Labels, Sigbits, Entropy };

std::string dtype_name(DType d);
std::string kind_name(Kind k);

// On-disk format: raw little-endian voxel blob `<path>.raw` plus a JSON
// sidecar `<path>.json` carrying shape, dtype, voxel size, kind and (for
// labels) the region table. Multi-channel data (warp fields) keeps the
// spatial shape and records a channel count.
struct VolumeHeader {
  std::array<std::size_t, 3> shape{}; // D, H, W
  std::size_t channels = 1;
  DType dtype = DType::F64;
  std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
  Kind kind = Kind::Image;

  std::size_t voxel_count() const {
    return channels * shape[0] * shape[1] * shape[2];
  }
  void validate() const;
};

struct LoadedVolume {
  VolumeHeader header;
  std::vector<double> values; // scalar kinds
  LabelVolume labels;         // kind == Labels
};

// Atomic: data lands under a temporary name and is renamed into place.
void write_scalar_volume(const VolumeHeader& header,
                         const std::vector<double>& values,
                         const std::string& path_base);
void write_label_volume(const LabelVolume& labels,
                        const std::array<double, 3>& voxel_size,
                        const std::string& path_base);

LoadedVolume read_volume(const std::string& path_base);
// Rejects with a dtype error when the stored dtype differs; never casts.
LoadedVolume read_volume(const std::string& path_base, DType expected);

void write_file_atomic(const std::string& path,
                       const std::vector<unsigned char>& bytes);
void write_text_atomic(const std::string& path, const std::string& text);

// Deterministic synthetic subject: a geometric label map (ellipsoids and
// boxes) plus an intensity image with per-region contrast and a smooth
// bias field, min-max scaled to [0, 1]. Image tensor shape is [1, D, H, W].
std::pair<Tensor, LabelVolume>
synth_subject(std::uint64_t seed, const std::array<std::size_t, 3>& shape,
              std::size_t n_regions);

} // namespace rrtk
