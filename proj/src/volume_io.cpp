#include "rrtk/volume_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "rrtk/bytes.hpp"
#include "rrtk/philox.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rrtk {

std::string dtype_name(DType d) {
  switch (d) {
  case DType::F32: return "f32";
  case DType::F64: return "f64";
  case DType::U16: return "u16";
  }
  return "?";
}

std::string kind_name(Kind k) {
  switch (k) {
  case Kind::Image: return "image";
  case Kind::Warp: return "warp";
  case Kind::Labels: return "labels";
  case Kind::Sigbits: return "sigbits";
  case Kind::Entropy: return "entropy";
  }
  return "?";
}

namespace {

DType dtype_from_name(const std::string& s) {
  if (s == "f32") return DType::F32;
  if (s == "f64") return DType::F64;
  if (s == "u16") return DType::U16;
  throw ValidationError("unknown dtype: " + s);
}

Kind kind_from_name(const std::string& s) {
  if (s == "image") return Kind::Image;
  if (s == "warp") return Kind::Warp;
  if (s == "labels") return Kind::Labels;
  if (s == "sigbits") return Kind::Sigbits;
  if (s == "entropy") return Kind::Entropy;
  throw ValidationError("unknown volume kind: " + s);
}

std::size_t dtype_size(DType d) {
  switch (d) {
  case DType::F32: return 4;
  case DType::U16: return 2;
  default: return 8;
  }
}

json header_to_json(const VolumeHeader& h) {
  json j;
  j["shape"] = h.shape;
  j["channels"] = h.channels;
  j["dtype"] = dtype_name(h.dtype);
  j["voxel_size"] = h.voxel_size;
  j["kind"] = kind_name(h.kind);
  return j;
}

VolumeHeader header_from_json(const json& j) {
  VolumeHeader h;
  h.shape = j.at("shape").get<std::array<std::size_t, 3>>();
  h.channels = j.value("channels", std::size_t{1});
  h.dtype = dtype_from_name(j.at("dtype").get<std::string>());
  h.voxel_size = j.at("voxel_size").get<std::array<double, 3>>();
  h.kind = kind_from_name(j.at("kind").get<std::string>());
  return h;
}

} // namespace

void VolumeHeader::validate() const {
  if (shape[0] == 0 || shape[1] == 0 || shape[2] == 0 || channels == 0)
    throw ValidationError("volume header: shape must be positive");
  if (kind == Kind::Labels && dtype != DType::U16)
    throw ValidationError("volume header: labels require u16 voxels");
  if (kind != Kind::Labels && dtype == DType::U16)
    throw ValidationError("volume header: u16 is reserved for labels");
}

void write_file_atomic(const std::string& path,
                       const std::vector<unsigned char>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ValidationError("cannot open for writing: " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw ValidationError("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

void write_text_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path,
                    std::vector<unsigned char>(text.begin(), text.end()));
}

void write_scalar_volume(const VolumeHeader& header,
                         const std::vector<double>& values,
                         const std::string& path_base) {
  header.validate();
  if (header.dtype == DType::U16)
    throw ValidationError("write_scalar_volume: use write_label_volume");
  if (values.size() != header.voxel_count())
    throw ValidationError("write_scalar_volume: length mismatch");

  std::vector<unsigned char> blob;
  blob.reserve(values.size() * dtype_size(header.dtype));
  for (const double v : values) {
    if (header.dtype == DType::F32)
      put_f32(blob, static_cast<float>(v));
    else
      put_f64(blob, v);
  }
  write_file_atomic(path_base + ".raw", blob);
  write_text_atomic(path_base + ".json", header_to_json(header).dump(2) + "\n");
}

void write_label_volume(const LabelVolume& labels,
                        const std::array<double, 3>& voxel_size,
                        const std::string& path_base) {
  labels.validate();
  VolumeHeader header;
  header.shape = labels.shape;
  header.dtype = DType::U16;
  header.voxel_size = voxel_size;
  header.kind = Kind::Labels;
  header.validate();

  std::vector<unsigned char> blob;
  blob.reserve(labels.labels.size() * 2);
  for (const std::uint16_t v : labels.labels)
    put_u16(blob, v);
  write_file_atomic(path_base + ".raw", blob);

  json j = header_to_json(header);
  json table = json::object();
  for (const auto& [id, name] : labels.region_table)
    table[std::to_string(id)] = name;
  j["region_table"] = table;
  write_text_atomic(path_base + ".json", j.dump(2) + "\n");
}

LoadedVolume read_volume(const std::string& path_base) {
  std::ifstream jf(path_base + ".json");
  if (!jf)
    throw ValidationError("missing sidecar: " + path_base + ".json");
  json j;
  try {
    jf >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed JSON sidecar " + path_base + ".json: " +
                          e.what());
  }

  LoadedVolume out;
  try {
    out.header = header_from_json(j);
  } catch (const json::exception& e) {
    throw ValidationError("malformed JSON sidecar " + path_base + ".json: " +
                          e.what());
  }
  out.header.validate();

  std::ifstream rf(path_base + ".raw", std::ios::binary);
  if (!rf)
    throw ValidationError("missing blob: " + path_base + ".raw");
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(rf)),
                                  std::istreambuf_iterator<char>());
  const std::size_t expect =
      out.header.voxel_count() * dtype_size(out.header.dtype);
  if (blob.size() != expect)
    throw ValidationError("length mismatch: " + path_base + ".raw holds " +
                          std::to_string(blob.size()) + " bytes, expected " +
                          std::to_string(expect));

  if (out.header.kind == Kind::Labels) {
    out.labels.shape = out.header.shape;
    out.labels.labels.resize(out.header.voxel_count());
    for (std::size_t i = 0; i < out.labels.labels.size(); ++i)
      out.labels.labels[i] = get_u16(blob.data() + 2 * i);
    if (j.contains("region_table"))
      for (const auto& [key, name] : j.at("region_table").items())
        out.labels.region_table[static_cast<std::uint16_t>(std::stoi(key))] =
            name.get<std::string>();
    out.labels.validate();
  } else {
    out.values.resize(out.header.voxel_count());
    if (out.header.dtype == DType::F32)
      for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = static_cast<double>(get_f32(blob.data() + 4 * i));
    else
      for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = get_f64(blob.data() + 8 * i);
  }
  return out;
}

LoadedVolume read_volume(const std::string& path_base, DType expected) {
  LoadedVolume v = read_volume(path_base);
  if (v.header.dtype != expected)
    throw ValidationError("dtype mismatch: " + path_base + " holds " +
                          dtype_name(v.header.dtype) + ", requested " +
                          dtype_name(expected) + " (no silent cast)");
  return v;
}

std::pair<Tensor, LabelVolume>
synth_subject(std::uint64_t seed, const std::array<std::size_t, 3>& shape,
              std::size_t n_regions) {
  if (n_regions < 2)
    throw ValidationError("synth_subject: need at least 2 regions");
  if (n_regions > 60000)
    throw ValidationError("synth_subject: too many regions");
  const std::size_t nvox = shape[0] * shape[1] * shape[2];
  if (nvox < 8 * n_regions || shape[1] < 4 || shape[2] < 4)
    throw ValidationError("synth_subject: shape too small for " +
                          std::to_string(n_regions) + " regions");

  Philox rng(seed);
  LabelVolume labels;
  labels.shape = shape;
  labels.labels.assign(nvox, 0);
  labels.region_table[0] = "background";

  const double dd = static_cast<double>(shape[0]);
  const double dh = static_cast<double>(shape[1]);
  const double dw = static_cast<double>(shape[2]);
  const bool flat = shape[0] == 1;

  // Paint shapes in label order; later shapes overwrite earlier ones.
  for (std::size_t r = 1; r < n_regions; ++r) {
    labels.region_table[static_cast<std::uint16_t>(r)] =
        "region-" + std::to_string(r);
    const bool box = (r % 2) == 0;
    const double cz = flat ? 0.0 : (0.15 + 0.7 * rng.next_unit()) * dd;
    const double cy = (0.15 + 0.7 * rng.next_unit()) * dh;
    const double cx = (0.15 + 0.7 * rng.next_unit()) * dw;
    const double rz = flat ? 1.0 : (0.08 + 0.17 * rng.next_unit()) * dd;
    const double ry = (0.08 + 0.17 * rng.next_unit()) * dh;
    const double rx = (0.08 + 0.17 * rng.next_unit()) * dw;

    for (std::size_t z = 0; z < shape[0]; ++z)
      for (std::size_t y = 0; y < shape[1]; ++y)
        for (std::size_t x = 0; x < shape[2]; ++x) {
          const double az = (static_cast<double>(z) - cz) / rz;
          const double ay = (static_cast<double>(y) - cy) / ry;
          const double ax = (static_cast<double>(x) - cx) / rx;
          const bool inside =
              box ? (std::abs(az) <= 1.0 && std::abs(ay) <= 1.0 &&
                     std::abs(ax) <= 1.0)
                  : (az * az + ay * ay + ax * ax <= 1.0);
          if (inside)
            labels.at(z, y, x) = static_cast<std::uint16_t>(r);
        }
  }

  // Per-region contrast plus a smooth low-frequency bias field.
  std::vector<double> contrast(n_regions);
  for (std::size_t r = 0; r < n_regions; ++r)
    contrast[r] = 0.15 + 0.8 * rng.next_unit();
  const double bz = 0.2 * (rng.next_unit() - 0.5);
  const double by = 0.2 * (rng.next_unit() - 0.5);
  const double bx = 0.2 * (rng.next_unit() - 0.5);
  const double bamp = 0.05 + 0.05 * rng.next_unit();
  const double bphase = 6.2831853071795864769 * rng.next_unit();

  Tensor image({1, shape[0], shape[1], shape[2]});
  for (std::size_t z = 0; z < shape[0]; ++z)
    for (std::size_t y = 0; y < shape[1]; ++y)
      for (std::size_t x = 0; x < shape[2]; ++x) {
        const double base = contrast[labels.at(z, y, x)];
        const double ramp = bz * static_cast<double>(z) / dd +
                            by * static_cast<double>(y) / dh +
                            bx * static_cast<double>(x) / dw;
        const double wave =
            bamp * std::sin(bphase + 6.2831853071795864769 *
                                         (static_cast<double>(y) / dh +
                                          static_cast<double>(x) / dw));
        image.at(0, z, y, x) = base + ramp + wave;
      }

  const auto [mn, mx] =
      std::minmax_element(image.data.begin(), image.data.end());
  const double lo = *mn, hi = *mx;
  if (hi > lo)
    for (double& v : image.data)
      v = (v - lo) / (hi - lo);
  else
    std::fill(image.data.begin(), image.data.end(), 0.0);

  return {std::move(image), std::move(labels)};
}

} // namespace rrtk
