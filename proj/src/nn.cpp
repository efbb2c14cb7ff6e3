#include "rrtk/nn.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "rrtk/bytes.hpp"
#include "rrtk/philox.hpp"
#include "rrtk/volume_io.hpp"

using nlohmann::json;

namespace rrtk {

std::map<std::string, std::vector<std::size_t>>
unet_weight_shapes(const UNetSpec& spec, bool volumetric) {
  const std::size_t k = spec.kernel;
  const std::size_t kd = volumetric ? k : 1;
  std::map<std::string, std::vector<std::size_t>> shapes;

  const auto block = [&](const std::string& name, std::size_t cin,
                         std::size_t cout) {
    shapes[name + ".w"] = {cout, cin, kd, k, k};
    shapes[name + ".b"] = {cout};
  };

  const auto& ec = spec.encoder_channels;
  const auto& dc = spec.decoder_channels;
  block("enc0", spec.in_channels, ec[0]);
  block("enc1", ec[0], ec[1]);
  block("enc2", ec[1], ec[2]);
  block("enc3", ec[2], ec[3]);
  block("dec0", ec[3] + ec[2], dc[0]);
  block("dec1", dc[0] + ec[1], dc[1]);
  block("dec2", dc[1] + ec[0], dc[2]);
  shapes["head.w"] = {spec.out_channels, dc[2], 1, 1, 1};
  shapes["head.b"] = {spec.out_channels};
  return shapes;
}

WeightStore generate_weights(const UNetSpec& spec, bool volumetric,
                             std::uint64_t seed) {
  Philox rng(seed);
  const auto gauss = [&rng]() {
    const double u1 = 1.0 - rng.next_unit(); // (0, 1]
    const double u2 = rng.next_unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.2831853071795864769 * u2);
  };

  WeightStore store;
  store.volumetric = volumetric;
  for (const auto& [name, shape] : unet_weight_shapes(spec, volumetric)) {
    Tensor t(shape);
    if (shape.size() == 5) {
      // He scaling: std = sqrt(2 / fan_in)
      const double fan_in =
          static_cast<double>(shape[1] * shape[2] * shape[3] * shape[4]);
      const double sd = std::sqrt(2.0 / fan_in);
      for (double& v : t.data)
        v = sd * gauss();
    }
    // biases stay zero
    store.tensors.emplace(name, std::move(t));
  }
  return store;
}

void save_weights(const WeightStore& store, const std::string& path_base) {
  std::vector<unsigned char> blob;
  json manifest;
  manifest["volumetric"] = store.volumetric;
  json tensors = json::array();
  for (const auto& [name, t] : store.tensors) {
    json entry;
    entry["name"] = name;
    entry["shape"] = t.shape;
    entry["offset"] = blob.size();
    for (const double v : t.data)
      put_f64(blob, v);
    tensors.push_back(entry);
  }
  manifest["tensors"] = tensors;
  write_file_atomic(path_base + ".raw", blob);
  write_text_atomic(path_base + ".json", manifest.dump(2) + "\n");
}

WeightStore load_weights(const std::string& path_base) {
  std::ifstream jf(path_base + ".json");
  if (!jf)
    throw ValidationError("missing weight manifest: " + path_base + ".json");
  json manifest;
  try {
    jf >> manifest;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed weight manifest: ") +
                          e.what());
  }
  std::ifstream rf(path_base + ".raw", std::ios::binary);
  if (!rf)
    throw ValidationError("missing weight blob: " + path_base + ".raw");
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(rf)),
                                  std::istreambuf_iterator<char>());

  WeightStore store;
  store.volumetric = manifest.at("volumetric").get<bool>();
  for (const auto& entry : manifest.at("tensors")) {
    Tensor t(entry.at("shape").get<std::vector<std::size_t>>());
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    if (offset + 8 * t.size() > blob.size())
      throw ValidationError("weight blob length mismatch: " + path_base);
    for (std::size_t i = 0; i < t.size(); ++i)
      t.data[i] = get_f64(blob.data() + offset + 8 * i);
    store.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return store;
}

namespace {

std::string act_name(ActKind k) {
  switch (k) {
  case ActKind::Relu: return "relu";
  case ActKind::LeakyRelu: return "leaky_relu";
  case ActKind::Tanh: return "tanh";
  case ActKind::Softmax: return "softmax";
  }
  return "?";
}

ActKind act_from_name(const std::string& s) {
  if (s == "relu") return ActKind::Relu;
  if (s == "leaky_relu") return ActKind::LeakyRelu;
  if (s == "tanh") return ActKind::Tanh;
  if (s == "softmax") return ActKind::Softmax;
  throw ValidationError("unknown activation: " + s);
}

} // namespace

void unet_spec_to_json_file(const UNetSpec& spec, const std::string& path) {
  json j;
  j["in_channels"] = spec.in_channels;
  j["out_channels"] = spec.out_channels;
  j["encoder_channels"] = spec.encoder_channels;
  j["decoder_channels"] = spec.decoder_channels;
  j["kernel"] = spec.kernel;
  j["activation"] = act_name(spec.block_activation);
  write_text_atomic(path, j.dump(2) + "\n");
}

UNetSpec unet_spec_from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f)
    throw ValidationError("missing U-Net spec: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed U-Net spec: ") + e.what());
  }
  UNetSpec spec;
  spec.in_channels = j.at("in_channels").get<std::size_t>();
  spec.out_channels = j.at("out_channels").get<std::size_t>();
  spec.encoder_channels =
      j.at("encoder_channels").get<std::array<std::size_t, 4>>();
  spec.decoder_channels =
      j.at("decoder_channels").get<std::array<std::size_t, 3>>();
  spec.kernel = j.at("kernel").get<std::size_t>();
  spec.block_activation = act_from_name(j.at("activation").get<std::string>());
  return spec;
}

} // namespace rrtk
