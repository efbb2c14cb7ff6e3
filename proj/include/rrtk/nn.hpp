#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rrtk/tensor.hpp"
#include "rrtk/volume.hpp"

namespace rrtk {

// Kernels are templated on the scalar type so the audit instantiation
// (scalar_ops.hpp) can verify that no tensor arithmetic bypasses the
// context. Real runs use S = double.

// Cross-correlation, stride 1, zero ("same") padding.
// input [Cin, D, H, W], kernel [Cout, Cin, kd, kh, kw], bias [Cout].
// Accumulation order is part of the contract (it fixes RR trajectories):
// acc starts at the bias, then input channels ascending, then kernel taps
// in row-major (kd, kh, kw) order; taps falling outside the input are
// skipped. Each tap contributes acc = add(acc, mul(w, x)).
template <class S>
TensorT<S> conv(const TensorT<S>& input, const TensorT<S>& kernel,
                const TensorT<S>& bias, RRContext& ctx) {
  using O = Ops<S>;
  if (input.shape.size() != 4 || kernel.shape.size() != 5)
    throw ValidationError("conv: expects rank-4 input and rank-5 kernel");
  const std::size_t cin = input.shape[0], d = input.shape[1],
                    h = input.shape[2], w = input.shape[3];
  const std::size_t cout = kernel.shape[0];
  if (kernel.shape[1] != cin)
    throw ValidationError("conv: kernel input channels mismatch");
  if (bias.size() != cout)
    throw ValidationError("conv: bias size mismatch");
  const std::size_t kd = kernel.shape[2], kh = kernel.shape[3],
                    kw = kernel.shape[4];
  if (kd % 2 == 0 || kh % 2 == 0 || kw % 2 == 0)
    throw ValidationError("conv: kernel dims must be odd");
  const std::ptrdiff_t rd = static_cast<std::ptrdiff_t>(kd) / 2;
  const std::ptrdiff_t rh = static_cast<std::ptrdiff_t>(kh) / 2;
  const std::ptrdiff_t rw = static_cast<std::ptrdiff_t>(kw) / 2;

  TensorT<S> out({cout, d, h, w});
  const std::size_t kstride_c = cin * kd * kh * kw;
  for (std::size_t co = 0; co < cout; ++co) {
    const S* kbase = kernel.data.data() + co * kstride_c;
    for (std::size_t z = 0; z < d; ++z)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          S acc = bias.data[co];
          const S* kc = kbase;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t tz = 0; tz < kd; ++tz)
              for (std::size_t ty = 0; ty < kh; ++ty)
                for (std::size_t tx = 0; tx < kw; ++tx) {
                  const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(z) +
                                            static_cast<std::ptrdiff_t>(tz) -
                                            rd;
                  const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y) +
                                            static_cast<std::ptrdiff_t>(ty) -
                                            rh;
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x) +
                                            static_cast<std::ptrdiff_t>(tx) -
                                            rw;
                  if (iz < 0 || iy < 0 || ix < 0 ||
                      iz >= static_cast<std::ptrdiff_t>(d) ||
                      iy >= static_cast<std::ptrdiff_t>(h) ||
                      ix >= static_cast<std::ptrdiff_t>(w))
                    continue;
                  const S xv = input.at(ci, static_cast<std::size_t>(iz),
                                        static_cast<std::size_t>(iy),
                                        static_cast<std::size_t>(ix));
                  acc = O::add(ctx, acc,
                               O::mul(ctx, kc[(tz * kh + ty) * kw + tx], xv));
                }
            kc += kd * kh * kw;
          }
          out.at(co, z, y, x) = acc;
        }
  }
  return out;
}

// Window maximum. Comparisons are exact: max is a selection, not an FP
// arithmetic operation, so RR and IEEE mode agree on identical input.
template <class S>
TensorT<S> maxpool(const TensorT<S>& input,
                   const std::array<std::size_t, 3>& window, RRContext&) {
  using O = Ops<S>;
  if (input.shape.size() != 4)
    throw ValidationError("maxpool: expects rank-4 input");
  const std::size_t c = input.shape[0];
  for (int a = 0; a < 3; ++a)
    if (window[a] == 0 || input.shape[a + 1] % window[a] != 0)
      throw ValidationError("maxpool: window does not divide input dims");
  const std::size_t od = input.shape[1] / window[0];
  const std::size_t oh = input.shape[2] / window[1];
  const std::size_t ow = input.shape[3] / window[2];

  TensorT<S> out({c, od, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t z = 0; z < od; ++z)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          S best = input.at(ch, z * window[0], y * window[1], x * window[2]);
          for (std::size_t tz = 0; tz < window[0]; ++tz)
            for (std::size_t ty = 0; ty < window[1]; ++ty)
              for (std::size_t tx = 0; tx < window[2]; ++tx) {
                const S v = input.at(ch, z * window[0] + tz,
                                     y * window[1] + ty, x * window[2] + tx);
                if (O::less(best, v))
                  best = v;
              }
          out.at(ch, z, y, x) = best;
        }
  return out;
}

// Nearest-neighbour upsampling: pure copy, no FP ops.
template <class S>
TensorT<S> upsample_nearest(const TensorT<S>& input,
                            const std::array<std::size_t, 3>& factor) {
  if (input.shape.size() != 4)
    throw ValidationError("upsample: expects rank-4 input");
  const std::size_t c = input.shape[0];
  const std::size_t od = input.shape[1] * factor[0];
  const std::size_t oh = input.shape[2] * factor[1];
  const std::size_t ow = input.shape[3] * factor[2];
  TensorT<S> out({c, od, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t z = 0; z < od; ++z)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x)
          out.at(ch, z, y, x) =
              input.at(ch, z / factor[0], y / factor[1], x / factor[2]);
  return out;
}

template <class S>
TensorT<S> concat_channels(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape.size() != 4 || b.shape.size() != 4 || a.shape[1] != b.shape[1] ||
      a.shape[2] != b.shape[2] || a.shape[3] != b.shape[3])
    throw ValidationError("concat: spatial shape mismatch");
  TensorT<S> out({a.shape[0] + b.shape[0], a.shape[1], a.shape[2], a.shape[3]});
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
  return out;
}

enum class ActKind { Relu, LeakyRelu, Tanh, Softmax };

// Element-wise activation; exp/tanh go through the context's libm layer.
// Softmax normalizes per voxel over the channel axis with the usual
// max-subtraction (the max itself is a selection, not an FP op).
template <class S>
TensorT<S> activation(const TensorT<S>& input, ActKind kind, RRContext& ctx) {
  using O = Ops<S>;
  TensorT<S> out(input.shape);
  switch (kind) {
  case ActKind::Relu: {
    const S zero = O::from(0.0);
    for (std::size_t i = 0; i < input.size(); ++i)
      out.data[i] = O::less(input.data[i], zero) ? zero : input.data[i];
    return out;
  }
  case ActKind::LeakyRelu: {
    const S zero = O::from(0.0);
    const S slope = O::from(0.01);
    for (std::size_t i = 0; i < input.size(); ++i)
      out.data[i] = O::less(input.data[i], zero)
                        ? O::mul(ctx, slope, input.data[i])
                        : input.data[i];
    return out;
  }
  case ActKind::Tanh: {
    for (std::size_t i = 0; i < input.size(); ++i)
      out.data[i] = O::tanh(ctx, input.data[i]);
    return out;
  }
  case ActKind::Softmax: {
    if (input.shape.size() != 4)
      throw ValidationError("softmax: expects rank-4 input");
    const std::size_t c = input.shape[0];
    const std::size_t spatial =
        input.shape[1] * input.shape[2] * input.shape[3];
    std::vector<S> ex(c);
    for (std::size_t v = 0; v < spatial; ++v) {
      S m = input.data[v];
      for (std::size_t ch = 1; ch < c; ++ch)
        if (O::less(m, input.data[ch * spatial + v]))
          m = input.data[ch * spatial + v];
      S sum = O::from(0.0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        ex[ch] = O::exp(ctx, O::sub(ctx, input.data[ch * spatial + v], m));
        sum = O::add(ctx, sum, ex[ch]);
      }
      for (std::size_t ch = 0; ch < c; ++ch)
        out.data[ch * spatial + v] = O::div(ctx, ex[ch], sum);
    }
    return out;
  }
  }
  throw ValidationError("activation: unknown kind");
}

// Trilinear (bilinear when D == 1) interpolation of `image` at x + u(x).
// warp carries 3 displacement channels (z, y, x) for volumes, 2 (y, x) for
// single-slice data. Out-of-bounds positions clamp to the edge; the clamp
// and the floor are selections, everything else is routed.
// Interpolation is a chain of lerps, x axis innermost, each evaluated as
// lerp(a, b, f) = add(a, mul(f, sub(b, a))).
template <class S>
TensorT<S> resample(const TensorT<S>& image, const TensorT<S>& warp,
                    RRContext& ctx) {
  using O = Ops<S>;
  if (image.shape.size() != 4 || warp.shape.size() != 4)
    throw ValidationError("resample: expects rank-4 tensors");
  const std::size_t d = image.shape[1], h = image.shape[2], w = image.shape[3];
  if (warp.shape[1] != d || warp.shape[2] != h || warp.shape[3] != w)
    throw ValidationError("resample: warp spatial shape mismatch");
  const std::size_t wc = warp.shape[0];
  if (wc != 2 && wc != 3)
    throw ValidationError("resample: warp must have 2 or 3 channels");
  if (wc == 2 && d != 1)
    throw ValidationError("resample: 2-channel warp requires D == 1");
  if (wc == 3 && d == 1)
    throw ValidationError("resample: 3-channel warp requires D > 1");

  const auto lerp = [&](S a, S b, S f) {
    return O::add(ctx, a, O::mul(ctx, f, O::sub(ctx, b, a)));
  };
  const auto split = [](double p, std::size_t dim, std::size_t& i0,
                        std::size_t& i1, double& frac) {
    double pc = p;
    const double hi = static_cast<double>(dim - 1);
    if (!(pc >= 0.0))
      pc = 0.0;
    if (pc > hi)
      pc = hi;
    const double fl = std::floor(pc);
    i0 = static_cast<std::size_t>(fl);
    i1 = i0 + 1 < dim ? i0 + 1 : i0;
    frac = pc - fl; // exact: same binade subtraction of an integer part
  };

  TensorT<S> out(image.shape);
  for (std::size_t z = 0; z < d; ++z)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t off = (z * h + y) * w + x;
        const S uz = wc == 3 ? warp.data[off] : O::from(0.0);
        const S uy = warp.data[(wc - 2) * d * h * w + off];
        const S ux = warp.data[(wc - 1) * d * h * w + off];
        const S pz = O::add(ctx, O::from(static_cast<double>(z)), uz);
        const S py = O::add(ctx, O::from(static_cast<double>(y)), uy);
        const S px = O::add(ctx, O::from(static_cast<double>(x)), ux);

        std::size_t z0, z1, y0, y1, x0, x1;
        double fz, fy, fx;
        split(O::raw(pz), d, z0, z1, fz);
        split(O::raw(py), h, y0, y1, fy);
        split(O::raw(px), w, x0, x1, fx);
        const S sfz = O::from(fz), sfy = O::from(fy), sfx = O::from(fx);

        for (std::size_t c = 0; c < image.shape[0]; ++c) {
          const S v00 =
              lerp(image.at(c, z0, y0, x0), image.at(c, z0, y0, x1), sfx);
          const S v01 =
              lerp(image.at(c, z0, y1, x0), image.at(c, z0, y1, x1), sfx);
          const S vz0 = lerp(v00, v01, sfy);
          if (d == 1) {
            out.at(c, z, y, x) = vz0;
            continue;
          }
          const S v10 =
              lerp(image.at(c, z1, y0, x0), image.at(c, z1, y0, x1), sfx);
          const S v11 =
              lerp(image.at(c, z1, y1, x0), image.at(c, z1, y1, x1), sfx);
          const S vz1 = lerp(v10, v11, sfy);
          out.at(c, z, y, x) = lerp(vz0, vz1, sfz);
        }
      }
  return out;
}

// Per-voxel argmax over channels; ties break to the lowest channel index.
template <class S> LabelVolume argmax_labels(const TensorT<S>& logits) {
  using O = Ops<S>;
  if (logits.shape.size() != 4)
    throw ValidationError("argmax_labels: expects rank-4 logits");
  const std::size_t c = logits.shape[0];
  const std::size_t spatial =
      logits.shape[1] * logits.shape[2] * logits.shape[3];
  LabelVolume out;
  out.shape = {logits.shape[1], logits.shape[2], logits.shape[3]};
  out.labels.resize(spatial);
  for (std::size_t ch = 0; ch < c; ++ch)
    out.region_table[static_cast<std::uint16_t>(ch)] =
        "region-" + std::to_string(ch);
  for (std::size_t v = 0; v < spatial; ++v) {
    std::size_t best = 0;
    for (std::size_t ch = 1; ch < c; ++ch)
      if (O::less(logits.data[best * spatial + v],
                  logits.data[ch * spatial + v]))
        best = ch;
    out.labels[v] = static_cast<std::uint16_t>(best);
  }
  return out;
}

// 4 encoder blocks, 3 decoder blocks, each decoder block consuming the skip
// from its respective encoder block.
struct UNetSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::array<std::size_t, 4> encoder_channels{4, 8, 16, 16};
  std::array<std::size_t, 3> decoder_channels{16, 8, 4};
  std::size_t kernel = 3;
  ActKind block_activation = ActKind::Relu;
};

template <class S> using WeightMap = std::map<std::string, TensorT<S>>;

// Named conv kernels and biases, seed-generated or loaded from disk.
struct WeightStore {
  bool volumetric = false; // 3x3x3 kernels when true, 1x3x3 otherwise
  WeightMap<double> tensors;
};

// name -> tensor shape for the given spec, used for generation and
// validation.
std::map<std::string, std::vector<std::size_t>>
unet_weight_shapes(const UNetSpec& spec, bool volumetric);

// He-scaled normal weights, zero biases, deterministic in the seed.
WeightStore generate_weights(const UNetSpec& spec, bool volumetric,
                             std::uint64_t seed);

void save_weights(const WeightStore& store, const std::string& path_base);
WeightStore load_weights(const std::string& path_base);

UNetSpec unet_spec_from_json_file(const std::string& path);
void unet_spec_to_json_file(const UNetSpec& spec, const std::string& path);

inline WeightMap<Audited> to_audited(const WeightMap<double>& w) {
  WeightMap<Audited> out;
  for (const auto& [name, t] : w)
    out.emplace(name, to_audited(t));
  return out;
}

// Deterministic forward pass; all FP ops routed through ctx.
// Encoder blocks run at full, 1/2, 1/4 and 1/8 resolution; decoder blocks
// mirror the first three with nearest-neighbour upsampling and skip
// concatenation. The head is an unactivated 1x1 conv.
template <class S>
TensorT<S> unet_forward(const UNetSpec& spec, const WeightMap<S>& weights,
                        const TensorT<S>& input, RRContext& ctx) {
  if (input.shape.size() != 4)
    throw ValidationError("unet: expects rank-4 input");
  if (input.shape[0] != spec.in_channels)
    throw ValidationError("unet: input channel mismatch");
  for (int a = 1; a < 4; ++a)
    if (input.shape[a] > 1 && input.shape[a] % 16 != 0)
      throw ValidationError("unet: spatial dims must be divisible by 16");

  const bool volumetric = input.shape[1] > 1;
  const std::array<std::size_t, 3> pool{volumetric ? 2u : 1u, 2, 2};

  const auto tensor = [&](const std::string& name) -> const TensorT<S>& {
    const auto it = weights.find(name);
    if (it == weights.end())
      throw ValidationError("unet: missing weight tensor " + name);
    return it->second;
  };
  const auto block = [&](const TensorT<S>& in, const std::string& name,
                         int index) {
    try {
      return activation(conv(in, tensor(name + ".w"), tensor(name + ".b"),
                             ctx),
                        spec.block_activation, ctx);
    } catch (const ValidationError& e) {
      throw ValidationError("unet block " + std::to_string(index) + " (" +
                            name + "): " + e.what());
    }
  };

  const TensorT<S> e0 = block(input, "enc0", 0);
  const TensorT<S> e1 = block(maxpool(e0, pool, ctx), "enc1", 1);
  const TensorT<S> e2 = block(maxpool(e1, pool, ctx), "enc2", 2);
  const TensorT<S> e3 = block(maxpool(e2, pool, ctx), "enc3", 3);

  const TensorT<S> d0 =
      block(concat_channels(upsample_nearest(e3, pool), e2), "dec0", 4);
  const TensorT<S> d1 =
      block(concat_channels(upsample_nearest(d0, pool), e1), "dec1", 5);
  const TensorT<S> d2 =
      block(concat_channels(upsample_nearest(d1, pool), e0), "dec2", 6);

  try {
    return conv(d2, tensor("head.w"), tensor("head.b"), ctx);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("unet head: ") + e.what());
  }
}

} // namespace rrtk
