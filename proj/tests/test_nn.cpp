#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "rrtk/nn.hpp"
#include "rrtk/philox.hpp"

using namespace rrtk;

namespace {

RRContext ieee_ctx() { return {VirtualPrecision(53), Mode::IEEE, 0}; }

Tensor random_tensor(std::vector<std::size_t> shape, Philox& rng,
                     double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data)
    v = (rng.next_unit() - 0.5) * 2.0 * scale;
  return t;
}

// Plain-double convolution with the documented accumulation order: bias
// first, input channels ascending, taps row-major, out-of-bounds skipped.
Tensor conv_naive(const Tensor& in, const Tensor& k, const Tensor& bias) {
  const std::size_t cin = in.shape[0], d = in.shape[1], h = in.shape[2],
                    w = in.shape[3];
  const std::size_t cout = k.shape[0], kd = k.shape[2], kh = k.shape[3],
                    kw = k.shape[4];
  Tensor out({cout, d, h, w});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t z = 0; z < d; ++z)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double acc = bias.data[co];
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t tz = 0; tz < kd; ++tz)
              for (std::size_t ty = 0; ty < kh; ++ty)
                for (std::size_t tx = 0; tx < kw; ++tx) {
                  const std::ptrdiff_t iz = z + tz - kd / 2;
                  const std::ptrdiff_t iy = y + ty - kh / 2;
                  const std::ptrdiff_t ix = x + tx - kw / 2;
                  if (iz < 0 || iy < 0 || ix < 0 ||
                      iz >= static_cast<std::ptrdiff_t>(d) ||
                      iy >= static_cast<std::ptrdiff_t>(h) ||
                      ix >= static_cast<std::ptrdiff_t>(w))
                    continue;
                  const double wv =
                      k.data[(((co * cin + ci) * kd + tz) * kh + ty) * kw + tx];
                  acc = acc + wv * in.at(ci, iz, iy, ix);
                }
          out.at(co, z, y, x) = acc;
        }
  return out;
}

// Plain-double bilinear/trilinear resampling mirroring the lerp chain.
Tensor resample_naive(const Tensor& img, const Tensor& warp) {
  const std::size_t d = img.shape[1], h = img.shape[2], w = img.shape[3];
  const std::size_t wc = warp.shape[0];
  auto split = [](double p, std::size_t dim, std::size_t& i0, std::size_t& i1,
                  double& f) {
    double pc = p;
    if (!(pc >= 0.0))
      pc = 0.0;
    if (pc > dim - 1.0)
      pc = dim - 1.0;
    const double fl = std::floor(pc);
    i0 = static_cast<std::size_t>(fl);
    i1 = i0 + 1 < dim ? i0 + 1 : i0;
    f = pc - fl;
  };
  auto lerp = [](double a, double b, double f) { return a + f * (b - a); };
  Tensor out(img.shape);
  for (std::size_t z = 0; z < d; ++z)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t off = (z * h + y) * w + x;
        const double pz =
            wc == 3 ? static_cast<double>(z) + warp.data[off] : 0.0;
        const double py =
            static_cast<double>(y) + warp.data[(wc - 2) * d * h * w + off];
        const double px =
            static_cast<double>(x) + warp.data[(wc - 1) * d * h * w + off];
        std::size_t z0, z1, y0, y1, x0, x1;
        double fz, fy, fx;
        split(pz, d, z0, z1, fz);
        split(py, h, y0, y1, fy);
        split(px, w, x0, x1, fx);
        for (std::size_t c = 0; c < img.shape[0]; ++c) {
          const double v00 =
              lerp(img.at(c, z0, y0, x0), img.at(c, z0, y0, x1), fx);
          const double v01 =
              lerp(img.at(c, z0, y1, x0), img.at(c, z0, y1, x1), fx);
          const double vz0 = lerp(v00, v01, fy);
          if (d == 1) {
            out.at(c, z, y, x) = vz0;
            continue;
          }
          const double v10 =
              lerp(img.at(c, z1, y0, x0), img.at(c, z1, y0, x1), fx);
          const double v11 =
              lerp(img.at(c, z1, y1, x0), img.at(c, z1, y1, x1), fx);
          const double vz1 = lerp(v10, v11, fy);
          out.at(c, z, y, x) = lerp(vz0, vz1, fz);
        }
      }
  return out;
}

} // namespace

TEST_CASE("1x1 identity kernel plus bias") {
  Philox rng(1);
  const Tensor in = random_tensor({1, 2, 3, 4}, rng);
  Tensor k({1, 1, 1, 1, 1});
  k.data[0] = 1.0;
  Tensor b({1});
  b.data[0] = 0.25;
  RRContext ctx = ieee_ctx();
  const Tensor out = conv(in, k, b, ctx);
  for (std::size_t i = 0; i < in.size(); ++i)
    CHECK(out.data[i] == in.data[i] + 0.25);
}

TEST_CASE("3x3 ones kernel counts neighbours on a ones image") {
  Tensor in({1, 1, 5, 5});
  for (double& v : in.data)
    v = 1.0;
  Tensor k({1, 1, 1, 3, 3});
  for (double& v : k.data)
    v = 1.0;
  Tensor b({1});
  RRContext ctx = ieee_ctx();
  const Tensor out = conv(in, k, b, ctx);
  CHECK(out.at(0, 0, 2, 2) == 9.0); // interior
  CHECK(out.at(0, 0, 0, 2) == 6.0); // edge
  CHECK(out.at(0, 0, 0, 0) == 4.0); // corner
}

TEST_CASE("conv validation") {
  RRContext ctx = ieee_ctx();
  Tensor in({1, 1, 4, 4}), k({1, 1, 1, 2, 2}), b({1});
  CHECK_THROWS_AS(conv(in, k, b, ctx), ValidationError); // even kernel
  Tensor k2({1, 2, 1, 3, 3});
  CHECK_THROWS_AS(conv(in, k2, b, ctx), ValidationError); // cin mismatch
  Tensor k3({2, 1, 1, 3, 3});
  CHECK_THROWS_AS(conv(in, k3, b, ctx), ValidationError); // bias size
}

TEST_CASE("IEEE conv bit-matches the naive oracle") {
  Philox rng(42);
  for (int i = 0; i < 40; ++i) {
    const std::size_t cin = 1 + rng.next_u64() % 3;
    const std::size_t cout = 1 + rng.next_u64() % 3;
    const std::size_t d = 1 + rng.next_u64() % 3;
    const std::size_t h = 1 + rng.next_u64() % 6;
    const std::size_t w = 1 + rng.next_u64() % 6;
    const std::size_t kd = d == 1 ? 1 : 3;
    const Tensor in = random_tensor({cin, d, h, w}, rng);
    const Tensor k = random_tensor({cout, cin, kd, 3, 3}, rng);
    const Tensor b = random_tensor({cout}, rng);
    RRContext ctx = ieee_ctx();
    const Tensor got = conv(in, k, b, ctx);
    const Tensor want = conv_naive(in, k, b);
    REQUIRE(got.data == want.data);
  }
}

TEST_CASE("maxpool selects window maxima and ignores the mode") {
  Philox rng(5);
  const Tensor in = random_tensor({2, 2, 4, 4}, rng);
  RRContext ieee = ieee_ctx();
  RRContext rr(VirtualPrecision(24), Mode::RandomRounding, 9);
  const Tensor a = maxpool(in, {2, 2, 2}, ieee);
  const Tensor b = maxpool(in, {2, 2, 2}, rr);
  CHECK(a.data == b.data); // selection only, no FP arithmetic
  CHECK(a.shape == std::vector<std::size_t>{2, 1, 2, 2});

  double expect = in.at(0, 0, 0, 0);
  for (std::size_t z = 0; z < 2; ++z)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x)
        expect = std::max(expect, in.at(0, z, y, x));
  CHECK(a.at(0, 0, 0, 0) == expect);

  CHECK_THROWS_AS(maxpool(in, {2, 3, 2}, ieee), ValidationError);
}

TEST_CASE("upsample and concat") {
  Philox rng(6);
  const Tensor in = random_tensor({2, 1, 2, 2}, rng);
  const Tensor up = upsample_nearest(in, {1, 2, 2});
  CHECK(up.shape == std::vector<std::size_t>{2, 1, 4, 4});
  CHECK(up.at(1, 0, 3, 3) == in.at(1, 0, 1, 1));
  CHECK(up.at(0, 0, 0, 1) == in.at(0, 0, 0, 0));

  const Tensor c = concat_channels(in, in);
  CHECK(c.shape == std::vector<std::size_t>{4, 1, 2, 2});
  CHECK(c.at(2, 0, 1, 0) == in.at(0, 0, 1, 0));

  const Tensor other = random_tensor({1, 1, 3, 2}, rng);
  CHECK_THROWS_AS(concat_channels(in, other), ValidationError);
}

TEST_CASE("activations") {
  Tensor in({1, 1, 1, 4});
  in.data = {-2.0, -0.5, 0.0, 3.0};
  RRContext ctx = ieee_ctx();

  const Tensor r = activation(in, ActKind::Relu, ctx);
  CHECK(r.data == std::vector<double>{0.0, 0.0, 0.0, 3.0});

  const Tensor l = activation(in, ActKind::LeakyRelu, ctx);
  CHECK(l.data == std::vector<double>{-0.02, -0.005, 0.0, 3.0});

  const Tensor t = activation(in, ActKind::Tanh, ctx);
  CHECK(t.data[3] == std::tanh(3.0));
}

TEST_CASE("softmax normalizes per voxel") {
  Philox rng(7);
  Tensor in = random_tensor({5, 1, 3, 3}, rng, 4.0);
  RRContext ctx = ieee_ctx();
  const Tensor s = activation(in, ActKind::Softmax, ctx);
  const std::size_t spatial = 9;
  for (std::size_t v = 0; v < spatial; ++v) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      const double p = s.data[c * spatial + v];
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("resample with zero warp returns the image in IEEE mode") {
  Philox rng(8);
  const Tensor img = random_tensor({2, 3, 4, 4}, rng);
  const Tensor warp({3, 3, 4, 4});
  RRContext ctx = ieee_ctx();
  const Tensor out = resample(img, warp, ctx);
  CHECK(out.data == img.data);
}

TEST_CASE("IEEE resample bit-matches the naive oracle") {
  Philox rng(9);
  for (int i = 0; i < 40; ++i) {
    const std::size_t d = 1 + rng.next_u64() % 4;
    const std::size_t h = 2 + rng.next_u64() % 5;
    const std::size_t w = 2 + rng.next_u64() % 5;
    const std::size_t wc = d == 1 ? 2 : 3;
    const Tensor img = random_tensor({1 + rng.next_u64() % 2, d, h, w}, rng);
    const Tensor warp = random_tensor({wc, d, h, w}, rng, 3.0);
    RRContext ctx = ieee_ctx();
    const Tensor got = resample(img, warp, ctx);
    const Tensor want = resample_naive(img, warp);
    REQUIRE(got.data == want.data);
  }
}

TEST_CASE("resample clamps out-of-range positions") {
  Tensor img({1, 1, 1, 3});
  img.data = {5.0, 6.0, 7.0};
  Tensor warp({2, 1, 1, 3});
  warp.data = {0, 0, 0, -10.0, 0.0, 10.0}; // ux pushes off both ends
  RRContext ctx = ieee_ctx();
  const Tensor out = resample(img, warp, ctx);
  CHECK(out.data[0] == 5.0);
  CHECK(out.data[1] == 6.0);
  CHECK(out.data[2] == 7.0);

  Tensor warp3({3, 1, 1, 3});
  CHECK_THROWS_AS(resample(img, warp3, ctx), ValidationError);
}

TEST_CASE("argmax labels with ties to the lowest channel") {
  Tensor logits({6, 1, 1, 2});
  // voxel 0: channels 2 and 5 tie at 3.0 -> label 2
  // voxel 1: channel 4 wins
  for (std::size_t c = 0; c < 6; ++c) {
    logits.at(c, 0, 0, 0) = (c == 2 || c == 5) ? 3.0 : 0.0;
    logits.at(c, 0, 0, 1) = c == 4 ? 1.0 : -1.0;
  }
  const LabelVolume v = argmax_labels(logits);
  CHECK(v.labels == std::vector<std::uint16_t>{2, 4});
  CHECK(v.region_table.at(2) == "region-2");
  v.validate();
}

TEST_CASE("unet weight shapes and generation") {
  UNetSpec spec;
  spec.in_channels = 2;
  spec.out_channels = 3;
  const auto shapes = unet_weight_shapes(spec, true);
  CHECK(shapes.at("enc0.w") ==
        std::vector<std::size_t>{4, 2, 3, 3, 3});
  CHECK(shapes.at("head.w") ==
        std::vector<std::size_t>{3, 4, 1, 1, 1});
  CHECK(shapes.at("dec0.w")[1] == 16 + 16); // upsampled e3 + skip e2

  const WeightStore ws = generate_weights(spec, true, 7);
  for (const auto& [name, shape] : shapes) {
    REQUIRE(ws.tensors.count(name) == 1);
    CHECK(ws.tensors.at(name).shape == shape);
  }
  // biases start at zero
  for (double v : ws.tensors.at("enc0.b").data)
    CHECK(v == 0.0);
  // deterministic in the seed
  const WeightStore again = generate_weights(spec, true, 7);
  CHECK(ws.tensors.at("enc2.w").data == again.tensors.at("enc2.w").data);
  const WeightStore other = generate_weights(spec, true, 8);
  CHECK(ws.tensors.at("enc2.w").data != other.tensors.at("enc2.w").data);
}

TEST_CASE("weight store round trip") {
  UNetSpec spec;
  const WeightStore ws = generate_weights(spec, false, 21);
  const std::string base = "/tmp/rrtk_test_weights";
  save_weights(ws, base);
  const WeightStore back = load_weights(base);
  CHECK(back.volumetric == ws.volumetric);
  REQUIRE(back.tensors.size() == ws.tensors.size());
  for (const auto& [name, t] : ws.tensors) {
    REQUIRE(back.tensors.count(name) == 1);
    CHECK(back.tensors.at(name).shape == t.shape);
    CHECK(back.tensors.at(name).data == t.data);
  }
  std::filesystem::remove(base + ".json");
  std::filesystem::remove(base + ".raw");
}

TEST_CASE("unet forward: determinism and validation") {
  UNetSpec spec;
  spec.in_channels = 1;
  spec.out_channels = 2;
  const WeightStore ws = generate_weights(spec, false, 3);
  Philox rng(11);
  const Tensor in = random_tensor({1, 1, 16, 16}, rng);

  RRContext a = ieee_ctx();
  RRContext b = ieee_ctx();
  const Tensor out1 = unet_forward(spec, ws.tensors, in, a);
  const Tensor out2 = unet_forward(spec, ws.tensors, in, b);
  CHECK(out1.shape == std::vector<std::size_t>{2, 1, 16, 16});
  CHECK(out1.data == out2.data);

  // RR runs with the same seed agree bit for bit; different seeds do not
  RRContext r1(VirtualPrecision(24), Mode::RandomRounding, 5);
  RRContext r2(VirtualPrecision(24), Mode::RandomRounding, 5);
  RRContext r3(VirtualPrecision(24), Mode::RandomRounding, 6);
  const Tensor o1 = unet_forward(spec, ws.tensors, in, r1);
  const Tensor o2 = unet_forward(spec, ws.tensors, in, r2);
  const Tensor o3 = unet_forward(spec, ws.tensors, in, r3);
  CHECK(o1.data == o2.data);
  CHECK(o1.data != o3.data);

  const Tensor bad = random_tensor({1, 1, 24, 24}, rng);
  RRContext c = ieee_ctx();
  CHECK_THROWS_AS(unet_forward(spec, ws.tensors, bad, c),
                  ValidationError); // not divisible by 16

  WeightMap<double> missing = ws.tensors;
  missing.erase("dec1.w");
  RRContext d = ieee_ctx();
  try {
    unet_forward(spec, missing, in, d);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("dec1") != std::string::npos);
  }
}

TEST_CASE("audited instantiation routes every FP operation") {
  UNetSpec spec;
  const WeightStore ws = generate_weights(spec, false, 13);
  Philox rng(14);
  const Tensor in = random_tensor({1, 1, 16, 16}, rng);
  RRContext ctx = ieee_ctx();

  audit::reset();
  const TensorT<Audited> out =
      unet_forward(spec, to_audited(ws.tensors), to_audited(in), ctx);
  CHECK(audit::unrouted == 0);
  CHECK(audit::routed > 0);

  // audited outputs agree with the plain-double path in IEEE mode
  RRContext ctx2 = ieee_ctx();
  const Tensor plain = unet_forward(spec, ws.tensors, in, ctx2);
  CHECK(from_audited(out).data == plain.data);

  // resample and softmax under audit as well
  audit::reset();
  const Tensor warp = random_tensor({2, 1, 16, 16}, rng);
  RRContext ctx3 = ieee_ctx();
  resample(to_audited(in), to_audited(warp), ctx3);
  activation(to_audited(plain), ActKind::Softmax, ctx3);
  CHECK(audit::unrouted == 0);
  CHECK(audit::routed > 0);
}

TEST_CASE("unet spec json round trip") {
  UNetSpec spec;
  spec.in_channels = 2;
  spec.out_channels = 9;
  spec.block_activation = ActKind::LeakyRelu;
  const std::string path = "/tmp/rrtk_test_spec.json";
  unet_spec_to_json_file(spec, path);
  const UNetSpec back = unet_spec_from_json_file(path);
  CHECK(back.in_channels == 2);
  CHECK(back.out_channels == 9);
  CHECK(back.encoder_channels == spec.encoder_channels);
  CHECK(back.decoder_channels == spec.decoder_channels);
  CHECK(back.block_activation == ActKind::LeakyRelu);
  std::filesystem::remove(path);
}
