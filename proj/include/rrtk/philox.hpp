#pragma once

#include <array>
#include <cstdint>

namespace rrtk {

// Philox-4x32-10 counter-based generator (Salmon et al., SC'11).
// The key is derived from a 64-bit seed and the 128-bit counter advances by
// one block per draw, so the i-th output of a given seed is the same no
// matter how many generators run concurrently.
class Philox {
public:
  explicit Philox(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)} {}

  std::uint64_t next_u64() {
    if (have_ == 0) {
      block_ = generate(counter_, key_);
      advance();
      have_ = 2;
    }
    --have_;
    return (static_cast<std::uint64_t>(block_[2 * have_ + 1]) << 32) |
           block_[2 * have_];
  }

  // Uniform draw on the open interval (-1/2, 1/2) with 53-bit resolution.
  // (r + 1/2) / 2^53 lies in (0, 1), so endpoints are never produced.
  double next_symmetric() {
    const std::uint64_t r = next_u64() >> 11;
    return (static_cast<double>(r) + 0.5) * 0x1p-53 - 0.5;
  }

  // Uniform draw on [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1p-53;
  }

private:
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;
  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;

  static void mul_hilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo,
                       std::uint32_t& hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
  }

  static std::array<std::uint32_t, 4> generate(std::array<std::uint32_t, 4> c,
                                               std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
      std::uint32_t lo0, hi0, lo1, hi1;
      mul_hilo(kMulA, c[0], lo0, hi0);
      mul_hilo(kMulB, c[2], lo1, hi1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      k[0] += kWeylA;
      k[1] += kWeylB;
    }
    return c;
  }

  void advance() {
    if (++counter_[0] == 0)
      if (++counter_[1] == 0)
        if (++counter_[2] == 0)
          ++counter_[3];
  }

  std::array<std::uint32_t, 4> counter_{0, 0, 0, 0};
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> block_{};
  int have_ = 0;
};

// Cheap stateless mixer, used to derive per-sample seeds from (seed0, i).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

} // namespace rrtk
