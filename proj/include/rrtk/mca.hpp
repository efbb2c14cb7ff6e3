#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "rrtk/errors.hpp"
#include "rrtk/philox.hpp"

namespace rrtk {

enum class Mode { IEEE, RandomRounding };

enum class LibmFunc { Exp, Log, Sin, Cos, Tanh, Pow };

// Bits of virtual precision: t=24 emulates 1-ulp noise for single precision,
// t=53 for double precision.
struct VirtualPrecision {
  int t;

  explicit VirtualPrecision(int bits) : t(bits) {
    if (t < 1 || t > 53)
      throw ValidationError("virtual precision must be in [1, 53], got " +
                            std::to_string(t));
  }
};

// inexact(x) = x + 2^(e_x - t) * xi, with e_x the binary exponent of x.
// For subnormals ilogb yields the exponent of the value itself, so the noise
// scales with the leading bit of the subnormal.
inline double inexact(double x, VirtualPrecision prec, double xi) {
  return x + std::ldexp(xi, std::ilogb(x) - prec.t);
}

// Random Rounding scalar context. Every arithmetic operation computes the
// IEEE binary64 result first and then perturbs it with uniform noise at the
// virtual precision. Exact zeros and non-finite values pass through
// unperturbed. Single-owner: concurrent sampling uses one context per sample.
class RRContext {
public:
  RRContext(VirtualPrecision prec, Mode mode, std::uint64_t seed,
            bool only_inexact = false)
      : prec_(prec), mode_(mode), seed_(seed), only_inexact_(only_inexact),
        rng_(seed) {}

  VirtualPrecision precision() const { return prec_; }
  Mode mode() const { return mode_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t op_count() const { return ops_; }

  double perturb(double x) {
    if (mode_ == Mode::IEEE)
      return x;
    if (x == 0.0 || !std::isfinite(x))
      return x;
    return inexact(x, prec_, rng_.next_symmetric());
  }

  double add(double a, double b) {
    ++ops_;
    const double r = a + b;
    const double err = add_residual(a, b, r);
    if (only_inexact_ && err == 0.0)
      return r;
    return rr_round(r, err);
  }

  double sub(double a, double b) { return add(a, -b); }

  double mul(double a, double b) {
    ++ops_;
    const double r = a * b;
    const double err = std::isfinite(r) ? std::fma(a, b, -r) : 0.0;
    if (only_inexact_ && std::isfinite(r) && err == 0.0)
      return r;
    return rr_round(r, err);
  }

  double div(double a, double b) {
    ++ops_;
    const double r = a / b;
    const double rem = std::isfinite(r) ? std::fma(r, b, -a) : 0.0;
    if (only_inexact_ && std::isfinite(r) && rem == 0.0)
      return r;
    return rr_round(r, -rem / b);
  }

  // Fused multiply-add counts as one operation and one perturbation, and is
  // perturbed even under only-inexact (the fused result hides two roundings).
  double fma(double a, double b, double c) {
    ++ops_;
    const double r = std::fma(a, b, c);
    double err = 0.0;
    if (std::isfinite(r)) {
      const double p = a * b;
      const double pe = std::isfinite(p) ? std::fma(a, b, -p) : 0.0;
      const double s = p + c;
      err = (s - r) + (add_residual(p, c, s) + pe);
    }
    return rr_round(r, err);
  }

  double sqrt(double x) {
    ++ops_;
    const double r = std::sqrt(x);
    const double rem = std::isfinite(r) ? std::fma(r, r, -x) : 0.0;
    if (only_inexact_ && std::isfinite(r) && rem == 0.0)
      return r;
    return rr_round(r, r != 0.0 ? -rem / (2.0 * r) : 0.0);
  }

  // Elementary function calls get exactly one perturbation of the final
  // result, never of internal polynomial steps. The residual against a
  // long-double evaluation recovers the pre-rounding value.
  double exp(double x) { ++ops_; return rr_libm(std::exp(x), expl(x)); }
  double log(double x) { ++ops_; return rr_libm(std::log(x), logl(x)); }
  double sin(double x) { ++ops_; return rr_libm(std::sin(x), sinl(x)); }
  double cos(double x) { ++ops_; return rr_libm(std::cos(x), cosl(x)); }
  double tanh(double x) { ++ops_; return rr_libm(std::tanh(x), tanhl(x)); }
  double pow(double x, double y) {
    ++ops_;
    return rr_libm(std::pow(x, y), powl(x, y));
  }

  double libm(LibmFunc f, double x, double y = 0.0) {
    switch (f) {
    case LibmFunc::Exp: return exp(x);
    case LibmFunc::Log: return log(x);
    case LibmFunc::Sin: return sin(x);
    case LibmFunc::Cos: return cos(x);
    case LibmFunc::Tanh: return tanh(x);
    case LibmFunc::Pow: return pow(x, y);
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

private:
  // Knuth TwoSum: s + residual is exactly a + b.
  static double add_residual(double a, double b, double s) {
    if (!std::isfinite(s))
      return 0.0;
    const double bp = s - a;
    return (a - (s - bp)) + (b - bp);
  }

  // Applies round(inexact(exact)) where exact = r + err, r being the IEEE
  // binary64 result and err the rounding residual recovered by an
  // error-free transform. At t = 53 the noise is sub-ulp and only flips the
  // final rounding; at lower t it dominates err entirely.
  double rr_round(double r, double err) {
    if (mode_ == Mode::IEEE)
      return r;
    if (!std::isfinite(r) || (r == 0.0 && err == 0.0))
      return r;
    const double ref = r != 0.0 ? r : err;
    const double delta =
        std::ldexp(rng_.next_symmetric(), std::ilogb(ref) - prec_.t);
    return r + (err + delta);
  }

  double rr_libm(double r, long double extended) {
    if (mode_ == Mode::IEEE)
      return r;
    const double err =
        std::isfinite(r) ? static_cast<double>(extended - r) : 0.0;
    return rr_round(r, err);
  }

  VirtualPrecision prec_;
  Mode mode_;
  std::uint64_t seed_;
  bool only_inexact_;
  Philox rng_;
  std::uint64_t ops_ = 0;
};

} // namespace rrtk
