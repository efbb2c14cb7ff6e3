#pragma once

#include <cstdint>

#include "rrtk/mca.hpp"

namespace rrtk {

// Audit counters for the scalar-routing contract: engine kernels must send
// every FP operation through the context. Kernels are templated on the
// scalar type; instantiating them with Audited makes any raw arithmetic on
// tensor values bump `unrouted`, while context-routed operations bump
// `routed`. A clean kernel leaves unrouted at zero.
namespace audit {
inline thread_local std::uint64_t routed = 0;
inline thread_local std::uint64_t unrouted = 0;

inline void reset() {
  routed = 0;
  unrouted = 0;
}
} // namespace audit

struct Audited {
  double v;
};

inline Audited operator+(Audited a, Audited b) {
  ++audit::unrouted;
  return {a.v + b.v};
}
inline Audited operator-(Audited a, Audited b) {
  ++audit::unrouted;
  return {a.v - b.v};
}
inline Audited operator*(Audited a, Audited b) {
  ++audit::unrouted;
  return {a.v * b.v};
}
inline Audited operator/(Audited a, Audited b) {
  ++audit::unrouted;
  return {a.v / b.v};
}
inline Audited operator-(Audited a) {
  ++audit::unrouted;
  return {-a.v};
}
// Comparisons and selections are not FP arithmetic; they stay uncounted.
inline bool operator<(Audited a, Audited b) { return a.v < b.v; }
inline bool operator==(Audited a, Audited b) { return a.v == b.v; }

template <class S> struct Ops;

template <> struct Ops<double> {
  static double from(double c) { return c; }
  static double raw(double s) { return s; }
  static double add(RRContext& c, double a, double b) { return c.add(a, b); }
  static double sub(RRContext& c, double a, double b) { return c.sub(a, b); }
  static double mul(RRContext& c, double a, double b) { return c.mul(a, b); }
  static double div(RRContext& c, double a, double b) { return c.div(a, b); }
  static double exp(RRContext& c, double x) { return c.exp(x); }
  static double tanh(RRContext& c, double x) { return c.tanh(x); }
  static bool less(double a, double b) { return a < b; }
};

template <> struct Ops<Audited> {
  static Audited from(double c) { return {c}; }
  static double raw(Audited s) { return s.v; }
  static Audited add(RRContext& c, Audited a, Audited b) {
    ++audit::routed;
    return {c.add(a.v, b.v)};
  }
  static Audited sub(RRContext& c, Audited a, Audited b) {
    ++audit::routed;
    return {c.sub(a.v, b.v)};
  }
  static Audited mul(RRContext& c, Audited a, Audited b) {
    ++audit::routed;
    return {c.mul(a.v, b.v)};
  }
  static Audited div(RRContext& c, Audited a, Audited b) {
    ++audit::routed;
    return {c.div(a.v, b.v)};
  }
  static Audited exp(RRContext& c, Audited x) {
    ++audit::routed;
    return {c.exp(x.v)};
  }
  static Audited tanh(RRContext& c, Audited x) {
    ++audit::routed;
    return {c.tanh(x.v)};
  }
  static bool less(Audited a, Audited b) { return a.v < b.v; }
};

} // namespace rrtk
