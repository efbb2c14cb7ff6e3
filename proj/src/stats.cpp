#include "rrtk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rrtk/errors.hpp"

namespace rrtk {

namespace {

constexpr double kIbetaTol = 1e-12;

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny)
    d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny)
      d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny)
      c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny)
      d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny)
      c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kIbetaTol)
      break;
  }
  return h;
}

} // namespace

double ibeta_reg(double a, double b, double x) {
  if (x <= 0.0)
    return 0.0;
  if (x >= 1.0)
    return 1.0;
  const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double front =
      std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta);
  // Use the fast-converging side of the symmetry relation.
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_tailed(double t, int nu) {
  if (nu < 1)
    throw ValidationError("t distribution needs dof >= 1");
  const double n = static_cast<double>(nu);
  return ibeta_reg(n / 2.0, 0.5, n / (n + t * t));
}

TTestResult paired_t_test(const PairedSamples& p) {
  if (p.a.size() != p.b.size())
    throw ValidationError("paired t-test: unequal lengths");
  const std::size_t n = p.a.size();
  if (n < 2)
    throw ValidationError("paired t-test: need n >= 2");

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = p.a[i] - p.b[i];
    if (std::isnan(d))
      throw ValidationError("paired t-test: NaN difference");
    mean += d;
  }
  mean /= static_cast<double>(n);

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (p.a[i] - p.b[i]) - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(n - 1);
  if (var == 0.0)
    throw ValidationError("degenerate");

  const double t =
      mean / std::sqrt(var / static_cast<double>(n));
  const int dof = static_cast<int>(n) - 1;
  return {t, student_t_two_tailed(t, dof), dof};
}

std::vector<double> bonferroni(const std::vector<double>& p_values,
                               int m_tests) {
  if (m_tests < 1)
    throw ValidationError("bonferroni: m_tests must be >= 1");
  std::vector<double> out(p_values.size());
  for (std::size_t i = 0; i < p_values.size(); ++i)
    out[i] = std::min(1.0, p_values[i] * static_cast<double>(m_tests));
  return out;
}

} // namespace rrtk
