#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rrtk/errors.hpp"
#include "rrtk/philox.hpp"
#include "rrtk/stats.hpp"

using namespace rrtk;

namespace {

// Composite-Simpson oracle for I_x(a, b). Needs a, b >= 2 so the integrand
// has bounded derivatives on [0, x] and the rule converges.
double ibeta_simpson(double a, double b, double x) {
  const int n = 20000; // even
  const double h = x / n;
  auto f = [&](double t) {
    return std::pow(t, a - 1.0) * std::pow(1.0 - t, b - 1.0);
  };
  double s = f(x); // f(0) = 0 for a >= 2
  for (int i = 1; i < n; ++i)
    s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  const double integral = s * h / 3.0;
  const double lbeta =
      std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return integral / std::exp(lbeta);
}

// For integer a, b: I_x(a, b) is the binomial tail
// sum_{j=a}^{a+b-1} C(a+b-1, j) x^j (1-x)^(a+b-1-j).
double ibeta_binomial(int a, int b, double x) {
  const int n = a + b - 1;
  double s = 0.0;
  for (int j = a; j <= n; ++j) {
    const double lc = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) -
                      std::lgamma(n - j + 1.0);
    s += std::exp(lc + j * std::log(x) + (n - j) * std::log1p(-x));
  }
  return s;
}

} // namespace

TEST_CASE("ibeta boundary values and symmetry") {
  CHECK(ibeta_reg(2.0, 3.0, 0.0) == 0.0);
  CHECK(ibeta_reg(2.0, 3.0, 1.0) == 1.0);
  Philox rng(77);
  for (int i = 0; i < 200; ++i) {
    const double a = 0.5 + rng.next_unit() * 6.0;
    const double b = 0.5 + rng.next_unit() * 6.0;
    const double x = rng.next_unit();
    const double lhs = ibeta_reg(a, b, x);
    CHECK(lhs >= 0.0);
    CHECK(lhs <= 1.0);
    CHECK(lhs + ibeta_reg(b, a, 1.0 - x) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("ibeta against Simpson integration oracle") {
  Philox rng(78);
  for (int i = 0; i < 50; ++i) {
    const double a = 2.0 + rng.next_unit() * 5.0;
    const double b = 2.0 + rng.next_unit() * 5.0;
    const double x = 0.05 + rng.next_unit() * 0.9;
    CHECK(std::abs(ibeta_reg(a, b, x) - ibeta_simpson(a, b, x)) < 1e-9);
  }
}

TEST_CASE("ibeta against the binomial tail for integer parameters") {
  Philox rng(79);
  for (int i = 0; i < 100; ++i) {
    const int a = 1 + static_cast<int>(rng.next_u64() % 8);
    const int b = 1 + static_cast<int>(rng.next_u64() % 8);
    const double x = 0.02 + rng.next_unit() * 0.96;
    CHECK(ibeta_reg(a, b, x) ==
          doctest::Approx(ibeta_binomial(a, b, x)).epsilon(1e-11));
  }
}

TEST_CASE("ibeta closed forms") {
  // I_x(1, 1) = x; I_x(2, 1) = x^2; I_x(1, b) = 1 - (1-x)^b
  for (double x : {0.1, 0.25, 0.5, 0.9}) {
    CHECK(ibeta_reg(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-12));
    CHECK(ibeta_reg(2.0, 1.0, x) == doctest::Approx(x * x).epsilon(1e-12));
    CHECK(ibeta_reg(1.0, 3.0, x) ==
          doctest::Approx(1.0 - std::pow(1.0 - x, 3.0)).epsilon(1e-12));
  }
}

TEST_CASE("student t two-tailed basics") {
  CHECK(student_t_two_tailed(0.0, 4) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(student_t_two_tailed(3.0, 10) ==
        doctest::Approx(student_t_two_tailed(-3.0, 10)).epsilon(1e-12));
  CHECK(student_t_two_tailed(50.0, 5) < 1e-6);
  // nu = 1 is the Cauchy distribution: p = 2 * (1 - (1/2 + atan(t)/pi))
  for (double t : {0.5, 1.0, 2.0, 7.0})
    CHECK(student_t_two_tailed(t, 1) ==
          doctest::Approx(1.0 - 2.0 * std::atan(t) / M_PI).epsilon(1e-10));
  CHECK_THROWS_AS(student_t_two_tailed(1.0, 0), ValidationError);
}

TEST_CASE("paired t-test worked example") {
  // d = {1..5}: mean 3, sample sd sqrt(2.5), t = 3*sqrt(2) = 4.2426...
  // For nu = 4, p = I_{4/22}(2, 1/2) which evaluates in closed form to
  // 1 - (3/2)sqrt(9/11) + (1/2)(9/11)^(3/2) = 0.013235508654...
  const TTestResult r =
      paired_t_test({{1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}});
  CHECK(r.dof == 4);
  CHECK(r.t == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-12));
  const double u = 9.0 / 11.0;
  const double oracle = 1.0 - 1.5 * std::sqrt(u) + 0.5 * u * std::sqrt(u);
  CHECK(r.p_value == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.0132).epsilon(0.08)); // headline value
}

TEST_CASE("paired t-test sign and pairing") {
  const TTestResult r1 = paired_t_test({{1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}});
  const TTestResult r2 = paired_t_test({{0, 0, 0, 0, 0}, {1, 2, 3, 4, 5}});
  CHECK(r1.t == doctest::Approx(-r2.t));
  CHECK(r1.p_value == doctest::Approx(r2.p_value));
}

TEST_CASE("paired t-test degenerate and invalid input") {
  CHECK_THROWS_WITH_AS(paired_t_test({{1, 1, 1}, {0, 0, 0}}), "degenerate",
                       ValidationError);
  CHECK_THROWS_WITH_AS(paired_t_test({{2, 3, 4}, {1, 2, 3}}), "degenerate",
                       ValidationError);
  CHECK_THROWS_AS(paired_t_test({{1, 2}, {1}}), ValidationError);
  CHECK_THROWS_AS(paired_t_test({{1}, {1}}), ValidationError);
  const double nan = std::nan("");
  CHECK_THROWS_AS(paired_t_test({{1, nan}, {0, 0}}), ValidationError);
}

TEST_CASE("bonferroni clamps at one") {
  const std::vector<double> p{0.001, 0.02, 0.5};
  const auto c = bonferroni(p, 35);
  CHECK(c[0] == doctest::Approx(0.035));
  CHECK(c[1] == doctest::Approx(0.7));
  CHECK(c[2] == 1.0);
  CHECK(bonferroni(p, 1) == p);
  CHECK_THROWS_AS(bonferroni(p, 0), ValidationError);
}
