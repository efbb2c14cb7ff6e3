#pragma once

#include <vector>

namespace rrtk {

struct PairedSamples {
  std::vector<double> a;
  std::vector<double> b;
};

struct TTestResult {
  double t;
  double p_value; // two-tailed
  int dof;
};

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation,
// documented tolerance 1e-12.
double ibeta_reg(double a, double b, double x);

// Two-tailed p for Student's t with nu degrees of freedom.
double student_t_two_tailed(double t, int nu);

// Two-tailed paired t-test on a - b. Throws ValidationError("degenerate")
// when the differences have zero variance.
TTestResult paired_t_test(const PairedSamples& p);

// min(1, p * m_tests) per entry.
std::vector<double> bonferroni(const std::vector<double>& p_values,
                               int m_tests);

} // namespace rrtk
