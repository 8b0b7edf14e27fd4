#pragma once

namespace isogplvm::special {

double log_gamma(double x);
double digamma(double x);

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
// Series for x < a + 1, continued fraction otherwise. std::domain_error for
// a <= 0 or x < 0.
double reg_lower_gamma(double a, double x);
// Q(a, x) = 1 - P(a, x), computed without cancellation.
double reg_upper_gamma(double a, double x);
// log Q(a, x); finite whenever Q is representable in log space.
double log_reg_upper_gamma(double a, double x);

// dP/dx = x^(a-1) e^(-x) / Gamma(a).
double reg_lower_gamma_dx(double a, double x);
// dP/da by central difference with step 1e-5 * max(1, a).
double reg_lower_gamma_da(double a, double x);
// d log Q / da by the same central difference applied to log Q.
double log_reg_upper_gamma_da(double a, double x);
// d log Q / dx.
double log_reg_upper_gamma_dx(double a, double x);

inline double gamma_da_step(double a) { return 1e-5 * (a > 1.0 ? a : 1.0); }

}  // namespace isogplvm::special
