#include "isogplvm/special.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace isogplvm::special {

namespace {

constexpr int kMaxIter = 100000;
constexpr double kEps = 1e-17;
constexpr double kTiny = 1e-300;

void check_domain(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a))
    throw std::domain_error("incomplete gamma requires a > 0, got " + std::to_string(a));
  if (!(x >= 0.0)) throw std::domain_error("incomplete gamma requires x >= 0, got " + std::to_string(x));
}

// log of x^a e^-x / Gamma(a)
double log_prefactor(double a, double x) { return a * std::log(x) - x - log_gamma(a); }

// P(a, x) by the power series; accurate for x < a + 1.
double lower_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(log_prefactor(a, x));
}

// log Q(a, x) by the Lentz continued fraction.
double log_upper_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps * 4) break;
  }
  return log_prefactor(a, x) + std::log(h);
}

}  // namespace

double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma implemented for x > 0 only");
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Asymptotic expansion in Bernoulli numbers.
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * 691.0 / 32760)))));
  return result + std::log(x) - 0.5 * inv - series;
}

double reg_lower_gamma(double a, double x) {
  check_domain(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return lower_series(a, x);
  return -std::expm1(log_upper_fraction(a, x));
}

double reg_upper_gamma(double a, double x) {
  check_domain(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - lower_series(a, x);
  return std::exp(log_upper_fraction(a, x));
}

double log_reg_upper_gamma(double a, double x) {
  check_domain(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return -std::numeric_limits<double>::infinity();
  if (x < a + 1.0) {
    const double p = lower_series(a, x);
    if (p < 0.5) return std::log1p(-p);
  }
  return log_upper_fraction(a, x);
}

double reg_lower_gamma_dx(double a, double x) {
  check_domain(a, x);
  if (x == 0.0) {
    if (a == 1.0) return 1.0;
    return a < 1.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return std::exp((a - 1.0) * std::log(x) - x - log_gamma(a));
}

double reg_lower_gamma_da(double a, double x) {
  check_domain(a, x);
  const double h = gamma_da_step(a);
  const double lo = a - h > 0.0 ? a - h : a;
  return (reg_lower_gamma(a + h, x) - reg_lower_gamma(lo, x)) / (a + h - lo);
}

double log_reg_upper_gamma_da(double a, double x) {
  check_domain(a, x);
  const double h = gamma_da_step(a);
  const double lo = a - h > 0.0 ? a - h : a;
  return (log_reg_upper_gamma(a + h, x) - log_reg_upper_gamma(lo, x)) / (a + h - lo);
}

double log_reg_upper_gamma_dx(double a, double x) {
  check_domain(a, x);
  if (x == 0.0) return -reg_lower_gamma_dx(a, x);
  return -std::exp((a - 1.0) * std::log(x) - x - log_gamma(a) - log_reg_upper_gamma(a, x));
}

}  // namespace isogplvm::special
