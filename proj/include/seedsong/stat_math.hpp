// Self-contained p-value math: regularized incomplete beta (Student's t) and
// regularized incomplete gamma (chi-square), continued-fraction / series
// evaluations in the usual Lentz form.
#ifndef SEEDSONG_STAT_MATH_HPP
#define SEEDSONG_STAT_MATH_HPP

#include <cmath>
#include <limits>
#include <stdexcept>

namespace seedsong {

namespace stat_detail {

inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace stat_detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw std::domain_error("incomplete_beta: bad x");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * stat_detail::betacf(a, b, x) / a;
  }
  return 1.0 - front * stat_detail::betacf(b, a, 1.0 - x) / b;
}

// Regularized lower incomplete gamma P(a, x).
inline double incomplete_gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::domain_error("incomplete_gamma: bad args");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) {  // series
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  // continued fraction for Q(a, x)
  constexpr double kFpMin = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kFpMin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = b + an / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  return 1.0 - q;
}

// Two-sided p-value of Student's t with df degrees of freedom.
inline double t_two_sided_p(double t, int df) {
  if (df < 1) throw std::domain_error("t test needs df >= 1");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return incomplete_beta(df / 2.0, 0.5, x);
}

// Upper tail of the chi-square distribution with k degrees of freedom.
inline double chi2_sf(double x, int k) {
  if (k < 1) throw std::domain_error("chi2 needs k >= 1");
  if (x <= 0.0) return 1.0;
  return 1.0 - incomplete_gamma_p(k / 2.0, x / 2.0);
}

}  // namespace seedsong

#endif  // SEEDSONG_STAT_MATH_HPP
