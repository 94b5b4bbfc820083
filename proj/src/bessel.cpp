#include "tbm/bessel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tbm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log I_nu by the ascending series; fine whenever x is small enough that the
// leading terms dominate (we call it for x <= 30, any order).
double log_i_series(int nu, double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int m = 1; m < 400; ++m) {
    term *= q / (static_cast<double>(m) * (static_cast<double>(nu) + m));
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return nu * std::log(0.5 * x) - std::lgamma(static_cast<double>(nu) + 1.0) + std::log(sum);
}

// Hankel expansion log I_nu(x) for x large relative to nu^2.
double log_i_hankel(int nu, double x) {
  const double mu = 4.0 * static_cast<double>(nu) * static_cast<double>(nu);
  double term = 1.0;
  double sum = 1.0;
  double prev = kInf;
  for (int k = 1; k < 40; ++k) {
    const double f = (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * x);
    term *= -f;
    if (std::abs(term) > prev) break;  // divergent tail reached
    prev = std::abs(term);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return x - 0.5 * std::log(2.0 * M_PI * x) + std::log(sum);
}

// Olver uniform asymptotic expansion for large order: I_nu(nu z).
double log_i_olver(int nu, double x) {
  const double v = static_cast<double>(nu);
  const double z = x / v;
  const double s = std::sqrt(1.0 + z * z);
  const double eta = s + std::log(z / (1.0 + s));
  const double t = 1.0 / s;
  const double t2 = t * t;
  // u_k(t), Abramowitz & Stegun 9.3.9
  const double u1 = t * (3.0 - 5.0 * t2) / 24.0;
  const double u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0;
  const double u3 =
      t * t2 * (30375.0 - 369603.0 * t2 + 765765.0 * t2 * t2 - 425425.0 * t2 * t2 * t2) / 414720.0;
  const double t4 = t2 * t2;
  const double u4 = t4 *
                    (4465125.0 - 94121676.0 * t2 + 349922430.0 * t4 - 446185740.0 * t4 * t2 +
                     185910725.0 * t4 * t4) /
                    39813120.0;
  const double corr = 1.0 + u1 / v + u2 / (v * v) + u3 / (v * v * v) + u4 / (v * v * v * v);
  return v * eta - 0.5 * std::log(2.0 * M_PI * v) - 0.25 * std::log(1.0 + z * z) + std::log(corr);
}

// Downward three-term recurrence normalized against log I_0; robust in the
// window where neither the series nor the asymptotics apply.
double log_i_recurrence(int nu, double x) {
  const int start = static_cast<int>(std::ceil(std::max(static_cast<double>(nu), x))) + 60;
  double bp = 0.0;   // b_{m+1}
  double b = 1e-300; // b_m (arbitrary scale)
  double log_scale = 0.0;
  double log_bn = -kInf;
  for (int m = start; m >= 1; --m) {
    const double bm = bp + (2.0 * m / x) * b;
    bp = b;
    b = bm;
    if (m - 1 == nu) log_bn = std::log(b) + log_scale;
    if (b > 1e250) {
      b *= 1e-250;
      bp *= 1e-250;
      log_scale += 250.0 * std::log(10.0);
    }
  }
  const double log_b0 = std::log(b) + log_scale;
  return log_bessel_i(0, x) + (log_bn - log_b0);
}

}  // namespace

double log_bessel_i(int n, double x) {
  if (n < 0) throw std::invalid_argument("log_bessel_i: negative order");
  if (x < 0.0) throw std::invalid_argument("log_bessel_i: negative argument");
  if (x == 0.0) return n == 0 ? 0.0 : -kInf;
  if (x <= 30.0) return log_i_series(n, x);
  if (n <= 1) return log_i_hankel(n, x);
  if (n >= 120) return log_i_olver(n, x);
  // 2 <= n < 120, x > 30: Hankel once it converges fast, else recurrence.
  if (x >= 2.0 * static_cast<double>(n) * static_cast<double>(n)) return log_i_hankel(n, x);
  return log_i_recurrence(n, x);
}

}  // namespace tbm
