// Cramer-von Mises one-sample test.
//
// The asymptotic law of W^2 is that of sum_k Z_k^2 / (k pi)^2. Two series
// for it are combined:
//   lower tail  P(W^2 <= w) via the Anderson-Darling Bessel-K expansion,
//               which converges in a handful of terms for small w;
//   upper tail  P(W^2 > w) via Smirnov's alternating integral series,
//               which avoids cancellation when the p-value is tiny.

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "math_policy.hpp"
#include "survbench/distributions.hpp"
#include "survbench/error.hpp"

namespace survbench {

using detail::kPi;
using detail::MathPolicy;

namespace {

constexpr double kSeriesCrossover = 0.3;

double cvm_lower_cdf(double w) {
  if (w <= 0.0) return 0.0;
  double sum = 0.0;
  double coef = 1.0;  // binom(2j, j) / 4^j
  for (int j = 0; j < 200; ++j) {
    const double m = 4.0 * j + 1.0;
    const double z = m * m / (16.0 * w);
    if (z > 700.0) break;
    const double term =
        coef * std::sqrt(m) * std::exp(-z) * boost::math::cyl_bessel_k(0.25, z, MathPolicy());
    sum += term;
    if (term < 1e-17 * sum) break;
    coef *= (2.0 * j + 1.0) / (2.0 * j + 2.0);
  }
  return std::clamp(sum / (kPi * std::sqrt(w)), 0.0, 1.0);
}

double cvm_upper_sf(double w) {
  double sum = 0.0;
  for (int k = 1; k < 400; ++k) {
    const double a = (2.0 * k - 1.0) * kPi;
    const double b = 2.0 * k * kPi;
    if (0.5 * w * a * a > 745.0) break;
    // u = a + (b - a)(1 - cos t)/2 removes the inverse-square-root endpoint
    // singularities of 1/sqrt(-sin u).
    auto integrand = [&](double t) {
      const double u = a + 0.5 * (b - a) * (1.0 - std::cos(t));
      const double du = 0.5 * (b - a) * std::sin(t);
      const double s = -std::sin(u);
      if (!(s > 0.0) || du == 0.0) return 0.0;
      return std::sqrt(u / s) * std::exp(-0.5 * w * u * u) / u * du;
    };
    const double piece =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, kPi, 0, 0);
    const double term = (k % 2 == 1 ? 1.0 : -1.0) * piece;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return std::clamp(2.0 / kPi * sum, 0.0, 1.0);
}

}  // namespace

double cvm_asymptotic_sf(double w) {
  if (!(w > 0.0)) return 1.0;
  if (w < kSeriesCrossover) return 1.0 - cvm_lower_cdf(w);
  return cvm_upper_sf(w);
}

CvmResult cvm_test(std::span<const double> sample, const Distribution& dist) {
  if (sample.empty()) throw Error(Errc::invalid_argument, "cvm_test: empty sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double w = 1.0 / (12.0 * n);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double diff = (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n) - dist.cdf(sorted[i]);
    w += diff * diff;
  }
  return {w, cvm_asymptotic_sf(w)};
}

}  // namespace survbench
