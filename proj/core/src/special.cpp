#include "ida/special.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>

namespace ida::special {

double stirlerr(double z) {
  if (z < 15.0) {
    return boost::math::lgamma(z) - ((z - 0.5) * std::log(z) - z + kHalfLog2Pi);
  }
  const double r = 1.0 / z;
  const double r2 = r * r;
  // Asymptotic series; the first omitted term is below 1e-14 at z = 15.
  return r * (1.0 / 12.0 -
              r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))));
}

double lbeta(double a, double b) {
  const double p = std::min(a, b);
  const double q = std::max(a, b);
  if (p >= 10.0) {
    const double corr = stirlerr(p) + stirlerr(q) - stirlerr(p + q);
    return -0.5 * std::log(q) + kHalfLog2Pi + corr + (p - 0.5) * std::log(p / (p + q)) +
           q * std::log1p(-p / (p + q));
  }
  if (q >= 10.0) {
    const double corr = stirlerr(q) - stirlerr(p + q);
    return boost::math::lgamma(p) + corr + p - p * std::log(p + q) +
           (q - 0.5) * std::log1p(-p / (p + q));
  }
  return boost::math::lgamma(p) + boost::math::lgamma(q) - boost::math::lgamma(p + q);
}

double log1pexp(double z) {
  if (z > 35.0) return z + std::exp(-z);
  if (z > -37.0) return std::log1p(std::exp(z));
  return std::exp(z);
}

double expm1mx(double u) {
  if (std::abs(u) < 0.05) {
    // Taylor series through u^8.
    double term = u * u / 2.0;
    double sum = term;
    for (int k = 3; k <= 9; ++k) {
      term *= u / k;
      sum += term;
    }
    return sum;
  }
  return std::expm1(u) - u;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

}  // namespace ida::special
