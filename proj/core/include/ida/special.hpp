#pragma once

// Log-space special functions used by the density kernels. Incomplete gamma
// and beta functions and their inverses come from Boost.Math; what lives here
// are the pieces that need extra care to stay accurate for large shapes.

namespace ida::special {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

/// Stirling remainder: lgamma(z) - [(z - 1/2) log z - z + log sqrt(2 pi)], z > 0.
double stirlerr(double z);

/// log B(a, b) for a, b > 0, accurate when one or both arguments are large.
double lbeta(double a, double b);

/// log(1 + e^z) without overflow.
double log1pexp(double z);

/// e^u - 1 - u, accurate near u = 0.
double expm1mx(double u);

/// Standard normal cdf and its complement.
double normal_cdf(double z);
double normal_sf(double z);

/// Standard normal quantile, 0 < p < 1.
double normal_quantile(double p);

}  // namespace ida::special
