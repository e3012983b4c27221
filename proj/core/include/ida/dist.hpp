#pragma once

#include "ida/rng.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace ida::dist {

/// The four nested inter-arrival families, in nesting order.
enum class Family { Exp = 0, Gamma = 1, GenGam = 2, GenF = 3 };

std::string_view family_name(Family f) noexcept;
std::optional<Family> parse_family(std::string_view name) noexcept;

struct ExpParams {
  double rate;
};

struct GammaParams {
  double shape;
  double rate;
};

/// Generalized gamma, Prentice parametrization (location, scale, shape).
struct GenGammaParams {
  double mu;
  double sigma;
  double q;
};

/// Generalized F, Prentice parametrization. P = 0 reduces to GenGammaParams.
struct GenFParams {
  double mu;
  double sigma;
  double q;
  double p;
};

using DistParams = std::variant<ExpParams, GammaParams, GenGammaParams, GenFParams>;

Family family_of(const DistParams& params) noexcept;
std::string describe(const DistParams& params);

/// Shape constants of the generalized F family that depend only on (Q, P).
struct GenFDerived {
  double delta;  // sqrt(Q^2 + 2P)
  double s1;
  double s2;

  /// Requires P > 0. Both denominators are evaluated in a cancellation-free form.
  static GenFDerived from(double q, double p);
};

/// |Q| below this threshold is treated as the lognormal limit of the
/// generalized gamma family.
inline constexpr double kLognormalQThreshold = 1e-5;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a truncation point leaves no probability mass to sample from.
class TailExhaustedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedNestingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

bool is_valid(const DistParams& params) noexcept;
/// Throws ParameterError if `params` violates its family's constraints.
void validate(const DistParams& params);

double log_pdf(const DistParams& params, double x);
double pdf(const DistParams& params, double x);
double cdf(const DistParams& params, double x);
/// 1 - cdf, computed without cancellation in the upper tail.
double survival(const DistParams& params, double x);

/// Inverse cdf for 0 < u < 1.
double quantile(const DistParams& params, double u);
/// Inverse survival function: returns x with survival(x) = s, 0 < s < 1.
double quantile_upper(const DistParams& params, double s);

double sample(const DistParams& params, RngStream& rng);

/// Draws X conditional on X > y, i.e. from density f(x) / (1 - F(y)) on (y, inf).
/// Throws TailExhaustedError when 1 - F(y) < 1e-12.
double sample_truncated(const DistParams& params, double y, RngStream& rng);

/// Re-expresses `params` in the richer `target` family (the identity when
/// target equals the current family). Downcasts throw UnsupportedNestingError.
DistParams nest(const DistParams& params, Family target);

namespace kernel {

// Hot-path log densities with family constants hoisted out. The fit module
// calls these once per observation; log_pdf() above routes through them too.

inline double exp_log_pdf(double rate, double x) { return std::log(rate) - rate * x; }

/// `lgamma_shape` = lgamma(shape).
double gamma_log_pdf(double shape, double rate, double lgamma_shape, double x, double log_x);

/// Generalized gamma; `stirlerr_q2` = stirlerr(Q^-2) (ignored in the lognormal limit).
double gengamma_log_pdf(double mu, double sigma, double q, double stirlerr_q2, double log_x);

/// Generalized F with P > 0; `lbeta_s` = log B(s1, s2).
double genf_log_pdf(double mu, double sigma, const GenFDerived& d, double lbeta_s, double log_x);

}  // namespace kernel

}  // namespace ida::dist
