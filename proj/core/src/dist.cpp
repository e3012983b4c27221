#include "ida/dist.hpp"

#include "ida/special.hpp"

#include <boost/math/policies/policy.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <sstream>

namespace ida::dist {

namespace {

using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_lognormal(double q) { return std::abs(q) < kLognormalQThreshold; }

void check_x(double x) {
  if (!(x > 0.0) || std::isnan(x)) {
    throw DomainError("inter-arrival value must be positive, got " + std::to_string(x));
  }
}

void check_probability(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError("probability must lie in (0, 1), got " + std::to_string(u));
  }
}

// Generalized gamma argument to the incomplete gamma function: Q^-2 exp(Q w).
double gengamma_gamma_arg(const GenGammaParams& g, double x) {
  const double w = (std::log(x) - g.mu) / g.sigma;
  const double q2 = 1.0 / (g.q * g.q);
  return q2 * std::exp(g.q * w);
}

// Logistic transform of the generalized F variate; returns (u, 1 - u).
std::pair<double, double> genf_beta_arg(const GenFParams& f, const GenFDerived& d, double x) {
  const double w = (std::log(x) - f.mu) * d.delta / f.sigma;
  const double z = w + std::log(d.s1 / d.s2);
  if (z > 0) {
    const double e = std::exp(-z);
    return {1.0 / (1.0 + e), e / (1.0 + e)};
  }
  const double e = std::exp(z);
  return {e / (1.0 + e), 1.0 / (1.0 + e)};
}

double genf_from_beta(const GenFParams& f, const GenFDerived& d, double b, double one_minus_b) {
  const double log_v = std::log(d.s2 / d.s1) + std::log(b) - std::log(one_minus_b);
  return std::exp(f.mu + f.sigma * log_v / d.delta);
}

double gengamma_from_gamma(const GenGammaParams& g, double gamma_value) {
  const double q2 = 1.0 / (g.q * g.q);
  const double w = std::log(gamma_value / q2) / g.q;
  return std::exp(g.mu + g.sigma * w);
}

// log of a Gamma(shape, 1) draw; stays finite for small shapes via
// G(a) = G(a + 1) * U^(1/a).
double log_gamma_variate(double shape, RngStream& rng) {
  if (shape < 1.0) {
    std::gamma_distribution<double> g(shape + 1.0, 1.0);
    return std::log(g(rng.engine())) + std::log(rng.uniform()) / shape;
  }
  std::gamma_distribution<double> g(shape, 1.0);
  for (;;) {
    const double v = g(rng.engine());
    if (v > 0.0) return std::log(v);
  }
}

}  // namespace

std::string_view family_name(Family f) noexcept {
  switch (f) {
    case Family::Exp:
      return "Exp";
    case Family::Gamma:
      return "Gamma";
    case Family::GenGam:
      return "GenGam";
    case Family::GenF:
      return "GenF";
  }
  return "?";
}

std::optional<Family> parse_family(std::string_view name) noexcept {
  for (Family f : {Family::Exp, Family::Gamma, Family::GenGam, Family::GenF}) {
    if (family_name(f) == name) return f;
  }
  return std::nullopt;
}

Family family_of(const DistParams& params) noexcept {
  return static_cast<Family>(params.index());
}

std::string describe(const DistParams& params) {
  std::ostringstream os;
  os.precision(10);
  std::visit(Overloaded{
                 [&](const ExpParams& p) { os << "Exp(" << p.rate << ")"; },
                 [&](const GammaParams& p) { os << "Gamma(" << p.shape << ", " << p.rate << ")"; },
                 [&](const GenGammaParams& p) {
                   os << "GenGam(" << p.mu << ", " << p.sigma << ", " << p.q << ")";
                 },
                 [&](const GenFParams& p) {
                   os << "GenF(" << p.mu << ", " << p.sigma << ", " << p.q << ", " << p.p << ")";
                 },
             },
             params);
  return os.str();
}

GenFDerived GenFDerived::from(double q, double p) {
  const double tmp = q * q + 2.0 * p;
  const double delta = std::sqrt(tmp);
  // tmp +/- q*delta: one of the two cancels; use tmp^2 - q^2 delta^2 = 2 P tmp.
  double plus = tmp + q * delta;
  double minus = tmp - q * delta;
  if (q > 0) {
    minus = 2.0 * p * tmp / plus;
  } else {
    plus = 2.0 * p * tmp / minus;
  }
  return {delta, 2.0 / plus, 2.0 / minus};
}

bool is_valid(const DistParams& params) noexcept {
  return std::visit(
      Overloaded{
          [](const ExpParams& p) { return std::isfinite(p.rate) && p.rate > 0; },
          [](const GammaParams& p) {
            return std::isfinite(p.shape) && std::isfinite(p.rate) && p.shape > 0 && p.rate > 0;
          },
          [](const GenGammaParams& p) {
            return std::isfinite(p.mu) && std::isfinite(p.sigma) && std::isfinite(p.q) &&
                   p.sigma > 0;
          },
          [](const GenFParams& p) {
            return std::isfinite(p.mu) && std::isfinite(p.sigma) && std::isfinite(p.q) &&
                   std::isfinite(p.p) && p.sigma > 0 && p.p >= 0;
          },
      },
      params);
}

void validate(const DistParams& params) {
  if (!is_valid(params)) throw ParameterError("invalid distribution parameters " + describe(params));
}

namespace kernel {

double gamma_log_pdf(double shape, double rate, double lgamma_shape, double x, double log_x) {
  return shape * std::log(rate) - lgamma_shape + (shape - 1.0) * log_x - rate * x;
}

double gengamma_log_pdf(double mu, double sigma, double q, double stirlerr_q2, double log_x) {
  const double w = (log_x - mu) / sigma;
  const double base = -std::log(sigma) - log_x - special::kHalfLog2Pi;
  if (is_lognormal(q)) return base - 0.5 * w * w;
  // Prentice density rewritten through Stirling's series so that the
  // Q^-2 log Q^-2 and lgamma(Q^-2) terms cancel analytically.
  return base - stirlerr_q2 - special::expm1mx(q * w) / (q * q);
}

double genf_log_pdf(double mu, double sigma, const GenFDerived& d, double lbeta_s, double log_x) {
  const double w = (log_x - mu) * d.delta / sigma;
  const double log_ratio = std::log(d.s1 / d.s2);
  return std::log(d.delta) + d.s1 * log_ratio + d.s1 * w - std::log(sigma) - log_x -
         (d.s1 + d.s2) * special::log1pexp(w + log_ratio) - lbeta_s;
}

}  // namespace kernel

double log_pdf(const DistParams& params, double x) {
  check_x(x);
  validate(params);
  if (std::isinf(x)) return -kInf;
  const double log_x = std::log(x);
  return std::visit(
      Overloaded{
          [&](const ExpParams& p) { return kernel::exp_log_pdf(p.rate, x); },
          [&](const GammaParams& p) {
            return kernel::gamma_log_pdf(p.shape, p.rate, boost::math::lgamma(p.shape, Policy()),
                                         x, log_x);
          },
          [&](const GenGammaParams& p) {
            const double st = is_lognormal(p.q) ? 0.0 : special::stirlerr(1.0 / (p.q * p.q));
            return kernel::gengamma_log_pdf(p.mu, p.sigma, p.q, st, log_x);
          },
          [&](const GenFParams& p) {
            if (p.p == 0.0) {
              const double st = is_lognormal(p.q) ? 0.0 : special::stirlerr(1.0 / (p.q * p.q));
              return kernel::gengamma_log_pdf(p.mu, p.sigma, p.q, st, log_x);
            }
            const auto d = GenFDerived::from(p.q, p.p);
            return kernel::genf_log_pdf(p.mu, p.sigma, d, special::lbeta(d.s1, d.s2), log_x);
          },
      },
      params);
}

double pdf(const DistParams& params, double x) { return std::exp(log_pdf(params, x)); }

namespace {

// Returns {cdf, survival} at x > 0 (x may be +inf).
std::pair<double, double> tail_pair(const DistParams& params, double x) {
  check_x(x);
  validate(params);
  if (std::isinf(x)) return {1.0, 0.0};
  return std::visit(
      Overloaded{
          [&](const ExpParams& p) -> std::pair<double, double> {
            return {-std::expm1(-p.rate * x), std::exp(-p.rate * x)};
          },
          [&](const GammaParams& p) -> std::pair<double, double> {
            const double z = p.rate * x;
            if (std::isinf(z)) return {1.0, 0.0};
            return {boost::math::gamma_p(p.shape, z, Policy()),
                    boost::math::gamma_q(p.shape, z, Policy())};
          },
          [&](const GenGammaParams& p) -> std::pair<double, double> {
            if (is_lognormal(p.q)) {
              const double w = (std::log(x) - p.mu) / p.sigma;
              return {special::normal_cdf(w), special::normal_sf(w)};
            }
            const double q2 = 1.0 / (p.q * p.q);
            const double z = gengamma_gamma_arg(p, x);
            double lower = 0.0;
            double upper = 1.0;
            if (std::isinf(z)) {
              lower = 1.0;
              upper = 0.0;
            } else if (z > 0.0) {
              lower = boost::math::gamma_p(q2, z, Policy());
              upper = boost::math::gamma_q(q2, z, Policy());
            }
            return p.q > 0 ? std::pair{lower, upper} : std::pair{upper, lower};
          },
          [&](const GenFParams& p) -> std::pair<double, double> {
            if (p.p == 0.0) return tail_pair(GenGammaParams{p.mu, p.sigma, p.q}, x);
            const auto d = GenFDerived::from(p.q, p.p);
            const auto [u, v] = genf_beta_arg(p, d, x);
            if (u == 0.0) return {0.0, 1.0};
            if (v == 0.0) return {1.0, 0.0};
            // Pass the smaller of (u, 1 - u) so Boost never forms 1 - x itself.
            if (u <= 0.5) {
              return {boost::math::ibeta(d.s1, d.s2, u, Policy()),
                      boost::math::ibetac(d.s1, d.s2, u, Policy())};
            }
            return {boost::math::ibetac(d.s2, d.s1, v, Policy()),
                    boost::math::ibeta(d.s2, d.s1, v, Policy())};
          },
      },
      params);
}

}  // namespace

double cdf(const DistParams& params, double x) { return tail_pair(params, x).first; }

double survival(const DistParams& params, double x) { return tail_pair(params, x).second; }

namespace {

// Inverse of the lower (upper = false) or upper (upper = true) tail.
double invert_tail(const DistParams& params, double prob, bool upper) {
  check_probability(prob);
  validate(params);
  return std::visit(
      Overloaded{
          [&](const ExpParams& p) {
            return upper ? -std::log(prob) / p.rate : -std::log1p(-prob) / p.rate;
          },
          [&](const GammaParams& p) {
            const double z = upper ? boost::math::gamma_q_inv(p.shape, prob, Policy())
                                   : boost::math::gamma_p_inv(p.shape, prob, Policy());
            return z / p.rate;
          },
          [&](const GenGammaParams& p) {
            if (is_lognormal(p.q)) {
              const double w = upper ? -special::normal_quantile(prob)
                                     : special::normal_quantile(prob);
              return std::exp(p.mu + p.sigma * w);
            }
            const double q2 = 1.0 / (p.q * p.q);
            // For Q < 0 the lower tail of X is the upper tail of the gamma variate.
            const bool gamma_upper = (p.q > 0) == upper;
            const double g = gamma_upper ? boost::math::gamma_q_inv(q2, prob, Policy())
                                         : boost::math::gamma_p_inv(q2, prob, Policy());
            return gengamma_from_gamma(p, g);
          },
          [&](const GenFParams& p) {
            if (p.p == 0.0) {
              return invert_tail(GenGammaParams{p.mu, p.sigma, p.q}, prob, upper);
            }
            const auto d = GenFDerived::from(p.q, p.p);
            double py = 0.0;
            const double b = upper ? boost::math::ibetac_inv(d.s1, d.s2, prob, &py, Policy())
                                   : boost::math::ibeta_inv(d.s1, d.s2, prob, &py, Policy());
            return genf_from_beta(p, d, b, py);
          },
      },
      params);
}

}  // namespace

double quantile(const DistParams& params, double u) { return invert_tail(params, u, false); }

double quantile_upper(const DistParams& params, double s) { return invert_tail(params, s, true); }

double sample(const DistParams& params, RngStream& rng) {
  validate(params);
  for (;;) {
    const double x = std::visit(
        Overloaded{
            [&](const ExpParams& p) { return -std::log(rng.uniform()) / p.rate; },
            [&](const GammaParams& p) {
              return std::exp(log_gamma_variate(p.shape, rng)) / p.rate;
            },
            [&](const GenGammaParams& p) {
              if (is_lognormal(p.q)) {
                std::normal_distribution<double> n;
                return std::exp(p.mu + p.sigma * n(rng.engine()));
              }
              // gamma ~ Gamma(Q^-2, 1), w = log(Q^2 gamma) / Q, x = exp(mu + sigma w).
              const double q2 = 1.0 / (p.q * p.q);
              const double w = (std::log(p.q * p.q) + log_gamma_variate(q2, rng)) / p.q;
              return std::exp(p.mu + p.sigma * w);
            },
            [&](const GenFParams& p) {
              if (p.p == 0.0) return sample(GenGammaParams{p.mu, p.sigma, p.q}, rng);
              // e^w = (s2 / s1) G1 / G2 with G1 ~ Gamma(s1), G2 ~ Gamma(s2).
              const auto d = GenFDerived::from(p.q, p.p);
              const double log_v = std::log(d.s2 / d.s1) + log_gamma_variate(d.s1, rng) -
                                   log_gamma_variate(d.s2, rng);
              return std::exp(p.mu + p.sigma * log_v / d.delta);
            },
        },
        params);
    if (x > 0.0 && std::isfinite(x)) return x;
  }
}

double sample_truncated(const DistParams& params, double y, RngStream& rng) {
  if (!(y >= 0.0) || !std::isfinite(y)) {
    throw DomainError("truncation point must be finite and non-negative");
  }
  validate(params);
  const double tail = y == 0.0 ? 1.0 : survival(params, y);
  if (tail < 1e-12) {
    throw TailExhaustedError("no probability mass beyond truncation point " + std::to_string(y) +
                             " for " + describe(params));
  }
  // F(x) = F(y) + u (1 - F(y))  <=>  S(x) = S(y) (1 - u).
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double s = tail * rng.uniform();
    if (!(s > 0.0) || s >= 1.0) continue;
    const double x = quantile_upper(params, s);
    if (x > y && std::isfinite(x)) return x;
  }
  throw TailExhaustedError("truncated draw did not exceed truncation point " + std::to_string(y));
}

DistParams nest(const DistParams& params, Family target) {
  validate(params);
  const Family from = family_of(params);
  if (static_cast<int>(target) < static_cast<int>(from)) {
    throw UnsupportedNestingError(std::string("cannot express ") + std::string(family_name(from)) +
                                  " as " + std::string(family_name(target)));
  }
  DistParams current = params;
  while (family_of(current) != target) {
    current = std::visit(
        Overloaded{
            [](const ExpParams& p) -> DistParams { return GammaParams{1.0, p.rate}; },
            [](const GammaParams& p) -> DistParams {
              const double s = 1.0 / std::sqrt(p.shape);
              return GenGammaParams{-std::log(p.rate / p.shape), s, s};
            },
            [](const GenGammaParams& p) -> DistParams {
              return GenFParams{p.mu, p.sigma, p.q, 0.0};
            },
            [](const GenFParams& p) -> DistParams { return p; },
        },
        current);
  }
  return current;
}

}  // namespace ida::dist
