#pragma once

#include "ida/dist.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ida::tv {

/// Shape of a time-varying parameter function f(t; theta).
enum class FuncKind { Const = 0, Lin = 1, Quadr = 2, Expon = 3 };

std::string_view kind_name(FuncKind k) noexcept;
std::optional<FuncKind> parse_kind(std::string_view name) noexcept;

/// Number of coefficients; also the complexity used to order models.
constexpr int complexity(FuncKind k) noexcept {
  switch (k) {
    case FuncKind::Const:
      return 1;
    case FuncKind::Lin:
      return 2;
    case FuncKind::Quadr:
    case FuncKind::Expon:
      return 3;
  }
  return 0;
}

class ParameterInfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Const: c | Lin: c + b1 t | Quadr: c + b1 t + b2 t^2 | Expon: c + exp(a1 + a2 t).
/// `coef` holds exactly complexity(kind) values. Returns +-inf on overflow.
double eval_param_unchecked(FuncKind kind, std::span<const double> coef, double t) noexcept;

/// As eval_param_unchecked, but throws ParameterInfeasibleError when the result is not finite.
double eval_param(FuncKind kind, std::span<const double> coef, double t);

struct Bounds {
  double lower;
  double upper;
};

/// One of the 37 inter-arrival models. Parameter vector layout:
///   [rate-function coefficients | shape-function coefficients | Q | P]
/// where the shape block is absent for Exp, Q appears for GenGam and GenF,
/// and P only for GenF. For Exp the rate function is lambda(t); otherwise it
/// is the gamma rate beta(t) and the shape function is alpha(t).
class ModelSpec {
 public:
  ModelSpec(dist::Family family, FuncKind rate_kind, std::optional<FuncKind> shape_kind);

  /// Parses "Exp.Y" or "X.Y.Z". Throws std::invalid_argument for unknown or
  /// disallowed combinations.
  static ModelSpec parse(std::string_view name);

  dist::Family family() const noexcept { return family_; }
  FuncKind rate_kind() const noexcept { return rate_kind_; }
  std::optional<FuncKind> shape_kind() const noexcept { return shape_kind_; }

  std::size_t parameter_count() const noexcept;
  std::size_t rate_offset() const noexcept { return 0; }
  std::size_t shape_offset() const noexcept;
  /// Index of Q (GenGam, GenF) or P (GenF only).
  std::optional<std::size_t> q_index() const noexcept;
  std::optional<std::size_t> p_index() const noexcept;

  std::vector<Bounds> bounds() const;
  /// Canonical name, e.g. "Gamma.Expon.Lin".
  std::string name() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

 private:
  dist::Family family_;
  FuncKind rate_kind_;
  std::optional<FuncKind> shape_kind_;
};

/// Parameter distribution at time t; std::nullopt when rate or shape is not
/// strictly positive (or not finite) at t.
std::optional<dist::DistParams> try_instantiate(const ModelSpec& spec,
                                                std::span<const double> theta, double t) noexcept;

/// As try_instantiate but throws ParameterInfeasibleError.
dist::DistParams instantiate(const ModelSpec& spec, std::span<const double> theta, double t);

/// True when the rate and shape functions are positive at every point of the
/// one-minute grid over [start, end] (both endpoints included).
bool feasible_on_grid(const ModelSpec& spec, std::span<const double> theta, double start,
                      double end);

/// All 37 models: 4 Exp, then 11 per Gamma, GenGam, GenF with
/// complexity(shape) <= complexity(rate).
std::vector<ModelSpec> enumerate_models();

}  // namespace ida::tv
