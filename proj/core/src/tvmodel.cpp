#include "ida/tvmodel.hpp"

#include <cmath>
#include <stdexcept>

namespace ida::tv {

namespace {

constexpr FuncKind kAllKinds[] = {FuncKind::Const, FuncKind::Lin, FuncKind::Quadr,
                                  FuncKind::Expon};

constexpr double kConstLower = 1e-6;
constexpr double kConstUpper = 1e6;
constexpr double kSlopeBound = 1e4;
constexpr Bounds kQBounds{-5.0, 5.0};
constexpr Bounds kPBounds{0.0, 50.0};

void append_bounds(std::vector<Bounds>& out, FuncKind kind) {
  out.push_back({kConstLower, kConstUpper});
  for (int i = 1; i < complexity(kind); ++i) out.push_back({-kSlopeBound, kSlopeBound});
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

std::string_view kind_name(FuncKind k) noexcept {
  switch (k) {
    case FuncKind::Const:
      return "Const";
    case FuncKind::Lin:
      return "Lin";
    case FuncKind::Quadr:
      return "Quadr";
    case FuncKind::Expon:
      return "Expon";
  }
  return "?";
}

std::optional<FuncKind> parse_kind(std::string_view name) noexcept {
  for (FuncKind k : kAllKinds) {
    if (kind_name(k) == name) return k;
  }
  return std::nullopt;
}

double eval_param_unchecked(FuncKind kind, std::span<const double> coef, double t) noexcept {
  switch (kind) {
    case FuncKind::Const:
      return coef[0];
    case FuncKind::Lin:
      return coef[0] + coef[1] * t;
    case FuncKind::Quadr:
      return coef[0] + coef[1] * t + coef[2] * t * t;
    case FuncKind::Expon:
      return coef[0] + std::exp(coef[1] + coef[2] * t);
  }
  return std::nan("");
}

double eval_param(FuncKind kind, std::span<const double> coef, double t) {
  if (coef.size() != static_cast<std::size_t>(complexity(kind))) {
    throw std::invalid_argument("coefficient count does not match function kind");
  }
  const double v = eval_param_unchecked(kind, coef, t);
  if (!std::isfinite(v)) {
    throw ParameterInfeasibleError(std::string(kind_name(kind)) +
                                   " parameter function overflowed at t = " + std::to_string(t));
  }
  return v;
}

ModelSpec::ModelSpec(dist::Family family, FuncKind rate_kind, std::optional<FuncKind> shape_kind)
    : family_(family), rate_kind_(rate_kind), shape_kind_(shape_kind) {
  if (family == dist::Family::Exp) {
    if (shape_kind) throw std::invalid_argument("Exp models have no shape function");
  } else {
    if (!shape_kind) throw std::invalid_argument("non-Exp models need a shape function");
    if (complexity(*shape_kind) > complexity(rate_kind)) {
      throw std::invalid_argument("shape function may not be more complex than rate function");
    }
  }
}

ModelSpec ModelSpec::parse(std::string_view name) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = name.find('.', start);
    parts.push_back(name.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  const auto fail = [&]() -> ModelSpec {
    throw std::invalid_argument("unknown model name '" + std::string(name) + "'");
  };
  if (parts.size() < 2 || parts.size() > 3) return fail();
  const auto family = dist::parse_family(parts[0]);
  const auto rate = parse_kind(parts[1]);
  if (!family || !rate) return fail();
  if (*family == dist::Family::Exp) {
    if (parts.size() != 2) return fail();
    return ModelSpec(*family, *rate, std::nullopt);
  }
  if (parts.size() != 3) return fail();
  const auto shape = parse_kind(parts[2]);
  if (!shape) return fail();
  try {
    return ModelSpec(*family, *rate, *shape);
  } catch (const std::invalid_argument&) {
    return fail();
  }
}

std::size_t ModelSpec::shape_offset() const noexcept {
  return static_cast<std::size_t>(complexity(rate_kind_));
}

std::size_t ModelSpec::parameter_count() const noexcept {
  std::size_t n = shape_offset();
  if (shape_kind_) n += static_cast<std::size_t>(complexity(*shape_kind_));
  if (family_ == dist::Family::GenGam) n += 1;
  if (family_ == dist::Family::GenF) n += 2;
  return n;
}

std::optional<std::size_t> ModelSpec::q_index() const noexcept {
  if (family_ != dist::Family::GenGam && family_ != dist::Family::GenF) return std::nullopt;
  return shape_offset() + static_cast<std::size_t>(complexity(*shape_kind_));
}

std::optional<std::size_t> ModelSpec::p_index() const noexcept {
  if (family_ != dist::Family::GenF) return std::nullopt;
  return *q_index() + 1;
}

std::vector<Bounds> ModelSpec::bounds() const {
  std::vector<Bounds> out;
  out.reserve(parameter_count());
  append_bounds(out, rate_kind_);
  if (shape_kind_) append_bounds(out, *shape_kind_);
  if (q_index()) out.push_back(kQBounds);
  if (p_index()) out.push_back(kPBounds);
  return out;
}

std::string ModelSpec::name() const {
  std::string n(dist::family_name(family_));
  n += '.';
  n += kind_name(rate_kind_);
  if (shape_kind_) {
    n += '.';
    n += kind_name(*shape_kind_);
  }
  return n;
}

std::optional<dist::DistParams> try_instantiate(const ModelSpec& spec,
                                                std::span<const double> theta, double t) noexcept {
  if (theta.size() != spec.parameter_count()) return std::nullopt;
  const auto rate_coef = theta.subspan(spec.rate_offset(),
                                       static_cast<std::size_t>(complexity(spec.rate_kind())));
  const double rate = eval_param_unchecked(spec.rate_kind(), rate_coef, t);
  if (!positive_finite(rate)) return std::nullopt;
  if (spec.family() == dist::Family::Exp) return dist::ExpParams{rate};

  const auto shape_kind = *spec.shape_kind();
  const auto shape_coef =
      theta.subspan(spec.shape_offset(), static_cast<std::size_t>(complexity(shape_kind)));
  const double shape = eval_param_unchecked(shape_kind, shape_coef, t);
  if (!positive_finite(shape)) return std::nullopt;

  switch (spec.family()) {
    case dist::Family::Gamma:
      return dist::GammaParams{shape, rate};
    case dist::Family::GenGam: {
      const double q = theta[*spec.q_index()];
      if (!std::isfinite(q)) return std::nullopt;
      return dist::GenGammaParams{-std::log(rate / shape), 1.0 / std::sqrt(shape), q};
    }
    case dist::Family::GenF: {
      const double q = theta[*spec.q_index()];
      const double p = theta[*spec.p_index()];
      if (!std::isfinite(q) || !std::isfinite(p) || p < 0.0) return std::nullopt;
      return dist::GenFParams{-std::log(rate / shape), 1.0 / std::sqrt(shape), q, p};
    }
    case dist::Family::Exp:
      break;
  }
  return std::nullopt;
}

dist::DistParams instantiate(const ModelSpec& spec, std::span<const double> theta, double t) {
  if (theta.size() != spec.parameter_count()) {
    throw std::invalid_argument(spec.name() + " expects " +
                                std::to_string(spec.parameter_count()) + " parameters, got " +
                                std::to_string(theta.size()));
  }
  auto params = try_instantiate(spec, theta, t);
  if (!params) {
    throw ParameterInfeasibleError(spec.name() + ": nonpositive rate or shape at t = " +
                                   std::to_string(t));
  }
  return *params;
}

bool feasible_on_grid(const ModelSpec& spec, std::span<const double> theta, double start,
                      double end) {
  const auto steps = static_cast<long>(std::ceil((end - start) * 60.0 - 1e-9));
  for (long j = 0; j <= steps; ++j) {
    const double t = j == steps ? end : start + static_cast<double>(j) / 60.0;
    if (!try_instantiate(spec, theta, t)) return false;
  }
  return true;
}

std::vector<ModelSpec> enumerate_models() {
  std::vector<ModelSpec> out;
  for (FuncKind rate : kAllKinds) out.emplace_back(dist::Family::Exp, rate, std::nullopt);
  for (dist::Family family : {dist::Family::Gamma, dist::Family::GenGam, dist::Family::GenF}) {
    for (FuncKind rate : kAllKinds) {
      for (FuncKind shape : kAllKinds) {
        if (complexity(shape) <= complexity(rate)) out.emplace_back(family, rate, shape);
      }
    }
  }
  return out;
}

}  // namespace ida::tv
