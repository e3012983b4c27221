#include "ida/fit.hpp"

#include "ida/optimize.hpp"
#include "ida/rng.hpp"
#include "ida/special.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <numeric>

namespace ida::fit {

using ingest::InterArrivalSample;
using tv::FuncKind;
using tv::ModelSpec;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kFormatVersion = 1;

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

std::span<const double> rate_coef(const ModelSpec& spec, std::span<const double> theta) {
  return theta.subspan(spec.rate_offset(), static_cast<std::size_t>(tv::complexity(spec.rate_kind())));
}

std::span<const double> shape_coef(const ModelSpec& spec, std::span<const double> theta) {
  return theta.subspan(spec.shape_offset(),
                       static_cast<std::size_t>(tv::complexity(*spec.shape_kind())));
}

// Per-family likelihood loops. Shape-only constants (lgamma of a constant
// shape, Stirling remainder of Q^-2, log B(s1, s2)) are computed once.
template <class Body>
double sum_spells(const InterArrivalSample& sample, const FitWindow& window, ParamTime when,
                  Body&& body) {
  double total = 0.0;
  for (const auto& s : sample.spells) {
    const double t = window.clamp(when == ParamTime::SpellStart ? s.t : s.t + s.x);
    const double term = body(s.x, t);
    if (!std::isfinite(term)) return kNegInf;
    total += term;
  }
  return total;
}

}  // namespace

std::string_view param_time_name(ParamTime p) noexcept {
  return p == ParamTime::SpellStart ? "spell_start" : "spell_end";
}

ParamTime parse_param_time(std::string_view name) {
  if (name == "spell_start") return ParamTime::SpellStart;
  if (name == "spell_end") return ParamTime::SpellEnd;
  throw std::invalid_argument("param_time must be spell_start or spell_end");
}

double log_likelihood(const ModelSpec& spec, std::span<const double> theta,
                      const InterArrivalSample& sample, const FitWindow& window,
                      ParamTime param_time) {
  if (theta.size() != spec.parameter_count()) {
    throw std::invalid_argument(spec.name() + " expects " +
                                std::to_string(spec.parameter_count()) + " parameters");
  }
  for (double v : theta) {
    if (!std::isfinite(v)) return kNegInf;
  }
  const auto rc = rate_coef(spec, theta);
  const FuncKind rk = spec.rate_kind();

  if (spec.family() == dist::Family::Exp) {
    return sum_spells(sample, window, param_time, [&](double x, double t) {
      const double rate = tv::eval_param_unchecked(rk, rc, t);
      if (!positive_finite(rate)) return kNegInf;
      return dist::kernel::exp_log_pdf(rate, x);
    });
  }

  const auto sc = shape_coef(spec, theta);
  const FuncKind sk = *spec.shape_kind();

  if (spec.family() == dist::Family::Gamma) {
    double last_shape = std::numeric_limits<double>::quiet_NaN();
    double last_lgamma = 0.0;
    return sum_spells(sample, window, param_time, [&](double x, double t) {
      const double rate = tv::eval_param_unchecked(rk, rc, t);
      const double shape = tv::eval_param_unchecked(sk, sc, t);
      if (!positive_finite(rate) || !positive_finite(shape)) return kNegInf;
      if (shape != last_shape) {
        last_shape = shape;
        last_lgamma = boost::math::lgamma(shape);
      }
      return dist::kernel::gamma_log_pdf(shape, rate, last_lgamma, x, std::log(x));
    });
  }

  const double q = theta[*spec.q_index()];
  const double p = spec.p_index() ? theta[*spec.p_index()] : 0.0;
  if (p < 0.0) return kNegInf;

  if (p == 0.0) {
    const double st =
        std::abs(q) < dist::kLognormalQThreshold ? 0.0 : special::stirlerr(1.0 / (q * q));
    return sum_spells(sample, window, param_time, [&](double x, double t) {
      const double rate = tv::eval_param_unchecked(rk, rc, t);
      const double shape = tv::eval_param_unchecked(sk, sc, t);
      if (!positive_finite(rate) || !positive_finite(shape)) return kNegInf;
      const double mu = -std::log(rate / shape);
      const double sigma = 1.0 / std::sqrt(shape);
      return dist::kernel::gengamma_log_pdf(mu, sigma, q, st, std::log(x));
    });
  }

  const auto d = dist::GenFDerived::from(q, p);
  const double lb = special::lbeta(d.s1, d.s2);
  if (!std::isfinite(lb) || !positive_finite(d.s1) || !positive_finite(d.s2)) return kNegInf;
  return sum_spells(sample, window, param_time, [&](double x, double t) {
    const double rate = tv::eval_param_unchecked(rk, rc, t);
    const double shape = tv::eval_param_unchecked(sk, sc, t);
    if (!positive_finite(rate) || !positive_finite(shape)) return kNegInf;
    const double mu = -std::log(rate / shape);
    const double sigma = 1.0 / std::sqrt(shape);
    return dist::kernel::genf_log_pdf(mu, sigma, d, lb, std::log(x));
  });
}

dist::DistParams FittedModel::params_at(double t) const {
  return tv::instantiate(spec, theta, window.clamp(t));
}

double exp_const_rate(const InterArrivalSample& sample) {
  if (sample.empty()) throw InsufficientDataError("empty sample");
  double sum = 0.0;
  for (const auto& s : sample.spells) sum += s.x;
  return static_cast<double>(sample.size()) / sum;
}

namespace {

// Coefficients of `to` reproducing a function of kind `from` exactly, or
// empty when `to` cannot represent it.
std::vector<double> embed_function(FuncKind from, std::span<const double> coef, FuncKind to) {
  if (from == to) return {coef.begin(), coef.end()};
  switch (to) {
    case FuncKind::Lin:
      if (from == FuncKind::Const) return {coef[0], 0.0};
      break;
    case FuncKind::Quadr:
      if (from == FuncKind::Const) return {coef[0], 0.0, 0.0};
      if (from == FuncKind::Lin) return {coef[0], coef[1], 0.0};
      break;
    case FuncKind::Expon:
      if (from == FuncKind::Const && coef[0] > 0) {
        // c_prev = c + e^{a1} with a small c and a flat exponential.
        const double c = std::max(1e-6, 1e-3 * coef[0]);
        const double rest = std::max(coef[0] - c, 1e-3);
        return {c, std::log(rest), 0.0};
      }
      break;
    case FuncKind::Const:
      break;
  }
  return {};
}

// Representation shared by every family: rate function, shape function, Q, P.
struct Expanded {
  FuncKind rate_kind;
  std::vector<double> rate;
  FuncKind shape_kind;
  std::vector<double> shape;
  double q = 0.0;
  double p = 0.0;
};

Expanded expand(const ModelSpec& spec, std::span<const double> theta) {
  Expanded e;
  e.rate_kind = spec.rate_kind();
  const auto rc = rate_coef(spec, theta);
  e.rate.assign(rc.begin(), rc.end());
  if (spec.family() == dist::Family::Exp) {
    e.shape_kind = FuncKind::Const;
    e.shape = {1.0};
  } else {
    e.shape_kind = *spec.shape_kind();
    const auto sc = shape_coef(spec, theta);
    e.shape.assign(sc.begin(), sc.end());
  }
  if (spec.q_index()) e.q = theta[*spec.q_index()];
  if (spec.p_index()) e.p = theta[*spec.p_index()];
  return e;
}

std::vector<double> moment_start(const ModelSpec& spec, const InterArrivalSample& sample) {
  double mean = 0.0;
  for (const auto& s : sample.spells) mean += s.x;
  mean /= static_cast<double>(sample.size());
  double var = 0.0;
  for (const auto& s : sample.spells) var += (s.x - mean) * (s.x - mean);
  var /= std::max<double>(1.0, static_cast<double>(sample.size()) - 1.0);

  const double alpha = std::clamp(var > 0 ? mean * mean / var : 1.0, 0.05, 50.0);
  const ModelSpec gamma_const(dist::Family::Gamma, FuncKind::Const, FuncKind::Const);
  std::vector<double> theta{alpha / mean, alpha};
  const FitWindow unused{};
  if (spec.family() == dist::Family::Exp) {
    const ModelSpec exp_const(dist::Family::Exp, FuncKind::Const, std::nullopt);
    return embed(exp_const, std::vector<double>{1.0 / mean}, spec, unused);
  }
  return embed(gamma_const, theta, spec, unused);
}

// Initial simplex edge per coordinate.
std::vector<double> initial_steps(const ModelSpec& spec, std::span<const double> theta,
                                  const FitWindow& window) {
  std::vector<double> step(theta.size(), 0.1);
  const double mid = 0.5 * (window.start + window.end);
  auto fill = [&](FuncKind kind, std::size_t off) {
    const auto coef = theta.subspan(off, static_cast<std::size_t>(tv::complexity(kind)));
    const double scale = std::max(std::abs(tv::eval_param_unchecked(kind, coef, mid)), 1e-3);
    switch (kind) {
      case FuncKind::Const:
        step[off] = 0.1 * std::max(std::abs(coef[0]), 0.1 * scale);
        break;
      case FuncKind::Lin:
        step[off] = 0.1 * std::max(std::abs(coef[0]), 0.1 * scale);
        step[off + 1] = 0.1 * std::max(std::abs(coef[1]), scale / 3.0);
        break;
      case FuncKind::Quadr:
        step[off] = 0.1 * std::max(std::abs(coef[0]), 0.1 * scale);
        step[off + 1] = 0.1 * std::max(std::abs(coef[1]), scale / 3.0);
        step[off + 2] = 0.1 * std::max(std::abs(coef[2]), scale / 10.0);
        break;
      case FuncKind::Expon:
        step[off] = 0.1 * std::max(std::abs(coef[0]), 0.1 * scale);
        step[off + 1] = 0.2;
        step[off + 2] = 0.2;
        break;
    }
  };
  fill(spec.rate_kind(), spec.rate_offset());
  if (spec.shape_kind()) fill(*spec.shape_kind(), spec.shape_offset());
  if (spec.q_index()) step[*spec.q_index()] = 0.1;
  if (spec.p_index()) step[*spec.p_index()] = 0.2;
  return step;
}

}  // namespace

std::vector<double> embed(const ModelSpec& from, std::span<const double> theta, const ModelSpec& to,
                          const FitWindow& window) {
  if (static_cast<int>(from.family()) > static_cast<int>(to.family())) return {};
  if (theta.size() != from.parameter_count()) return {};
  Expanded e = expand(from, theta);

  if (from.family() <= dist::Family::Gamma && to.family() >= dist::Family::GenGam) {
    // Gamma(alpha, beta) = GenGam(-log(beta/alpha), 1/sqrt(alpha), 1/sqrt(alpha)).
    const double mid = 0.5 * (window.start + window.end);
    const double shape = tv::eval_param_unchecked(e.shape_kind, e.shape, mid);
    if (!positive_finite(shape)) return {};
    e.q = std::clamp(1.0 / std::sqrt(shape), -5.0, 5.0);
  }
  if (from.family() != dist::Family::GenF) e.p = 0.0;

  std::vector<double> out = embed_function(e.rate_kind, e.rate, to.rate_kind());
  if (out.empty()) return {};
  if (to.family() != dist::Family::Exp) {
    const auto shape = embed_function(e.shape_kind, e.shape, *to.shape_kind());
    if (shape.empty()) return {};
    out.insert(out.end(), shape.begin(), shape.end());
  } else if (e.shape_kind != FuncKind::Const || e.shape[0] != 1.0) {
    return {};
  }
  if (to.q_index()) out.push_back(e.q);
  if (to.p_index()) out.push_back(e.p);
  return out;
}

std::vector<ModelSpec> donors(const ModelSpec& spec) {
  using dist::Family;
  const auto simpler = [](FuncKind k) -> std::optional<FuncKind> {
    switch (k) {
      case FuncKind::Lin:
      case FuncKind::Expon:
        return FuncKind::Const;
      case FuncKind::Quadr:
        return FuncKind::Lin;
      case FuncKind::Const:
        break;
    }
    return std::nullopt;
  };
  std::vector<ModelSpec> out;
  const FuncKind rk = spec.rate_kind();
  switch (spec.family()) {
    case Family::Exp:
      if (auto r = simpler(rk)) out.emplace_back(Family::Exp, *r, std::nullopt);
      break;
    case Family::Gamma: {
      const FuncKind sk = *spec.shape_kind();
      if (sk == FuncKind::Const) {
        out.emplace_back(Family::Exp, rk, std::nullopt);
        if (auto r = simpler(rk)) out.emplace_back(Family::Gamma, *r, FuncKind::Const);
      } else {
        out.emplace_back(Family::Gamma, rk, *simpler(sk));
      }
      break;
    }
    case Family::GenGam: {
      const FuncKind sk = *spec.shape_kind();
      out.emplace_back(Family::Gamma, rk, sk);
      if (auto s = simpler(sk)) out.emplace_back(Family::GenGam, rk, *s);
      break;
    }
    case Family::GenF:
      out.emplace_back(Family::GenGam, rk, *spec.shape_kind());
      break;
  }
  return out;
}

FittedModel fit(const ModelSpec& spec, const InterArrivalSample& sample, const FitWindow& window,
                const FitOptions& options, std::span<const std::vector<double>> starts) {
  const std::size_t k = spec.parameter_count();
  if (static_cast<double>(sample.size()) < options.min_obs_per_param * static_cast<double>(k)) {
    throw InsufficientDataError(spec.name() + ": " + std::to_string(sample.size()) +
                                " inter-arrivals for " + std::to_string(k) + " parameters");
  }

  const auto bounds = spec.bounds();
  opt::Box box;
  for (const auto& b : bounds) {
    box.lower.push_back(b.lower);
    box.upper.push_back(b.upper);
  }
  const opt::Objective objective = [&](std::span<const double> theta) {
    return -log_likelihood(spec, theta, sample, window, options.param_time);
  };

  std::vector<std::vector<double>> candidates;
  if (spec.family() == dist::Family::Exp && spec.rate_kind() == FuncKind::Const) {
    candidates.push_back({exp_const_rate(sample)});
  }
  for (const auto& s : starts) {
    if (s.size() == k) candidates.push_back(s);
  }
  candidates.push_back(moment_start(spec, sample));

  FittedModel out{spec, {}, kNegInf, sample.days, sample.size(), window, options.param_time, {}, {}};
  opt::SimplexOptions nm{options.max_evaluations, options.f_tol, options.x_tol};

  std::vector<double> best;
  double best_value = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (auto& c : candidates) {
    box.clamp(c);
    if (!std::isfinite(objective(c))) continue;
    ++out.diagnostics.starts;
    const auto step = initial_steps(spec, c, window);
    auto r = opt::nelder_mead(objective, c, step, box, nm);
    out.diagnostics.evaluations += r.evaluations;
    out.diagnostics.iterations += r.iterations;
    if (r.value < best_value) {
      best_value = r.value;
      best = std::move(r.x);
      converged = r.converged;
    }
  }
  if (best.empty()) {
    throw FitError(spec.name() + ": no feasible starting point");
  }

  // Restart the simplex around the incumbent with jittered edges; stop once a
  // restart no longer improves on the incumbent.
  RngStream rng(derive_seed(options.seed, {hash_string(spec.name())}));
  for (int r = 0; r < options.restarts; ++r) {
    auto step = initial_steps(spec, best, window);
    for (double& s : step) s *= 0.5 + rng.uniform();
    auto res = opt::nelder_mead(objective, best, step, box, nm);
    out.diagnostics.evaluations += res.evaluations;
    out.diagnostics.iterations += res.iterations;
    const bool improved = res.value < best_value - options.f_tol;
    if (res.value < best_value) {
      best_value = res.value;
      best = std::move(res.x);
    }
    converged = res.converged;
    if (!improved) break;
  }

  if (options.polish) {
    auto res = opt::quasi_newton_polish(objective, best, box, 200 * static_cast<int>(k + 1));
    out.diagnostics.evaluations += res.evaluations;
    if (res.value < best_value) {
      best_value = res.value;
      best = std::move(res.x);
    }
  }

  out.theta = std::move(best);
  out.log_likelihood = log_likelihood(spec, out.theta, sample, window, options.param_time);
  out.diagnostics.converged = converged;
  if (!converged) out.diagnostics.message = "simplex hit the evaluation limit";
  return out;
}

CascadeFitter::CascadeFitter(const InterArrivalSample& sample, FitWindow window, FitOptions options)
    : sample_(sample), window_(window), options_(options) {}

void CascadeFitter::preload(FittedModel model) {
  const std::string key = model.spec.name();
  fits_.insert_or_assign(key, std::move(model));
}

bool CascadeFitter::has(const ModelSpec& spec) const { return fits_.count(spec.name()) > 0; }

const FittedModel& CascadeFitter::get(const ModelSpec& spec) {
  const std::string key = spec.name();
  if (auto it = fits_.find(key); it != fits_.end()) return it->second;

  std::vector<const FittedModel*> donor_fits;
  for (const auto& d : donors(spec)) {
    try {
      donor_fits.push_back(&get(d));
    } catch (const std::exception& e) {
      spdlog::debug("donor {} for {} unavailable: {}", d.name(), key, e.what());
    }
  }
  std::vector<std::vector<double>> starts;
  for (const auto* d : donor_fits) {
    auto s = embed(d->spec, d->theta, spec, window_);
    if (!s.empty()) starts.push_back(std::move(s));
  }

  try {
    return fits_.emplace(key, fit(spec, sample_, window_, options_, starts)).first->second;
  } catch (const std::exception& e) {
    // Fall back to the donor optimum whose embedding scores best here.
    const FittedModel* chosen = nullptr;
    std::vector<double> theta;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto* d : donor_fits) {
      auto s = embed(d->spec, d->theta, spec, window_);
      if (s.empty()) continue;
      const double ll = log_likelihood(spec, s, sample_, window_, options_.param_time);
      if (!std::isfinite(ll)) continue;
      if (!chosen || ll > best) {
        chosen = d;
        best = ll;
        theta = std::move(s);
      }
    }
    if (!chosen) throw;
    FittedModel fb{spec,          theta, best, sample_.days, sample_.size(), window_,
                   options_.param_time, {},   {}};
    fb.diagnostics.fallback = true;
    fb.diagnostics.donor = chosen->spec.name();
    fb.diagnostics.message = e.what();
    spdlog::warn("{}: fit failed ({}); using {} optimum", key, e.what(), chosen->spec.name());
    return fits_.emplace(key, std::move(fb)).first->second;
  }
}

std::string to_json(const FittedModel& m) {
  nlohmann::json j;
  j["format"] = "ida.fitted_model";
  j["version"] = kFormatVersion;
  j["model"] = m.spec.name();
  j["theta"] = m.theta;
  j["log_likelihood"] = m.log_likelihood;
  j["window"] = {{"start", m.window.start}, {"end", m.window.end}};
  j["param_time"] = std::string(param_time_name(m.param_time));
  j["sample"] = {{"days", m.days}, {"observations", m.observations}};
  j["diagnostics"] = {{"evaluations", m.diagnostics.evaluations},
                      {"iterations", m.diagnostics.iterations},
                      {"converged", m.diagnostics.converged},
                      {"starts", m.diagnostics.starts},
                      {"fallback", m.diagnostics.fallback},
                      {"donor", m.diagnostics.donor},
                      {"message", m.diagnostics.message}};
  j["fingerprint"] = m.fingerprint;
  return j.dump(2);
}

FittedModel fitted_model_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "ida.fitted_model") {
    throw std::invalid_argument("not a fitted-model record");
  }
  if (j.at("version").get<int>() != kFormatVersion) {
    throw std::invalid_argument("unsupported fitted-model version");
  }
  FittedModel m{ModelSpec::parse(j.at("model").get<std::string>()),
                j.at("theta").get<std::vector<double>>(),
                j.at("log_likelihood").get<double>(),
                j.at("sample").at("days").get<std::size_t>(),
                j.at("sample").at("observations").get<std::size_t>(),
                FitWindow{j.at("window").at("start").get<double>(),
                          j.at("window").at("end").get<double>()},
                parse_param_time(j.at("param_time").get<std::string>()),
                {},
                j.value("fingerprint", "")};
  if (m.theta.size() != m.spec.parameter_count()) {
    throw std::invalid_argument("theta length does not match " + m.spec.name());
  }
  const auto& d = j.at("diagnostics");
  m.diagnostics.evaluations = d.value("evaluations", 0);
  m.diagnostics.iterations = d.value("iterations", 0);
  m.diagnostics.converged = d.value("converged", false);
  m.diagnostics.starts = d.value("starts", 0);
  m.diagnostics.fallback = d.value("fallback", false);
  m.diagnostics.donor = d.value("donor", "");
  m.diagnostics.message = d.value("message", "");
  return m;
}

}  // namespace ida::fit
