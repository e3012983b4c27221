#pragma once

#include "ida/dist.hpp"
#include "ida/ingest.hpp"
#include "ida/tvmodel.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ida::fit {

/// Which end of a spell [T_{i-1}, T_i) the parameter functions are evaluated at.
enum class ParamTime { SpellStart, SpellEnd };

std::string_view param_time_name(ParamTime p) noexcept;
ParamTime parse_param_time(std::string_view name);

/// Modeling window [start, end). Parameter functions are only ever evaluated
/// at times clamped into it.
struct FitWindow {
  double start = -3.25;
  double end = -0.5;

  double clamp(double t) const noexcept { return std::clamp(t, start, end); }
};

/// Sum over spells of log f(x_i; instantiate(spec, theta, clamp(t_i))).
/// Returns -inf when theta is infeasible at any evaluated time.
double log_likelihood(const tv::ModelSpec& spec, std::span<const double> theta,
                      const ingest::InterArrivalSample& sample, const FitWindow& window,
                      ParamTime param_time = ParamTime::SpellStart);

struct FitOptions {
  int max_evaluations = 20000;  // per simplex run
  int restarts = 3;
  double f_tol = 1e-8;
  double x_tol = 1e-8;
  bool polish = true;
  double min_obs_per_param = 10.0;
  std::uint64_t seed = 0;
  ParamTime param_time = ParamTime::SpellStart;
};

struct FitDiagnostics {
  int evaluations = 0;
  int iterations = 0;
  bool converged = false;
  int starts = 0;
  bool fallback = false;  // theta copied from a donor model after a failed fit
  std::string donor;
  std::string message;
};

struct FittedModel {
  tv::ModelSpec spec;
  std::vector<double> theta;
  double log_likelihood = 0.0;
  std::size_t days = 0;
  std::size_t observations = 0;
  FitWindow window;
  ParamTime param_time = ParamTime::SpellStart;
  FitDiagnostics diagnostics;
  std::string fingerprint;  // caller-defined provenance key

  /// Distribution of the inter-arrival starting at time t (clamped into the window).
  dist::DistParams params_at(double t) const;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maximum likelihood estimate of theta within the model's box bounds.
/// `starts` are candidate initial points (e.g. embedded donor optima); a
/// moment-based start is always added. Throws InsufficientDataError when the
/// sample has fewer than min_obs_per_param * parameter_count spells.
FittedModel fit(const tv::ModelSpec& spec, const ingest::InterArrivalSample& sample,
                const FitWindow& window, const FitOptions& options,
                std::span<const std::vector<double>> starts = {});

/// Rate of the closed-form Exp.Const estimate, n / sum(x).
double exp_const_rate(const ingest::InterArrivalSample& sample);

/// Models whose optimum seeds `spec` in the warm-start cascade.
std::vector<tv::ModelSpec> donors(const tv::ModelSpec& spec);

/// Rewrites a theta of `from` as a theta of `to`. Exact (same density at
/// every t) when `from` is nested in `to`; for Gamma -> GenGam with a
/// non-constant shape function, Q is set from the shape at the window middle
/// and the result is only a starting point. Returns an empty vector when no
/// embedding exists.
std::vector<double> embed(const tv::ModelSpec& from, std::span<const double> theta,
                          const tv::ModelSpec& to, const FitWindow& window);

/// Fits models for one sample, memoizing results so each donor in the
/// cascade is fitted once.
class CascadeFitter {
 public:
  CascadeFitter(const ingest::InterArrivalSample& sample, FitWindow window, FitOptions options);

  /// Uses `model` instead of fitting its spec (e.g. resumed from disk).
  void preload(FittedModel model);
  /// Fit (or memoized fit) for `spec`. Falls back to the best donor's theta,
  /// flagged in the diagnostics, when the fit itself throws.
  const FittedModel& get(const tv::ModelSpec& spec);
  bool has(const tv::ModelSpec& spec) const;

 private:
  const ingest::InterArrivalSample& sample_;
  FitWindow window_;
  FitOptions options_;
  std::map<std::string, FittedModel> fits_;
};

/// Versioned JSON record.
std::string to_json(const FittedModel& model);
FittedModel fitted_model_from_json(std::string_view text);

}  // namespace ida::fit
