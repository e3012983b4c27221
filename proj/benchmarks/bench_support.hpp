#pragma once

#include "ida/fit.hpp"
#include "ida/sim.hpp"

namespace ida::bench {

inline fit::FittedModel make_model(const std::string& name, std::vector<double> theta) {
  return {tv::ModelSpec::parse(name), std::move(theta), 0.0, 0, 0, {-3.25, -0.5},
          fit::ParamTime::SpellStart, {}, {}};
}

/// Spells pooled from `days` simulated windows, as the estimator sees them.
inline ingest::InterArrivalSample make_sample(const fit::FittedModel& model, int days,
                                              std::uint64_t seed) {
  ingest::InterArrivalSample sample;
  const auto set = sim::simulate_set(model, -3.25, -3.25, -0.5, static_cast<std::size_t>(days), seed);
  for (const auto& path : set.paths) {
    double prev = -3.25;
    for (double t : path) {
      sample.spells.push_back({t - prev, prev});
      prev = t;
    }
  }
  sample.days = static_cast<std::size_t>(days);
  return sample;
}

}  // namespace ida::bench
