#pragma once

#include "ida/fit.hpp"
#include "ida/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace ida::sim {

/// Simulated arrival times, strictly increasing, inside (t_start, t_end).
using Trajectory = std::vector<double>;

struct TrajectorySet {
  std::vector<Trajectory> paths;
  double anchor = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::uint64_t seed = 0;
  std::size_t tail_exhausted = 0;  // trajectories left empty by a truncation failure
};

enum class AnchorRule {
  LastArrival,  // last observed arrival <= t_start, else t_start
  WindowStart,  // always t_start (first draw untruncated)
};

std::string_view anchor_rule_name(AnchorRule r) noexcept;
AnchorRule parse_anchor_rule(std::string_view name);

/// Anchor for a forecast starting at t_start given the day's observed
/// arrivals (sorted, all after the trading start).
double choose_anchor(std::span<const double> observed, double t_start,
                     AnchorRule rule = AnchorRule::LastArrival);

/// One trajectory. The first arrival is anchor + a draw truncated at
/// t_start - anchor; later gaps use parameters at the previous arrival
/// (clamped into the fit window). The first arrival at or after t_end is
/// dropped. Requires anchor <= t_start < t_end. An exhausted tail yields an
/// empty trajectory and sets *tail_exhausted when given.
Trajectory simulate_one(const fit::FittedModel& model, double anchor, double t_start, double t_end,
                        RngStream& rng, bool* tail_exhausted = nullptr);

/// M trajectories; trajectory m uses the stream derive_seed(seed, {m}).
TrajectorySet simulate_set(const fit::FittedModel& model, double anchor, double t_start,
                           double t_end, std::size_t m, std::uint64_t seed);

/// CSV with columns trajectory_index,arrival_time_hours.
void write_trajectories_csv(const std::filesystem::path& path, const TrajectorySet& set);
std::vector<Trajectory> read_trajectories_csv(const std::filesystem::path& path);

}  // namespace ida::sim
