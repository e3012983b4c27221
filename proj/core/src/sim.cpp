#include "ida/sim.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ida::sim {

namespace {

// Guards against a runaway intensity; far beyond any real market.
constexpr std::size_t kMaxArrivals = 10'000'000;

}  // namespace

std::string_view anchor_rule_name(AnchorRule r) noexcept {
  return r == AnchorRule::LastArrival ? "last_arrival" : "window_start";
}

AnchorRule parse_anchor_rule(std::string_view name) {
  if (name == "last_arrival") return AnchorRule::LastArrival;
  if (name == "window_start") return AnchorRule::WindowStart;
  throw std::invalid_argument("anchor_rule must be last_arrival or window_start");
}

double choose_anchor(std::span<const double> observed, double t_start, AnchorRule rule) {
  if (rule == AnchorRule::WindowStart) return t_start;
  const auto it = std::upper_bound(observed.begin(), observed.end(), t_start);
  return it == observed.begin() ? t_start : *std::prev(it);
}

Trajectory simulate_one(const fit::FittedModel& model, double anchor, double t_start, double t_end,
                        RngStream& rng, bool* tail_exhausted) {
  if (!(anchor <= t_start) || !(t_start < t_end)) {
    throw std::invalid_argument("simulate_one requires anchor <= t_start < t_end");
  }
  if (t_end > model.window.end) {
    throw std::invalid_argument("simulation horizon ends after the fit window");
  }
  if (tail_exhausted) *tail_exhausted = false;
  Trajectory out;
  double t;
  try {
    t = anchor + dist::sample_truncated(model.params_at(anchor), t_start - anchor, rng);
  } catch (const dist::TailExhaustedError& e) {
    spdlog::debug("empty trajectory: {}", e.what());
    if (tail_exhausted) *tail_exhausted = true;
    return out;
  }
  // A draw exceeding the truncation point in exact arithmetic can round
  // back onto t_start.
  if (t <= t_start) t = std::nextafter(t_start, t_end);
  while (t < t_end) {
    out.push_back(t);
    if (out.size() > kMaxArrivals) {
      throw std::runtime_error("simulation exceeded " + std::to_string(kMaxArrivals) +
                               " arrivals for " + model.spec.name());
    }
    double next = t + dist::sample(model.params_at(t), rng);
    // Unit jumps only: a gap below the spacing of doubles would repeat t.
    if (next <= t) next = std::nextafter(t, t_end + 1.0);
    t = next;
  }
  return out;
}

TrajectorySet simulate_set(const fit::FittedModel& model, double anchor, double t_start,
                           double t_end, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("simulate_set requires at least one trajectory");
  TrajectorySet set;
  set.anchor = anchor;
  set.t_start = t_start;
  set.t_end = t_end;
  set.seed = seed;
  set.paths.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    RngStream rng(derive_seed(seed, {i}));
    bool exhausted = false;
    set.paths.push_back(simulate_one(model, anchor, t_start, t_end, rng, &exhausted));
    if (exhausted) ++set.tail_exhausted;
  }
  if (set.tail_exhausted > 0) {
    spdlog::warn("{}: {} of {} trajectories hit an exhausted tail", model.spec.name(),
                 set.tail_exhausted, m);
  }
  return set;
}

void write_trajectories_csv(const std::filesystem::path& path, const TrajectorySet& set) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "trajectory_index,arrival_time_hours\n";
  char buf[64];
  for (std::size_t i = 0; i < set.paths.size(); ++i) {
    for (double t : set.paths[i]) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, t);
      out << buf;
    }
  }
}

std::vector<Trajectory> read_trajectories_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("trajectory_index,arrival_time_hours", 0) != 0) {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  std::vector<Trajectory> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(path.string() + ": bad row " + line);
    const auto idx = std::stoull(line.substr(0, comma));
    const double t = std::stod(line.substr(comma + 1));
    if (idx >= out.size()) out.resize(idx + 1);
    out[idx].push_back(t);
  }
  return out;
}

}  // namespace ida::sim
