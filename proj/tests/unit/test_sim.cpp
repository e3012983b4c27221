#include "ida/sim.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <filesystem>
#include <numeric>

using namespace ida;
using tv::ModelSpec;

namespace {

fit::FittedModel model(const char* name, std::vector<double> theta) {
  return {ModelSpec::parse(name), std::move(theta), 0.0, 0, 0, {-3.25, -0.5},
          fit::ParamTime::SpellStart, {}, {}};
}

std::vector<double> counts(const sim::TrajectorySet& set) {
  std::vector<double> out;
  for (const auto& p : set.paths) out.push_back(static_cast<double>(p.size()));
  return out;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(Simulate, ArrivalsInsideHorizonAndIncreasing) {
  const auto m = model("Gamma.Lin.Const", {8.0, 1.0, 0.6});
  const auto set = sim::simulate_set(m, -4.0, -3.25, -0.5, 100000, 42);
  ASSERT_EQ(set.paths.size(), 100000u);
  for (const auto& p : set.paths) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      ASSERT_GT(p[i], -3.25);
      ASSERT_LT(p[i], -0.5);
      if (i > 0) ASSERT_LT(p[i - 1], p[i]);
    }
  }
}

TEST(Simulate, PoissonMeanAndDispersion) {
  const auto set = sim::simulate_set(model("Exp.Const", {200.0}), -3.25, -3.25, -0.5, 10000, 7);
  const auto c = counts(set);
  EXPECT_NEAR(mean(c), 550.0, 3.0 * std::sqrt(550.0 / 1e4));
  const double ratio = variance(c) / mean(c);
  EXPECT_GE(ratio, 0.94);
  EXPECT_LE(ratio, 1.06);
}

TEST(Simulate, DisjointCountsUncorrelated) {
  const auto set = sim::simulate_set(model("Exp.Const", {60.0}), -3.25, -3.25, -0.5, 10000, 8);
  std::vector<double> a, b;
  for (const auto& p : set.paths) {
    a.push_back(static_cast<double>(std::count_if(p.begin(), p.end(), [](double t) { return t < -2.0; })));
    b.push_back(static_cast<double>(std::count_if(p.begin(), p.end(), [](double t) { return t >= -2.0; })));
  }
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sab += (a[i] - ma) * (b[i] - mb);
  const double rho = sab / static_cast<double>(a.size() - 1) / std::sqrt(variance(a) * variance(b));
  EXPECT_LT(std::abs(rho), 0.05);
}

TEST(Simulate, FirstGapAtWindowStartIsUntruncated) {
  for (const auto& [name, theta] :
       std::vector<std::pair<const char*, std::vector<double>>>{
           {"Exp.Const", {40.0}},
           {"Gamma.Const.Const", {30.0, 0.6}},
           {"GenGam.Const.Const", {50.0, 2.0, 0.5}},
           {"GenF.Lin.Const", {60.0, 5.0, 1.5, 0.4, 0.8}}}) {
    const auto m = model(name, theta);
    std::vector<double> gaps;
    for (const auto& p : sim::simulate_set(m, -3.25, -3.25, -0.5, 10000, 99).paths) {
      // A first gap past the horizon leaves the path empty; it counts as censored.
      gaps.push_back(p.empty() ? std::numeric_limits<double>::infinity() : p.front() + 3.25);
    }
    const auto params = m.params_at(-3.25);
    EXPECT_LT(ida::testing::ks_distance(gaps, [&](double x) { return dist::cdf(params, x); }), 0.02) << name;
  }
}

TEST(Simulate, TruncatedFirstGapForExpIsShiftedExp) {
  const auto m = model("Exp.Const", {20.0});
  std::vector<double> gaps;
  for (const auto& p : sim::simulate_set(m, -3.6, -3.25, -0.5, 10000, 3).paths) {
    gaps.push_back(p.front() + 3.25);
  }
  EXPECT_LT(ida::testing::ks_distance(gaps, [](double x) { return -std::expm1(-20.0 * x); }), 0.02);
}

TEST(Simulate, TruncatedFirstGapMatchesRestrictedCdf) {
  const auto m = model("GenGam.Const.Const", {20.0, 0.8, 0.3});
  const auto p = m.params_at(-3.6);
  const double y = 0.35;
  const double sy = dist::survival(p, y);
  std::vector<double> first;
  for (const auto& path : sim::simulate_set(m, -3.6, -3.25, -0.5, 10000, 5).paths) {
    if (!path.empty()) first.push_back(path.front() + 3.6);
  }
  ASSERT_GT(first.size(), 9900u);
  EXPECT_LT(ida::testing::ks_distance(first, [&](double x) { return 1.0 - dist::survival(p, x) / sy; }), 0.02);
}

TEST(Simulate, ExhaustedTailGivesEmptyTrajectory) {
  // Mean gap of seconds; nothing survives two hours of truncation.
  const auto m = model("Gamma.Const.Const", {3600.0, 4.0});
  bool exhausted = false;
  RngStream rng(1);
  const auto path = sim::simulate_one(m, -5.25, -3.25, -0.5, rng, &exhausted);
  EXPECT_TRUE(path.empty());
  EXPECT_TRUE(exhausted);
  const auto set = sim::simulate_set(m, -5.25, -3.25, -0.5, 10, 1);
  EXPECT_EQ(set.tail_exhausted, 10u);
}

TEST(Simulate, SetIsDeterministicAndMatchesStreams) {
  const auto m = model("Gamma.Expon.Lin", {20, 4.5, 0.5, 0.8, 0.1});
  const auto a = sim::simulate_set(m, -3.4, -3.25, -0.5, 50, 1234);
  const auto b = sim::simulate_set(m, -3.4, -3.25, -0.5, 50, 1234);
  EXPECT_EQ(a.paths, b.paths);
  const auto c = sim::simulate_set(m, -3.4, -3.25, -0.5, 50, 1235);
  EXPECT_NE(a.paths, c.paths);

  const auto one = sim::simulate_set(m, -3.4, -3.25, -0.5, 1, 1234);
  RngStream rng(derive_seed(1234, {0}));
  EXPECT_EQ(one.paths[0], sim::simulate_one(m, -3.4, -3.25, -0.5, rng));
  EXPECT_EQ(one.paths[0], a.paths[0]);
  // Trajectory m does not depend on how many others were drawn.
  RngStream rng7(derive_seed(1234, {7}));
  EXPECT_EQ(a.paths[7], sim::simulate_one(m, -3.4, -3.25, -0.5, rng7));
}

TEST(Simulate, Preconditions) {
  const auto m = model("Exp.Const", {10.0});
  RngStream rng(1);
  EXPECT_THROW(sim::simulate_one(m, -3.0, -3.25, -0.5, rng), std::invalid_argument);
  EXPECT_THROW(sim::simulate_one(m, -3.25, -1.0, -1.0, rng), std::invalid_argument);
  EXPECT_THROW(sim::simulate_one(m, -3.25, -3.25, 0.0, rng), std::invalid_argument);
  EXPECT_THROW(sim::simulate_set(m, -3.25, -3.25, -0.5, 0, 1), std::invalid_argument);
}

TEST(Anchor, Rules) {
  const std::vector<double> obs{-8.0, -4.0, -3.25, -1.0};
  EXPECT_EQ(sim::choose_anchor(obs, -3.25), -3.25);
  const std::vector<double> obs2{-8.0, -4.0, -1.0};
  EXPECT_EQ(sim::choose_anchor(obs2, -3.25), -4.0);
  EXPECT_EQ(sim::choose_anchor(obs2, -3.25, sim::AnchorRule::WindowStart), -3.25);
  EXPECT_EQ(sim::choose_anchor({}, -3.25), -3.25);
  EXPECT_EQ(sim::parse_anchor_rule("window_start"), sim::AnchorRule::WindowStart);
  EXPECT_EQ(sim::anchor_rule_name(sim::AnchorRule::LastArrival), "last_arrival");
  EXPECT_THROW(sim::parse_anchor_rule("nope"), std::invalid_argument);
}

TEST(TrajectoryCsv, RoundTrip) {
  const auto set = sim::simulate_set(model("Exp.Const", {3.0}), -3.25, -3.25, -0.5, 20, 4);
  const auto path = std::filesystem::temp_directory_path() / "ida_traj_roundtrip.csv";
  sim::write_trajectories_csv(path, set);
  auto back = sim::read_trajectories_csv(path);
  // Trailing empty trajectories leave no rows.
  back.resize(set.paths.size());
  EXPECT_EQ(back, set.paths);
  std::filesystem::remove(path);
}
