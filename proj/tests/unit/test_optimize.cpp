#include "ida/optimize.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace ida::opt;

namespace {

double quadratic(std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (i + 1.0) * (x[i] - 1.0 - i) * (x[i] - 1.0 - i);
  return s;
}

double rosenbrock(std::span<const double> x) {
  return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
}

Box wide(std::size_t n) { return {std::vector<double>(n, -1e3), std::vector<double>(n, 1e3)}; }

}  // namespace

TEST(NelderMead, SeparableQuadratic) {
  const std::vector<double> step(4, 0.5);
  const auto r = nelder_mead(quadratic, {0, 0, 0, 0}, step, wide(4), {});
  EXPECT_TRUE(r.converged);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(r.x[i], 1.0 + i, 1e-3);
  EXPECT_LT(r.value, 1e-6);
  EXPECT_LE(r.evaluations, SimplexOptions{}.max_evaluations);
}

TEST(NelderMead, Rosenbrock) {
  const std::vector<double> step{0.5, 0.5};
  const auto r = nelder_mead(rosenbrock, {-1.2, 1.0}, step, wide(2), {});
  EXPECT_NEAR(r.x[0], 1.0, 1e-3);
  EXPECT_NEAR(r.x[1], 1.0, 2e-3);
}

TEST(NelderMead, StaysInsideTheBox) {
  const Box box{{2.0, -1.0}, {5.0, 0.5}};
  const std::vector<double> step{1.0, 1.0};
  const auto r = nelder_mead(
      [&](std::span<const double> x) {
        for (std::size_t i = 0; i < 2; ++i) {
          EXPECT_GE(x[i], box.lower[i]);
          EXPECT_LE(x[i], box.upper[i]);
        }
        return quadratic(x);
      },
      {3.0, 0.0}, step, box, {});
  EXPECT_NEAR(r.x[0], 2.0, 1e-4);
  EXPECT_NEAR(r.x[1], 0.5, 1e-4);
}

TEST(NelderMead, RetreatsFromInfeasibleRegion) {
  // Minimum of the smooth part lies at x = -1, where the objective is infeasible.
  const auto f = [](std::span<const double> x) {
    if (x[0] <= 0.0) return std::numeric_limits<double>::infinity();
    return (x[0] + 1.0) * (x[0] + 1.0) - std::log(x[0]);
  };
  const std::vector<double> step{0.5};
  const auto r = nelder_mead(f, {2.0}, step, wide(1), {});
  // d/dx: 2(x + 1) - 1/x = 0 gives x = (sqrt(3) - 1) / 2.
  EXPECT_NEAR(r.x[0], (std::sqrt(3.0) - 1.0) / 2.0, 1e-4);
  EXPECT_TRUE(std::isfinite(r.value));
}

TEST(NelderMead, EvaluationBudgetIsRespected) {
  SimplexOptions o;
  o.max_evaluations = 50;
  const std::vector<double> step{0.5, 0.5};
  const auto r = nelder_mead(rosenbrock, {-1.2, 1.0}, step, wide(2), o);
  EXPECT_LE(r.evaluations, 55);
  EXPECT_FALSE(r.converged);
}

TEST(NelderMead, Deterministic) {
  const std::vector<double> step{0.3, 0.3};
  const auto a = nelder_mead(rosenbrock, {-1.2, 1.0}, step, wide(2), {});
  const auto b = nelder_mead(rosenbrock, {-1.2, 1.0}, step, wide(2), {});
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.evaluations, b.evaluations);
}

TEST(Polish, ImprovesAndNeverWorsens) {
  const std::vector<double> start{0.9, 0.8};
  const auto r = quasi_newton_polish(rosenbrock, start, wide(2), 2000);
  EXPECT_LE(r.value, rosenbrock(start));
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 2e-4);

  const std::vector<double> at_min{1.0, 1.0};
  const auto s = quasi_newton_polish(rosenbrock, at_min, wide(2), 200);
  EXPECT_EQ(s.value, 0.0);
}

TEST(Polish, ProjectsOntoTheBox) {
  const Box box{{2.0, -1.0}, {5.0, 0.5}};
  const auto r = quasi_newton_polish(quadratic, {2.5, 0.0}, box, 500);
  EXPECT_NEAR(r.x[0], 2.0, 1e-6);
  EXPECT_NEAR(r.x[1], 0.5, 1e-6);
}

TEST(Box, Clamp) {
  const Box box{{0.0, 0.0}, {1.0, 1.0}};
  std::vector<double> x{-1.0, 2.0};
  box.clamp(x);
  EXPECT_EQ(x, (std::vector<double>{0.0, 1.0}));
}
