#pragma once

#include <functional>
#include <span>
#include <vector>

namespace ida::opt {

/// Function to minimize. Returning +inf marks a point as infeasible.
using Objective = std::function<double(std::span<const double>)>;

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  void clamp(std::span<double> x) const;
};

struct SimplexOptions {
  int max_evaluations = 20000;
  double f_tol = 1e-8;  // absolute spread of objective values over the simplex
  double x_tol = 1e-8;  // simplex extent relative to max(1, |x_best|)
};

struct Result {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  int iterations = 0;
  bool converged = false;
};

/// Bounded Nelder-Mead with dimension-adaptive coefficients. Trial points are
/// clamped into the box; `step` sets the initial simplex edge per coordinate.
Result nelder_mead(const Objective& f, std::vector<double> start, std::span<const double> step,
                   const Box& box, const SimplexOptions& options);

/// Projected BFGS with central-difference gradients, started from a point
/// that is already near a minimum. Never returns a worse point than `start`.
Result quasi_newton_polish(const Objective& f, std::vector<double> start, const Box& box,
                           int max_evaluations, double g_tol = 1e-7);

}  // namespace ida::opt
