#include "ida/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ida::opt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sanitize(double v) { return std::isnan(v) ? kInf : v; }

}  // namespace

void Box::clamp(std::span<double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
}

Result nelder_mead(const Objective& f, std::vector<double> start, std::span<const double> step,
                   const Box& box, const SimplexOptions& options) {
  const std::size_t n = start.size();
  const double dn = static_cast<double>(n);
  const double alpha = 1.0;
  const double beta = 1.0 + 2.0 / dn;
  const double gamma = 0.75 - 1.0 / (2.0 * dn);
  const double delta = 1.0 - 1.0 / dn;

  Result res;
  auto eval = [&](std::span<const double> x) {
    ++res.evaluations;
    return sanitize(f(x));
  };

  box.clamp(start);
  std::vector<std::vector<double>> simplex(n + 1, start);
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    auto& v = simplex[i + 1];
    v[i] += step[i];
    if (v[i] > box.upper[i]) v[i] = start[i] - step[i];
    box.clamp(v);
  }
  for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  for (;;) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];

    double extent = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const double scale = std::max(1.0, std::abs(simplex[best][k]));
        extent = std::max(extent, std::abs(simplex[i][k] - simplex[best][k]) / scale);
      }
    }
    const double spread = values[worst] - values[best];
    if (std::isfinite(values[best]) && spread <= options.f_tol && extent <= options.x_tol) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= options.max_evaluations) break;
    ++res.iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / dn;
    }
    auto along = [&](double coef, std::vector<double>& out) {
      for (std::size_t k = 0; k < n; ++k) {
        out[k] = centroid[k] + coef * (centroid[k] - simplex[worst][k]);
      }
      box.clamp(out);
    };

    along(alpha, trial);
    const double f_reflect = eval(trial);
    if (f_reflect < values[best]) {
      along(beta, trial2);
      const double f_expand = eval(trial2);
      if (f_expand < f_reflect) {
        simplex[worst] = trial2;
        values[worst] = f_expand;
      } else {
        simplex[worst] = trial;
        values[worst] = f_reflect;
      }
      continue;
    }
    if (f_reflect < values[second]) {
      simplex[worst] = trial;
      values[worst] = f_reflect;
      continue;
    }
    if (f_reflect < values[worst]) {
      along(gamma, trial2);  // outside contraction
      const double f_contract = eval(trial2);
      if (f_contract <= f_reflect) {
        simplex[worst] = trial2;
        values[worst] = f_contract;
        continue;
      }
    } else {
      along(-gamma, trial2);  // inside contraction
      const double f_contract = eval(trial2);
      if (f_contract < values[worst]) {
        simplex[worst] = trial2;
        values[worst] = f_contract;
        continue;
      }
    }
    // Shrink towards the best vertex.
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) {
        simplex[i][k] = simplex[best][k] + delta * (simplex[i][k] - simplex[best][k]);
      }
      values[i] = eval(simplex[i]);
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  res.x = simplex[static_cast<std::size_t>(best_it - values.begin())];
  res.value = *best_it;
  return res;
}

Result quasi_newton_polish(const Objective& f, std::vector<double> start, const Box& box,
                           int max_evaluations, double g_tol) {
  const std::size_t n = start.size();
  Result res;
  auto eval = [&](std::span<const double> x) {
    ++res.evaluations;
    return sanitize(f(x));
  };
  box.clamp(start);
  std::vector<double> x = start;
  double fx = eval(x);
  res.x = x;
  res.value = fx;
  if (!std::isfinite(fx)) return res;

  std::vector<double> h(n);
  for (std::size_t k = 0; k < n; ++k) h[k] = 1e-6 * std::max(std::abs(x[k]), 1e-3);

  auto gradient = [&](const std::vector<double>& at, std::vector<double>& g) -> bool {
    std::vector<double> probe = at;
    for (std::size_t k = 0; k < n; ++k) {
      const double up = std::min(at[k] + h[k], box.upper[k]);
      const double dn = std::max(at[k] - h[k], box.lower[k]);
      probe[k] = up;
      const double fu = eval(probe);
      probe[k] = dn;
      const double fd = eval(probe);
      probe[k] = at[k];
      if (!std::isfinite(fu) || !std::isfinite(fd) || up == dn) return false;
      g[k] = (fu - fd) / (up - dn);
    }
    return true;
  };

  // Inverse Hessian approximation, starting from a diagonal scaled by h.
  std::vector<double> H(n * n, 0.0);
  std::vector<double> g(n), g_new(n), dir(n), x_new(n), s(n), y(n);
  if (!gradient(x, g)) return res;
  for (std::size_t k = 0; k < n; ++k) H[k * n + k] = 1.0;
  bool scaled = false;

  while (res.evaluations < max_evaluations) {
    ++res.iterations;
    double gnorm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const bool at_lower = x[k] <= box.lower[k] && g[k] > 0;
      const bool at_upper = x[k] >= box.upper[k] && g[k] < 0;
      if (!at_lower && !at_upper) gnorm = std::max(gnorm, std::abs(g[k]) * std::max(1.0, std::abs(x[k])));
    }
    if (gnorm < g_tol) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      dir[i] = 0.0;
      for (std::size_t k = 0; k < n; ++k) dir[i] -= H[i * n + k] * g[k];
    }
    double slope = 0.0;
    for (std::size_t k = 0; k < n; ++k) slope += dir[k] * g[k];
    if (!(slope < 0)) {
      // Not a descent direction; reset to steepest descent.
      std::fill(H.begin(), H.end(), 0.0);
      for (std::size_t k = 0; k < n; ++k) {
        H[k * n + k] = 1.0;
        dir[k] = -g[k];
      }
      slope = 0.0;
      for (std::size_t k = 0; k < n; ++k) slope += dir[k] * g[k];
      scaled = false;
    }
    double step = 1.0;
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 40 && res.evaluations < max_evaluations; ++ls) {
      for (std::size_t k = 0; k < n; ++k) x_new[k] = x[k] + step * dir[k];
      box.clamp(x_new);
      f_new = eval(x_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    if (!gradient(x_new, g_new)) break;
    double sy = 0.0;
    double yy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = x_new[k] - x[k];
      y[k] = g_new[k] - g[k];
      sy += s[k] * y[k];
      yy += y[k] * y[k];
    }
    const double improvement = fx - f_new;
    x = x_new;
    fx = f_new;
    g = g_new;
    if (sy > 1e-300) {
      if (!scaled) {
        for (std::size_t k = 0; k < n; ++k) H[k * n + k] = sy / yy;
        scaled = true;
      }
      std::vector<double> Hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) Hy[i] += H[i * n + k] * y[k];
      }
      double yHy = 0.0;
      for (std::size_t k = 0; k < n; ++k) yHy += y[k] * Hy[k];
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
          H[i * n + k] += (1.0 + yHy * rho) * rho * s[i] * s[k] - rho * (Hy[i] * s[k] + s[i] * Hy[k]);
        }
      }
    }
    if (improvement < 1e-12 * std::max(1.0, std::abs(fx))) {
      res.converged = true;
      break;
    }
  }
  if (fx < res.value) {
    res.x = x;
    res.value = fx;
  }
  return res;
}

}  // namespace ida::opt
