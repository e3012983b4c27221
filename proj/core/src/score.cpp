#include "ida/score.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ida::score {

void LossSpec::validate() const {
  if (eta != 0 && eta != 1) throw ContractError("eta must be 0 or 1");
  if (!(tau > 0.0 && tau < 1.0)) throw ContractError("tau must lie in (0, 1)");
  if (!(p >= 1.0)) throw ContractError("p must be >= 1");
}

double rho(const LossSpec& loss, double z) {
  const double weight = std::abs(loss.tau - (z < 0.0 ? 1.0 : 0.0));
  const double az = std::abs(z);
  const double mag = loss.p == 1.0 ? az : std::pow(az, loss.p);
  if (loss.eta == 1) {
    // eta z^p: odd integer powers keep the sign of z.
    const double signed_pow = loss.p == 1.0 ? z : std::pow(z, loss.p);
    return signed_pow * weight;
  }
  return mag * weight;
}

std::size_t MinuteGrid::size() const {
  const double minutes = 60.0 * (t2 - t1);
  const double j = std::round(minutes);
  if (!(t2 > t1) || std::abs(minutes - j) > 1e-6) {
    throw ContractError("grid range must be a positive whole number of minutes");
  }
  return static_cast<std::size_t>(j);
}

GridPath counts_on_grid(std::span<const double> arrivals, const MinuteGrid& grid) {
  const std::size_t n = grid.size();
  GridPath out(n);
  auto it = std::upper_bound(arrivals.begin(), arrivals.end(), grid.t1);
  std::size_t count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double t = grid.at(j);
    while (it != arrivals.end() && *it <= t) {
      ++it;
      ++count;
    }
    out[j] = static_cast<double>(count);
  }
  return out;
}

SimulatedCounts::SimulatedCounts(std::span<const std::vector<double>> trajectories,
                                 const MinuteGrid& grid)
    : grid_(grid), m_(trajectories.size()) {
  if (m_ == 0) throw ContractError("at least one trajectory is required");
  const std::size_t n = grid.size();
  sorted_.resize(n * m_);
  for (std::size_t m = 0; m < m_; ++m) {
    const GridPath path = counts_on_grid(trajectories[m], grid);
    for (std::size_t j = 0; j < n; ++j) sorted_[j * m_ + m] = path[j];
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::sort(sorted_.begin() + static_cast<std::ptrdiff_t>(j * m_),
              sorted_.begin() + static_cast<std::ptrdiff_t>((j + 1) * m_));
  }
}

std::span<const double> SimulatedCounts::column(std::size_t j) const {
  return std::span<const double>(sorted_).subspan(j * m_, m_);
}

namespace {

// 0-based index of the smallest pinball minimizer in a sorted sample of size m.
std::size_t lower_quantile_index(double tau, std::size_t m) {
  // tau m is compared with a small tolerance so that e.g. 0.07 * 100 counts
  // as the integer 7.
  const double k = std::ceil(tau * static_cast<double>(m) - 1e-9);
  const auto rank = static_cast<std::size_t>(std::max(1.0, k));
  return std::min(rank, m) - 1;
}

}  // namespace

GridPath argmin_process(const SimulatedCounts& sims, const LossSpec& loss) {
  loss.validate();
  const std::size_t n = sims.grid().size();
  GridPath out(n);
  if (loss.p == 2.0 && loss.tau == 0.5) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto col = sims.column(j);
      out[j] = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
    }
    return out;
  }
  if (loss.p == 1.0 && loss.eta == 0) {
    const std::size_t idx = lower_quantile_index(loss.tau, sims.paths());
    for (std::size_t j = 0; j < n; ++j) out[j] = sims.column(j)[idx];
    return out;
  }
  throw ContractError("argmin_process supports (eta, 0.5, 2) and (0, tau, 1) only");
}

double eval_functional(std::span<const double> observed, std::span<const double> estimate,
                       const LossSpec& loss) {
  loss.validate();
  if (observed.size() != estimate.size()) throw ContractError("paths are on different grids");
  double sum = 0.0;
  for (std::size_t j = 0; j < observed.size(); ++j) sum += rho(loss, observed[j] - estimate[j]);
  const double integral = sum * MinuteGrid::kStep;
  if (loss.p == 1.0) return integral;
  return std::pow(integral, 1.0 / loss.p);
}

std::vector<double> tau_grid(std::size_t r) {
  std::vector<double> out(r);
  for (std::size_t k = 0; k < r; ++k) {
    out[k] = static_cast<double>(k + 1) / static_cast<double>(r + 1);
  }
  return out;
}

double CellScore::crps() const {
  if (pinball.empty()) return 0.0;
  return std::accumulate(pinball.begin(), pinball.end(), 0.0) / static_cast<double>(pinball.size());
}

CellScore score_cell(std::span<const double> observed_arrivals,
                     std::span<const std::vector<double>> trajectories, const MinuteGrid& grid,
                     std::span<const double> taus) {
  return score_cell(counts_on_grid(observed_arrivals, grid), SimulatedCounts(trajectories, grid),
                    taus);
}

CellScore score_cell(std::span<const double> observed, const SimulatedCounts& sims,
                     std::span<const double> taus) {
  if (observed.size() != sims.grid().size()) {
    throw ContractError("observed path and simulations use different grids");
  }
  const GridPath mean = argmin_process(sims, kMeanLoss);
  const GridPath median = argmin_process(sims, kMedianLoss);

  CellScore out;
  out.bias = 2.0 * eval_functional(observed, mean, LossSpec{1, 0.5, 1.0});
  out.mae = 2.0 * eval_functional(observed, median, kMedianLoss);
  out.rmse = 2.0 * eval_functional(observed, mean, kMeanLoss);
  out.pinball.reserve(taus.size());
  for (double tau : taus) {
    const LossSpec loss{0, tau, 1.0};
    out.pinball.push_back(eval_functional(observed, argmin_process(sims, loss), loss));
  }
  return out;
}

ProductCriteria average_cells(std::span<const CellScore* const> cells, std::size_t taus) {
  ProductCriteria out;
  out.pinball.assign(taus, 0.0);
  for (const CellScore* c : cells) {
    out.bias += c->bias;
    out.mae += c->mae;
    out.rmse += c->rmse;
    for (std::size_t k = 0; k < taus; ++k) out.pinball[k] += c->pinball.at(k);
  }
  out.days = cells.size();
  if (out.days == 0) return out;
  const double n = static_cast<double>(out.days);
  out.bias /= n;
  out.mae /= n;
  out.rmse /= n;
  for (double& v : out.pinball) v /= n;
  out.crps = taus == 0 ? 0.0
                       : std::accumulate(out.pinball.begin(), out.pinball.end(), 0.0) /
                             static_cast<double>(taus);
  return out;
}

ProductCriteria average_products(std::span<const ProductCriteria> products) {
  ProductCriteria out;
  std::size_t used = 0;
  for (const auto& p : products) {
    if (p.days == 0) continue;
    if (out.pinball.empty()) out.pinball.assign(p.pinball.size(), 0.0);
    out.bias += p.bias;
    out.mae += p.mae;
    out.rmse += p.rmse;
    out.crps += p.crps;
    for (std::size_t k = 0; k < out.pinball.size(); ++k) out.pinball[k] += p.pinball.at(k);
    out.days += p.days;
    ++used;
  }
  if (used == 0) return out;
  const double n = static_cast<double>(used);
  out.bias /= n;
  out.mae /= n;
  out.rmse /= n;
  out.crps /= n;
  for (double& v : out.pinball) v /= n;
  return out;
}

double lq_norm(std::span<const double> v, int q) {
  if (q == 1) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
  }
  if (q == 2) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }
  throw ContractError("norm order must be 1 or 2");
}

DmResult dm_test(std::span<const std::vector<double>> loss_a,
                 std::span<const std::vector<double>> loss_b, int q, int lag,
                 std::size_t min_days) {
  if (loss_a.size() != loss_b.size()) throw ContractError("loss series differ in length");
  const std::size_t n = loss_a.size();
  if (n < min_days || n < 2) {
    throw ContractError("DM test needs at least " + std::to_string(std::max<std::size_t>(min_days, 2)) +
                        " days, got " + std::to_string(n));
  }
  if (lag < 0) throw ContractError("lag must be non-negative");
  std::vector<double> delta(n);
  for (std::size_t d = 0; d < n; ++d) {
    if (loss_a[d].size() != loss_b[d].size()) throw ContractError("loss vectors differ in length");
    delta[d] = lq_norm(loss_a[d], q) - lq_norm(loss_b[d], q);
  }
  const double dn = static_cast<double>(n);
  const double mean = std::accumulate(delta.begin(), delta.end(), 0.0) / dn;
  double ss = 0.0;
  for (double v : delta) ss += (v - mean) * (v - mean);
  double variance = ss / (dn - 1.0);
  if (lag > 0) {
    double lrv = ss / dn;
    for (int k = 1; k <= lag && static_cast<std::size_t>(k) < n; ++k) {
      double g = 0.0;
      for (std::size_t d = static_cast<std::size_t>(k); d < n; ++d) {
        g += (delta[d] - mean) * (delta[d - static_cast<std::size_t>(k)] - mean);
      }
      lrv += 2.0 * (1.0 - static_cast<double>(k) / (lag + 1.0)) * g / dn;
    }
    variance = lrv;
  }
  const double sd = std::sqrt(std::max(variance, 0.0));
  if (!(sd > 1e-14 * std::max(1.0, std::abs(mean)))) {
    throw DegenerateSeriesError("loss differential has zero variance; models are indistinguishable");
  }
  DmResult r;
  r.days = n;
  r.statistic = std::sqrt(dn) * mean / sd;
  r.p_h0 = 0.5 * std::erfc(r.statistic / std::sqrt(2.0));
  r.p_h0r = 0.5 * std::erfc(-r.statistic / std::sqrt(2.0));
  return r;
}

}  // namespace ida::score
