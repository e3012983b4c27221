#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ida::score {

/// rho(z) = (eta z^p + (1 - eta) |z|^p) |tau - 1(z < 0)|.
struct LossSpec {
  int eta = 0;  // 0 or 1
  double tau = 0.5;
  double p = 1.0;

  void validate() const;
};

inline constexpr LossSpec kMeanLoss{0, 0.5, 2.0};
inline constexpr LossSpec kMedianLoss{0, 0.5, 1.0};

double rho(const LossSpec& loss, double z);

class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Left endpoints t_j = t1 + j / 60, j = 0..J-1, with J = 60 (t2 - t1).
struct MinuteGrid {
  double t1 = -3.25;
  double t2 = -0.5;

  std::size_t size() const;
  double at(std::size_t j) const { return t1 + static_cast<double>(j) / 60.0; }
  static constexpr double kStep = 1.0 / 60.0;

  friend bool operator==(const MinuteGrid&, const MinuteGrid&) = default;
};

/// Counting path sampled on the grid.
using GridPath = std::vector<double>;

/// N(t_j) = #{T in (t1, t_j]} for sorted arrival times.
GridPath counts_on_grid(std::span<const double> arrivals, const MinuteGrid& grid);

/// Simulated counting paths, stored per grid point in sorted order so every
/// quantile is a lookup.
class SimulatedCounts {
 public:
  SimulatedCounts(std::span<const std::vector<double>> trajectories, const MinuteGrid& grid);

  const MinuteGrid& grid() const noexcept { return grid_; }
  std::size_t paths() const noexcept { return m_; }
  /// Sorted counts at grid point j.
  std::span<const double> column(std::size_t j) const;

 private:
  MinuteGrid grid_;
  std::size_t m_;
  std::vector<double> sorted_;  // J blocks of M
};

/// Pointwise argmin over z of sum_m rho(N_m(t_j) - z). Supported losses are
/// (eta, 0.5, 2) giving the mean and (0, tau, 1) giving the smallest
/// minimizer, the order statistic of rank ceil(tau M). Others throw ContractError.
GridPath argmin_process(const SimulatedCounts& sims, const LossSpec& loss);

/// (sum_j rho(N(t_j) - Nhat(t_j)) / 60)^(1/p). For eta = 1 and p = 1 the sign
/// of the integral is kept.
double eval_functional(std::span<const double> observed, std::span<const double> estimate,
                       const LossSpec& loss);

/// Quantile levels k / (R + 1), k = 1..R.
std::vector<double> tau_grid(std::size_t r = 99);

/// Criteria of one (day, product) cell for one model.
struct CellScore {
  double bias = 0.0;  // 2 EVAL((1,.5,1), mean)
  double mae = 0.0;   // 2 EVAL((0,.5,1), median)
  double rmse = 0.0;  // 2 EVAL((0,.5,2), mean)
  std::vector<double> pinball;  // EVAL((0,tau,1), tau-quantile) per tau

  /// Mean pinball over the tau grid; the per-cell loss L_{d,s}.
  double crps() const;
};

CellScore score_cell(std::span<const double> observed_arrivals,
                     std::span<const std::vector<double>> trajectories, const MinuteGrid& grid,
                     std::span<const double> taus);

/// As above, for an observed path already sampled on the simulations' grid.
CellScore score_cell(std::span<const double> observed, const SimulatedCounts& sims,
                     std::span<const double> taus);

/// Day averages of the cell criteria for one product.
struct ProductCriteria {
  double bias = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double crps = 0.0;
  std::vector<double> pinball;
  std::size_t days = 0;
};

ProductCriteria average_cells(std::span<const CellScore* const> cells, std::size_t taus);

/// Unweighted mean over products (products without cells are skipped).
ProductCriteria average_products(std::span<const ProductCriteria> products);

struct DmResult {
  double statistic = 0.0;
  double p_h0 = 0.0;   // H0: E(Delta) <= 0, i.e. A is not worse than B
  double p_h0r = 0.0;  // H0: E(Delta) >= 0
  std::size_t days = 0;
};

class DegenerateSeriesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Diebold-Mariano test on Delta_d = ||L^A_d||_q - ||L^B_d||_q, where each
/// L_d is the vector of per-product losses on day d. `lag` > 0 replaces the
/// sample variance by a Bartlett long-run variance. Requires >= min_days days.
DmResult dm_test(std::span<const std::vector<double>> loss_a,
                 std::span<const std::vector<double>> loss_b, int q, int lag = 0,
                 std::size_t min_days = 30);

double lq_norm(std::span<const double> v, int q);

}  // namespace ida::score
