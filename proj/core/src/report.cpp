#include "ida/backtest.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <tuple>

namespace ida::backtest {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::optional<std::size_t> median_tau_index(const std::vector<double>& taus) {
  for (std::size_t k = 0; k < taus.size(); ++k) {
    if (std::abs(taus[k] - 0.5) < 1e-12) return k;
  }
  return std::nullopt;
}

void write_criteria(std::ostream& out, const score::ProductCriteria& c,
                    std::optional<std::size_t> k50) {
  if (c.days == 0) {
    out << "NA,NA,NA,NA,NA," << c.days;
    return;
  }
  out << num(c.bias) << ',' << num(c.mae) << ',' << num(c.rmse) << ',' << num(c.crps) << ','
      << (k50 ? num(c.pinball[*k50]) : "NA") << ',' << c.days;
}

std::ofstream open(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

Report build_report(const RunConfig& config, const std::vector<CellResult>& cells_in) {
  Report r;
  for (const auto& s : config.model_specs()) r.models.push_back(s.name());
  r.products = config.selected_products();
  r.taus = score::tau_grid(config.taus);
  const std::set<std::string> model_set(r.models.begin(), r.models.end());
  const std::set<int> product_set(r.products.begin(), r.products.end());

  // Fixed summation order: model, product, day.
  std::vector<const CellResult*> cells;
  for (const auto& c : cells_in) {
    if (model_set.count(c.key.model) && product_set.count(c.key.product)) cells.push_back(&c);
  }
  std::sort(cells.begin(), cells.end(), [](const CellResult* a, const CellResult* b) {
    return std::tie(a->key.model, a->key.product, a->key.day) <
           std::tie(b->key.model, b->key.product, b->key.day);
  });

  // model -> day -> product -> crps
  std::map<std::string, std::map<ingest::Date, std::map<int, double>>> losses;
  for (const auto& model : r.models) {
    std::vector<score::ProductCriteria> per_product;
    for (int s : r.products) {
      std::vector<const score::CellScore*> scored;
      for (const auto* c : cells) {
        if (c->key.model != model || c->key.product != s) continue;
        if (!c->score) {
          ++r.cells_missing;
          continue;
        }
        if (c->score->pinball.size() != r.taus.size()) {
          throw std::runtime_error("cell score for " + model + " has " +
                                   std::to_string(c->score->pinball.size()) +
                                   " quantile levels, expected " + std::to_string(r.taus.size()));
        }
        scored.push_back(&*c->score);
        losses[model][c->key.day][s] = c->score->crps();
      }
      r.cells_scored += scored.size();
      auto crit = score::average_cells(scored, r.taus.size());
      r.by_product[model][s] = crit;
      per_product.push_back(std::move(crit));
    }
    r.overall[model] = score::average_products(per_product);
  }

  for (int q : {1, 2}) {
    auto& matrix = r.dm[q];
    for (const auto& a : r.models) {
      for (const auto& b : r.models) {
        if (a == b) {
          matrix[a][b] = std::nullopt;
          continue;
        }
        std::vector<std::vector<double>> la;
        std::vector<std::vector<double>> lb;
        for (const auto& [day, pa] : losses[a]) {
          const auto it = losses[b].find(day);
          if (it == losses[b].end()) continue;
          if (pa.size() != r.products.size() || it->second.size() != r.products.size()) continue;
          std::vector<double> va;
          std::vector<double> vb;
          for (int s : r.products) {
            va.push_back(pa.at(s));
            vb.push_back(it->second.at(s));
          }
          la.push_back(std::move(va));
          lb.push_back(std::move(vb));
        }
        try {
          matrix[a][b] = score::dm_test(la, lb, q, config.dm_lag, config.dm_min_days).p_h0;
        } catch (const std::exception& e) {
          spdlog::debug("DM {} vs {} (q={}): {}", a, b, q, e.what());
          matrix[a][b] = std::nullopt;
        }
      }
    }
  }
  return r;
}

Report collect_report(const RunConfig& config) {
  std::vector<CellResult> cells;
  const auto products = config.selected_products();
  for (const auto& spec : config.model_specs()) {
    for (int s : products) {
      const fs::path dir = config.output_dir / spec.name() / std::to_string(s);
      if (!fs::is_directory(dir)) continue;
      std::vector<fs::path> days;
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "score.json")) {
          days.push_back(entry.path());
        }
      }
      std::sort(days.begin(), days.end());
      for (const auto& d : days) cells.push_back(read_cell_score(d / "score.json"));
    }
  }
  return build_report(config, cells);
}

void write_report(const Report& r, const fs::path& dir) {
  fs::create_directories(dir);
  const auto k50 = median_tau_index(r.taus);
  {
    auto out = open(dir / "summary.csv");
    out << "model,bias,mae,rmse,crps,pb_0.50,cells\n";
    for (const auto& m : r.models) {
      out << m << ',';
      write_criteria(out, r.overall.at(m), k50);
      out << '\n';
    }
  }
  {
    auto out = open(dir / "criteria_by_product.csv");
    out << "model,product,bias,mae,rmse,crps,pb_0.50,days\n";
    for (const auto& m : r.models) {
      for (int s : r.products) {
        out << m << ',' << s << ',';
        write_criteria(out, r.by_product.at(m).at(s), k50);
        out << '\n';
      }
    }
  }
  {
    auto out = open(dir / "pinball_by_tau.csv");
    out << "model,tau,pinball\n";
    for (const auto& m : r.models) {
      const auto& c = r.overall.at(m);
      for (std::size_t k = 0; k < r.taus.size(); ++k) {
        out << m << ',' << num(r.taus[k]) << ',' << (c.days == 0 ? "NA" : num(c.pinball[k]))
            << '\n';
      }
    }
  }
  for (const auto& [q, matrix] : r.dm) {
    auto out = open(dir / ("dm_pvalues_q" + std::to_string(q) + ".csv"));
    out << "model";
    for (const auto& m : r.models) out << ',' << m;
    out << '\n';
    for (const auto& a : r.models) {
      out << a;
      for (const auto& b : r.models) {
        const auto& v = matrix.at(a).at(b);
        out << ',' << (v ? num(*v) : "NA");
      }
      out << '\n';
    }
  }
}

}  // namespace ida::backtest
