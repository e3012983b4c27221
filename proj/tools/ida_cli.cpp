// Command-line front end: ingest, fit, simulate, score, backtest, synth.

#include "ida/backtest.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ida;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, Common& c, bool required) {
  auto* opt = cmd->add_option("-c,--config", c.config_path, "Run configuration (JSON)");
  if (required) opt->required();
  cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set trajectories=500")
      ->type_name("KEY=VALUE");
}

backtest::RunConfig load_config(const Common& c) {
  backtest::RunConfig cfg;
  if (!c.config_path.empty()) cfg = backtest::RunConfig::from_file(c.config_path);
  return cfg.with_overrides(c.overrides);
}

ingest::Date require_date(const std::string& text) {
  const auto d = ingest::parse_date(text);
  if (!d) throw std::invalid_argument("not a date: " + text);
  return *d;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text << '\n';
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intraday transaction-arrival modeling: fit, simulate and score counting processes"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->capture_default_str();

  // ingest
  Common ingest_c;
  std::string ingest_input, ingest_output;
  auto* ingest_cmd = app.add_subcommand("ingest", "Normalize a transaction CSV into an arrival store");
  add_config_options(ingest_cmd, ingest_c, false);
  ingest_cmd->add_option("-i,--input", ingest_input, "Transaction CSV")->required();
  ingest_cmd->add_option("-o,--output", ingest_output, "Arrival store CSV")->required();

  // fit
  Common fit_c;
  std::string fit_model, fit_date, fit_out;
  int fit_product = 1;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one model on the window preceding a day");
  add_config_options(fit_cmd, fit_c, true);
  fit_cmd->add_option("-m,--model", fit_model, "Model name, e.g. Gamma.Expon.Lin")->required();
  fit_cmd->add_option("-p,--product", fit_product, "Product number")->required();
  fit_cmd->add_option("-d,--date", fit_date, "Forecast day (window ends the day before)")->required();
  fit_cmd->add_option("-o,--output", fit_out, "Fitted model JSON (default stdout)");

  // simulate
  std::string sim_fit, sim_out;
  std::optional<double> sim_anchor, sim_start, sim_end;
  std::size_t sim_m = 1000;
  std::uint64_t sim_seed = 1;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate trajectories from a fitted model");
  sim_cmd->add_option("-f,--fit", sim_fit, "Fitted model JSON")->required();
  sim_cmd->add_option("--start", sim_start, "Horizon start (default: fit window start)");
  sim_cmd->add_option("--end", sim_end, "Horizon end (default: fit window end)");
  sim_cmd->add_option("--anchor", sim_anchor, "Last observed arrival (default: horizon start)");
  sim_cmd->add_option("-M,--trajectories", sim_m, "Number of trajectories")->capture_default_str();
  sim_cmd->add_option("--seed", sim_seed, "Seed")->capture_default_str();
  sim_cmd->add_option("-o,--output", sim_out, "Trajectory CSV")->required();

  // score
  Common score_c;
  std::string score_traj, score_date;
  int score_product = 1;
  std::size_t score_m = 0;
  auto* score_cmd = app.add_subcommand(
      "score", "Rebuild report CSVs from persisted cells, or score one trajectory file");
  add_config_options(score_cmd, score_c, true);
  score_cmd->add_option("-t,--trajectories", score_traj, "Trajectory CSV to score against the data");
  score_cmd->add_option("-d,--date", score_date, "Day of the observed path (with --trajectories)");
  score_cmd->add_option("-p,--product", score_product, "Product (with --trajectories)");
  score_cmd->add_option("-M", score_m, "Trajectory count, if trailing ones are empty");

  // backtest
  Common bt_c;
  auto* bt_cmd = app.add_subcommand("backtest", "Rolling-window fit, simulate and score run");
  add_config_options(bt_cmd, bt_c, true);

  // synth
  Common syn_c;
  std::string syn_model, syn_theta, syn_first = "2024-01-01", syn_products = "1", syn_out;
  int syn_days = 28;
  std::uint64_t syn_seed = 1;
  auto* syn_cmd = app.add_subcommand("synth", "Write synthetic transactions from a known model");
  add_config_options(syn_cmd, syn_c, false);
  syn_cmd->add_option("-m,--model", syn_model, "Generating model")->required();
  syn_cmd->add_option("--theta", syn_theta, "Comma-separated parameter vector")->required();
  syn_cmd->add_option("--days", syn_days, "Number of days")->capture_default_str();
  syn_cmd->add_option("--first-day", syn_first, "First delivery day")->capture_default_str();
  syn_cmd->add_option("--products", syn_products, "Comma-separated products or 'all'")
      ->capture_default_str();
  syn_cmd->add_option("--seed", syn_seed, "Seed")->capture_default_str();
  syn_cmd->add_option("-o,--output", syn_out, "Transaction CSV")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_pattern("[%l] %v");

  try {
    if (*ingest_cmd) {
      auto cfg = load_config(ingest_c);
      cfg.input = ingest_input;
      cfg.input_format = "transactions";
      ingest::IngestStats stats;
      const auto store = backtest::load_store(cfg, &stats);
      store.write_csv(ingest_output);
      spdlog::info("{} rows: {} exact duplicates, {} outside trading, {} on undefined deliveries; "
                   "{} cells over {} days",
                   stats.rows, stats.exact_duplicates, stats.outside_trading,
                   stats.invalid_delivery, store.cell_count(), store.days().size());
    } else if (*fit_cmd) {
      auto cfg = load_config(fit_c);
      cfg.first_forecast_day = require_date(fit_date);
      cfg.forecast_days = 1;
      const auto store = backtest::load_store(cfg);
      const auto plan = backtest::plan_days(cfg, store.days());
      if (plan.empty() || !plan.front().skip_reason.empty()) {
        throw std::runtime_error("no estimation window for " + fit_date +
                                 (plan.empty() ? "" : ": " + plan.front().skip_reason));
      }
      ingest::InterArrivalSample sample;
      for (const auto& d : plan.front().window) {
        if (const auto* s = store.find(d, fit_product)) {
          sample.append(ingest::slice_window(*s, cfg.window_start));
        }
      }
      fit::CascadeFitter fitter(sample, {cfg.window_start, cfg.window_end}, cfg.fit);
      const auto& model = fitter.get(tv::ModelSpec::parse(fit_model));
      write_text(fit_out, fit::to_json(model));
      spdlog::info("{}: log-likelihood {:.6f} on {} inter-arrivals over {} days", model.spec.name(),
                   model.log_likelihood, model.observations, model.days);
    } else if (*sim_cmd) {
      const auto model = fit::fitted_model_from_json(read_text(sim_fit));
      const double start = sim_start.value_or(model.window.start);
      const double end = sim_end.value_or(model.window.end);
      const auto set = sim::simulate_set(model, sim_anchor.value_or(start), start, end, sim_m,
                                         sim_seed);
      sim::write_trajectories_csv(sim_out, set);
    } else if (*score_cmd) {
      const auto cfg = load_config(score_c);
      if (score_traj.empty()) {
        const auto report = backtest::collect_report(cfg);
        backtest::write_report(report, cfg.output_dir);
        spdlog::info("report over {} scored cells ({} missing) written to {}", report.cells_scored,
                     report.cells_missing, cfg.output_dir.string());
      } else {
        if (score_date.empty()) throw std::invalid_argument("--date is required with --trajectories");
        const auto store = backtest::load_store(cfg);
        const auto* observed = store.find(require_date(score_date), score_product);
        if (!observed) throw std::runtime_error("no observed series for that day and product");
        auto paths = sim::read_trajectories_csv(score_traj);
        if (paths.size() < score_m) paths.resize(score_m);
        const auto cell = score::score_cell(observed->arrivals, paths,
                                            {cfg.window_start, cfg.window_end},
                                            score::tau_grid(cfg.taus));
        nlohmann::json j{{"bias", cell.bias},
                         {"mae", cell.mae},
                         {"rmse", cell.rmse},
                         {"crps", cell.crps()},
                         {"trajectories", paths.size()}};
        std::cout << j.dump(2) << '\n';
      }
    } else if (*bt_cmd) {
      const auto cfg = load_config(bt_c);
      const auto summary = backtest::run(cfg);
      spdlog::info("{} forecast days ({} skipped), {} fits, {} resumed", summary.forecast_days,
                   summary.skipped_days, summary.fits_performed, summary.fits_resumed);
    } else if (*syn_cmd) {
      const auto cfg = load_config(syn_c);
      backtest::SynthOptions o{tv::ModelSpec::parse(syn_model), parse_list(syn_theta)};
      o.days = syn_days;
      o.first_day = require_date(syn_first);
      o.seed = syn_seed;
      o.window_start = cfg.window_start;
      o.window_end = cfg.window_end;
      const auto calendar = cfg.calendar();
      o.products.clear();
      if (syn_products == "all") {
        for (int s = 1; s <= calendar.products(); ++s) o.products.push_back(s);
      } else {
        for (double s : parse_list(syn_products)) o.products.push_back(static_cast<int>(s));
      }
      const auto rows = backtest::synth_generate(o, calendar, syn_out);
      spdlog::info("wrote {} transactions to {}", rows, syn_out);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
