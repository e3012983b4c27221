#include "ida/backtest.hpp"

#include "ida/rng.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace ida::backtest {

namespace fs = std::filesystem;
using ingest::Date;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes through a temporary so an interrupted run never leaves a truncated file.
void write_file_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

std::int64_t day_number(const Date& d) {
  return std::chrono::sys_days(d).time_since_epoch().count();
}

// Identifies the inputs a fit depends on; a persisted fit is reused only
// when this matches.
std::string fit_fingerprint(const RunConfig& c, const tv::ModelSpec& spec, int product,
                            const std::vector<Date>& window,
                            const ingest::InterArrivalSample& sample) {
  std::uint64_t h = hash_string(spec.name());
  auto add = [&](std::uint64_t v) { h = mix64(h ^ v); };
  add(static_cast<std::uint64_t>(product));
  for (const auto& d : window) add(static_cast<std::uint64_t>(day_number(d)));
  add(std::bit_cast<std::uint64_t>(c.window_start));
  add(std::bit_cast<std::uint64_t>(c.window_end));
  add(static_cast<std::uint64_t>(c.fit.max_evaluations));
  add(static_cast<std::uint64_t>(c.fit.restarts));
  add(std::bit_cast<std::uint64_t>(c.fit.f_tol));
  add(std::bit_cast<std::uint64_t>(c.fit.x_tol));
  add(c.fit.polish ? 1 : 0);
  add(std::bit_cast<std::uint64_t>(c.fit.min_obs_per_param));
  add(static_cast<std::uint64_t>(c.fit.param_time));
  add(c.seed);
  add(sample.size());
  for (const auto& s : sample.spells) {
    add(std::bit_cast<std::uint64_t>(s.x));
    add(std::bit_cast<std::uint64_t>(s.t));
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Task {
  std::size_t day_index;
  int product;
};

struct TaskOutput {
  std::vector<CellResult> cells;
  std::size_t fits_performed = 0;
  std::size_t fits_resumed = 0;
  std::size_t fallbacks = 0;
};

TaskOutput run_task(const RunConfig& config, const ingest::ArrivalStore& store,
                    const ForecastDay& fd, int product, const std::vector<tv::ModelSpec>& specs,
                    const std::vector<double>& taus) {
  TaskOutput out;
  const std::string date = ingest::format_date(fd.day);
  auto missing_all = [&](const std::string& reason) {
    for (const auto& spec : specs) {
      CellResult r{{spec.name(), product, fd.day}, std::nullopt, reason};
      write_cell_score(cell_dir(config, r.key) / "score.json", r);
      out.cells.push_back(std::move(r));
    }
  };

  const ingest::ArrivalSeries* observed = store.find(fd.day, product);
  if (!observed) {
    spdlog::warn("{} product {}: no observed series; cell missing", date, product);
    missing_all("no observed series");
    return out;
  }

  ingest::InterArrivalSample sample;
  for (const auto& d : fd.window) {
    if (const auto* s = store.find(d, product)) {
      sample.append(ingest::slice_window(*s, config.window_start));
    }
  }

  const fit::FitWindow window{config.window_start, config.window_end};
  fit::CascadeFitter fitter(sample, window, config.fit);
  std::vector<std::string> fingerprints;
  for (const auto& spec : specs) {
    const std::string fp = fit_fingerprint(config, spec, product, fd.window, sample);
    fingerprints.push_back(fp);
    if (!config.resume) continue;
    const fs::path path = cell_dir(config, {spec.name(), product, fd.day}) / "fit.json";
    if (!fs::exists(path)) continue;
    try {
      auto m = fit::fitted_model_from_json(read_file(path));
      if (m.fingerprint == fp && m.spec == spec) {
        fitter.preload(std::move(m));
        ++out.fits_resumed;
      }
    } catch (const std::exception& e) {
      spdlog::warn("ignoring unreadable {}: {}", path.string(), e.what());
    }
  }

  const score::MinuteGrid grid{config.window_start, config.window_end};
  const double anchor =
      sim::choose_anchor(observed->arrivals, config.window_start, config.anchor_rule);

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& spec = specs[i];
    CellResult result{{spec.name(), product, fd.day}, std::nullopt, "ok"};
    const fs::path dir = cell_dir(config, result.key);
    try {
      const bool resumed = fitter.has(spec);
      const fit::FittedModel& model = fitter.get(spec);
      if (!resumed) {
        ++out.fits_performed;
        fit::FittedModel copy = model;
        copy.fingerprint = fingerprints[i];
        write_file_atomic(dir / "fit.json", fit::to_json(copy));
      }
      if (model.diagnostics.fallback) {
        result.status = "fallback:" + model.diagnostics.donor;
        ++out.fallbacks;
      }
      const std::uint64_t seed = derive_seed(
          config.seed, {hash_string(spec.name()), static_cast<std::uint64_t>(day_number(fd.day)),
                        static_cast<std::uint64_t>(product)});
      const auto set = sim::simulate_set(model, anchor, config.window_start, config.window_end,
                                         static_cast<std::size_t>(config.trajectories), seed);
      if (config.dump_trajectories) {
        fs::create_directories(dir);
        sim::write_trajectories_csv(dir / "trajectories.csv", set);
      }
      result.score = score::score_cell(observed->arrivals, set.paths, grid, taus);
    } catch (const std::exception& e) {
      spdlog::warn("{} product {} {}: cell missing ({})", date, product, spec.name(), e.what());
      result.score.reset();
      result.status = std::string("failed: ") + e.what();
    }
    write_cell_score(dir / "score.json", result);
    out.cells.push_back(std::move(result));
  }
  return out;
}

}  // namespace

ingest::ArrivalStore load_store(const RunConfig& config, ingest::IngestStats* stats) {
  const auto cal = config.calendar();
  if (config.input.empty()) throw ConfigError("no input configured");
  if (config.input_format == "arrivals") return ingest::ArrivalStore::read_csv(config.input, cal);
  auto schema = config.schema;
  schema.products = config.products;
  auto rows = ingest::parse_csv(config.input, schema);
  const auto resolution = std::chrono::duration_cast<ingest::Micros>(
      std::chrono::duration<double>(config.dejitter_seconds));
  return ingest::ArrivalStore::from_transactions(std::move(rows), cal, resolution, stats);
}

std::vector<ForecastDay> plan_days(const RunConfig& config, const std::vector<Date>& days) {
  std::vector<ForecastDay> plan;
  if (days.empty()) return plan;
  const auto window_days = static_cast<std::size_t>(config.window_days);
  std::chrono::sys_days start;
  if (config.first_forecast_day) {
    start = *config.first_forecast_day;
  } else {
    if (days.size() <= window_days) return plan;
    start = days[window_days];
  }
  const std::chrono::sys_days last = days.back();
  for (int k = 0; k < config.forecast_days; ++k) {
    const std::chrono::sys_days day = start + std::chrono::days{k};
    if (day > last) {
      spdlog::warn("input ends on {}; stopping after {} forecast days",
                   ingest::format_date(Date{last}), k);
      break;
    }
    ForecastDay fd{Date{day}, {}, {}};
    const auto it = std::lower_bound(days.begin(), days.end(), Date{day});
    if (it == days.end() || *it != Date{day}) {
      fd.skip_reason = "no data";
    } else if (static_cast<std::size_t>(it - days.begin()) < window_days) {
      fd.skip_reason = "insufficient history";
    } else {
      fd.window.assign(it - static_cast<std::ptrdiff_t>(window_days), it);
      const auto span = (day - std::chrono::sys_days(fd.window.front())).count();
      if (span > config.window_days + config.max_gap_days) {
        fd.skip_reason = "window spans " + std::to_string(span) + " calendar days";
        fd.window.clear();
      }
    }
    plan.push_back(std::move(fd));
  }
  return plan;
}

fs::path cell_dir(const RunConfig& config, const CellKey& key) {
  return config.output_dir / key.model / std::to_string(key.product) /
         ingest::format_date(key.day);
}

void write_cell_score(const fs::path& path, const CellResult& cell) {
  json j;
  j["model"] = cell.key.model;
  j["product"] = cell.key.product;
  j["date"] = ingest::format_date(cell.key.day);
  j["status"] = cell.status;
  if (cell.score) {
    j["bias"] = cell.score->bias;
    j["mae"] = cell.score->mae;
    j["rmse"] = cell.score->rmse;
    j["pinball"] = cell.score->pinball;
  }
  write_file_atomic(path, j.dump(1) + "\n");
}

CellResult read_cell_score(const fs::path& path) {
  const auto j = json::parse(read_file(path));
  CellResult r;
  r.key.model = j.at("model").get<std::string>();
  r.key.product = j.at("product").get<int>();
  const auto d = ingest::parse_date(j.at("date").get<std::string>());
  if (!d) throw std::runtime_error(path.string() + ": bad date");
  r.key.day = *d;
  r.status = j.at("status").get<std::string>();
  if (j.contains("mae")) {
    score::CellScore s;
    s.bias = j.at("bias").get<double>();
    s.mae = j.at("mae").get<double>();
    s.rmse = j.at("rmse").get<double>();
    s.pinball = j.at("pinball").get<std::vector<double>>();
    r.score = std::move(s);
  }
  return r;
}

RunSummary run(const RunConfig& config) {
  config.validate();
  const auto specs = config.model_specs();
  const auto products = config.selected_products();
  const auto taus = score::tau_grid(config.taus);

  ingest::IngestStats stats;
  const auto store = load_store(config, &stats);
  const auto plan = plan_days(config, store.days());

  RunSummary summary;
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (!plan[i].skip_reason.empty()) {
      spdlog::info("skipping {}: {}", ingest::format_date(plan[i].day), plan[i].skip_reason);
      ++summary.skipped_days;
      continue;
    }
    ++summary.forecast_days;
    spdlog::debug("{}: window {} .. {}", ingest::format_date(plan[i].day),
                  ingest::format_date(plan[i].window.front()),
                  ingest::format_date(plan[i].window.back()));
    for (int s : products) tasks.push_back({i, s});
  }
  fs::create_directories(config.output_dir);
  spdlog::info("{} forecast days, {} products, {} models, {} tasks", summary.forecast_days,
               products.size(), specs.size(), tasks.size());

  // Workers claim tasks by index and write into fixed slots, so the result
  // does not depend on scheduling.
  std::vector<TaskOutput> outputs(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        outputs[i] = run_task(config, store, plan[tasks[i].day_index], tasks[i].product, specs, taus);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = tasks.size();
        return;
      }
    }
  };
  const int n_threads = std::min<int>(config.threads, std::max<int>(1, static_cast<int>(tasks.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  std::vector<CellResult> cells;
  for (auto& o : outputs) {
    summary.fits_performed += o.fits_performed;
    summary.fits_resumed += o.fits_resumed;
    summary.fallbacks += o.fallbacks;
    for (auto& c : o.cells) cells.push_back(std::move(c));
  }

  const Report report = build_report(config, cells);
  summary.cells_scored = report.cells_scored;
  summary.cells_missing = report.cells_missing;
  write_report(report, config.output_dir);
  spdlog::info("scored {} cells, {} missing, {} fits resumed, {} fallbacks", summary.cells_scored,
               summary.cells_missing, summary.fits_resumed, summary.fallbacks);
  return summary;
}

}  // namespace ida::backtest
