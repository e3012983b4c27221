#pragma once

#include "ida/fit.hpp"
#include "ida/ingest.hpp"
#include "ida/score.hpp"
#include "ida/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ida::backtest {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Declarative description of a rolling-window study.
struct RunConfig {
  std::filesystem::path input;
  std::string input_format = "arrivals";  // "arrivals" (ingested store) or "transactions"
  ingest::CsvSchema schema;
  std::filesystem::path output_dir = "out";
  std::string timezone = "UTC";
  int products = 24;
  std::vector<double> trading_begin;  // per product; empty means -8 - s
  std::vector<double> trading_end;    // per product; empty means -0.5
  std::vector<int> product_subset;    // empty means every product
  double window_start = -3.25;
  double window_end = -0.5;
  int window_days = 28;
  int forecast_days = 365;
  int trajectories = 1000;
  std::optional<ingest::Date> first_forecast_day;
  std::vector<std::string> models;  // empty means all 37
  std::size_t taus = 99;
  std::uint64_t seed = 1;
  int threads = 1;
  int max_gap_days = 7;
  double dejitter_seconds = 60.0;
  sim::AnchorRule anchor_rule = sim::AnchorRule::LastArrival;
  fit::FitOptions fit;
  int dm_lag = 0;
  std::size_t dm_min_days = 30;
  bool dump_trajectories = false;
  bool resume = true;

  /// Unknown keys are rejected.
  static RunConfig from_json(std::string_view text);
  static RunConfig from_file(const std::filesystem::path& path);
  std::string to_json() const;

  /// Applies "key=value" overrides (dotted keys reach nested objects, e.g.
  /// "fit.restarts=1"); values are parsed as JSON when possible, else taken
  /// as strings.
  RunConfig with_overrides(const std::vector<std::string>& overrides) const;

  void validate() const;
  ingest::MarketCalendar calendar() const;
  std::vector<tv::ModelSpec> model_specs() const;
  std::vector<int> selected_products() const;
};

/// Reads the configured input as an arrival store.
ingest::ArrivalStore load_store(const RunConfig& config, ingest::IngestStats* stats = nullptr);

struct CellKey {
  std::string model;
  int product = 0;
  ingest::Date day;
};

struct CellResult {
  CellKey key;
  std::optional<score::CellScore> score;
  std::string status;  // "ok", "fallback", or the reason the cell is missing
};

/// Aggregated criteria and DM matrices.
struct Report {
  std::vector<std::string> models;
  std::vector<int> products;
  std::vector<double> taus;
  std::map<std::string, score::ProductCriteria> overall;
  std::map<std::string, std::map<int, score::ProductCriteria>> by_product;
  // dm[q][a][b]: p-value of H0 that model a is not worse than model b
  // (empty when the test is undefined).
  std::map<int, std::map<std::string, std::map<std::string, std::optional<double>>>> dm;
  std::size_t cells_scored = 0;
  std::size_t cells_missing = 0;
};

struct RunSummary {
  std::size_t forecast_days = 0;
  std::size_t skipped_days = 0;
  std::size_t fits_performed = 0;
  std::size_t fits_resumed = 0;
  std::size_t fallbacks = 0;
  std::size_t cells_scored = 0;
  std::size_t cells_missing = 0;
};

struct ForecastDay {
  ingest::Date day;
  std::vector<ingest::Date> window;  // empty when skipped
  std::string skip_reason;
};

/// Out-of-sample days and their estimation windows: up to forecast_days
/// calendar days from the first day with enough history, each using the
/// window_days most recent earlier days with data.
std::vector<ForecastDay> plan_days(const RunConfig& config, const std::vector<ingest::Date>& days);

/// Runs the study, writing per-cell artifacts under
/// {output_dir}/{model}/{product}/{date}/ and the report CSVs at the top level.
RunSummary run(const RunConfig& config);

/// Rebuilds the report from persisted cell scores of every configured model
/// and product (e.g. after merging runs over disjoint product sets).
Report collect_report(const RunConfig& config);
Report build_report(const RunConfig& config, const std::vector<CellResult>& cells);
void write_report(const Report& report, const std::filesystem::path& dir);

std::filesystem::path cell_dir(const RunConfig& config, const CellKey& key);
void write_cell_score(const std::filesystem::path& path, const CellResult& cell);
CellResult read_cell_score(const std::filesystem::path& path);

/// Synthetic transactions from a known model: for each day and product,
/// arrivals start from the trading begin b(s) (parameters clamped into the
/// modeling window) and run to the trading end. The last arrival before the
/// window start and every arrival inside [window_start, trading end) are
/// written as CSV rows (delivery_date, product, timestamp, transaction_id).
struct SynthOptions {
  tv::ModelSpec spec;
  std::vector<double> theta;
  int days = 28;
  ingest::Date first_day{std::chrono::year{2024}, std::chrono::month{1}, std::chrono::day{1}};
  std::vector<int> products{1};
  std::uint64_t seed = 1;
  double window_start = -3.25;
  double window_end = -0.5;
};

/// Returns the number of rows written.
std::size_t synth_generate(const SynthOptions& options, const ingest::MarketCalendar& calendar,
                           const std::filesystem::path& csv_path);

}  // namespace ida::backtest
