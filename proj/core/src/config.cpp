#include "ida/backtest.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace ida::backtest {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  const std::set<std::string_view> allowed(known);
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key '" + std::string(where.empty() ? "" : where) +
                        (where.empty() ? "" : ".") + key + "'");
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
}

json to_json_object(const RunConfig& c) {
  json j;
  j["input"] = c.input.string();
  j["input_format"] = c.input_format;
  j["csv"] = {{"delimiter", std::string(1, c.schema.delimiter)},
              {"delivery_date", c.schema.delivery_date},
              {"product", c.schema.product},
              {"timestamp", c.schema.timestamp},
              {"volume", c.schema.volume},
              {"price", c.schema.price},
              {"market_area", c.schema.market_area},
              {"transaction_id", c.schema.transaction_id}};
  j["output_dir"] = c.output_dir.string();
  j["timezone"] = c.timezone;
  j["products"] = c.products;
  j["trading_begin"] = c.trading_begin;
  j["trading_end"] = c.trading_end;
  j["product_subset"] = c.product_subset;
  j["window"] = {{"start", c.window_start}, {"end", c.window_end}};
  j["window_days"] = c.window_days;
  j["forecast_days"] = c.forecast_days;
  j["trajectories"] = c.trajectories;
  j["first_forecast_day"] =
      c.first_forecast_day ? json(ingest::format_date(*c.first_forecast_day)) : json(nullptr);
  j["models"] = c.models;
  j["taus"] = c.taus;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["max_gap_days"] = c.max_gap_days;
  j["dejitter_seconds"] = c.dejitter_seconds;
  j["anchor_rule"] = std::string(sim::anchor_rule_name(c.anchor_rule));
  j["fit"] = {{"max_evaluations", c.fit.max_evaluations},
              {"restarts", c.fit.restarts},
              {"f_tol", c.fit.f_tol},
              {"x_tol", c.fit.x_tol},
              {"polish", c.fit.polish},
              {"min_obs_per_param", c.fit.min_obs_per_param},
              {"param_time", std::string(fit::param_time_name(c.fit.param_time))}};
  j["dm"] = {{"lag", c.dm_lag}, {"min_days", c.dm_min_days}};
  j["dump_trajectories"] = c.dump_trajectories;
  j["resume"] = c.resume;
  return j;
}

RunConfig from_json_object(const json& j) {
  reject_unknown(j,
                 {"input", "input_format", "csv", "output_dir", "timezone", "products",
                  "trading_begin", "trading_end", "product_subset", "window", "window_days",
                  "forecast_days", "trajectories", "first_forecast_day", "models", "taus", "seed",
                  "threads", "max_gap_days", "dejitter_seconds", "anchor_rule", "fit", "dm",
                  "dump_trajectories", "resume"},
                 "");
  RunConfig c;
  std::string s;
  if (j.contains("input")) {
    read(j, "input", s);
    c.input = s;
  }
  read(j, "input_format", c.input_format);
  if (auto it = j.find("csv"); it != j.end()) {
    reject_unknown(*it,
                   {"delimiter", "delivery_date", "product", "timestamp", "volume", "price",
                    "market_area", "transaction_id"},
                   "csv");
    std::string delim(1, c.schema.delimiter);
    read(*it, "delimiter", delim);
    if (delim == "\\t" || delim == "tab") delim = "\t";
    if (delim.size() != 1) throw ConfigError("csv.delimiter must be a single character");
    c.schema.delimiter = delim[0];
    read(*it, "delivery_date", c.schema.delivery_date);
    read(*it, "product", c.schema.product);
    read(*it, "timestamp", c.schema.timestamp);
    read(*it, "volume", c.schema.volume);
    read(*it, "price", c.schema.price);
    read(*it, "market_area", c.schema.market_area);
    read(*it, "transaction_id", c.schema.transaction_id);
  }
  if (j.contains("output_dir")) {
    read(j, "output_dir", s);
    c.output_dir = s;
  }
  read(j, "timezone", c.timezone);
  read(j, "products", c.products);
  c.schema.products = c.products;
  read(j, "trading_begin", c.trading_begin);
  read(j, "trading_end", c.trading_end);
  read(j, "product_subset", c.product_subset);
  if (auto it = j.find("window"); it != j.end()) {
    reject_unknown(*it, {"start", "end"}, "window");
    read(*it, "start", c.window_start);
    read(*it, "end", c.window_end);
  }
  read(j, "window_days", c.window_days);
  read(j, "forecast_days", c.forecast_days);
  read(j, "trajectories", c.trajectories);
  if (auto it = j.find("first_forecast_day"); it != j.end() && !it->is_null()) {
    const auto d = ingest::parse_date(it->get<std::string>());
    if (!d) throw ConfigError("first_forecast_day is not a date");
    c.first_forecast_day = *d;
  }
  read(j, "models", c.models);
  read(j, "taus", c.taus);
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  read(j, "max_gap_days", c.max_gap_days);
  read(j, "dejitter_seconds", c.dejitter_seconds);
  if (j.contains("anchor_rule")) {
    read(j, "anchor_rule", s);
    c.anchor_rule = sim::parse_anchor_rule(s);
  }
  if (auto it = j.find("fit"); it != j.end()) {
    reject_unknown(*it,
                   {"max_evaluations", "restarts", "f_tol", "x_tol", "polish",
                    "min_obs_per_param", "param_time"},
                   "fit");
    read(*it, "max_evaluations", c.fit.max_evaluations);
    read(*it, "restarts", c.fit.restarts);
    read(*it, "f_tol", c.fit.f_tol);
    read(*it, "x_tol", c.fit.x_tol);
    read(*it, "polish", c.fit.polish);
    read(*it, "min_obs_per_param", c.fit.min_obs_per_param);
    if (it->contains("param_time")) {
      read(*it, "param_time", s);
      c.fit.param_time = fit::parse_param_time(s);
    }
  }
  if (auto it = j.find("dm"); it != j.end()) {
    reject_unknown(*it, {"lag", "min_days"}, "dm");
    read(*it, "lag", c.dm_lag);
    read(*it, "min_days", c.dm_min_days);
  }
  read(j, "dump_trajectories", c.dump_trajectories);
  read(j, "resume", c.resume);
  c.fit.seed = c.seed;
  return c;
}

}  // namespace

RunConfig RunConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json_object(j);
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string RunConfig::to_json() const { return to_json_object(*this).dump(2); }

RunConfig RunConfig::with_overrides(const std::vector<std::string>& overrides) const {
  json j = to_json_object(*this);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + o + "' is not of the form key=value");
    }
    const std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &j;
    std::size_t start = 0;
    for (;;) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return from_json_object(j);
}

void RunConfig::validate() const {
  if (input_format != "arrivals" && input_format != "transactions") {
    throw ConfigError("input_format must be arrivals or transactions");
  }
  if (window_days < 1) throw ConfigError("window_days must be >= 1");
  if (forecast_days < 1) throw ConfigError("forecast_days must be >= 1");
  if (trajectories < 1) throw ConfigError("trajectories must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (taus < 1) throw ConfigError("taus must be >= 1");
  if (max_gap_days < 0) throw ConfigError("max_gap_days must be >= 0");
  if (!(dejitter_seconds >= 0)) throw ConfigError("dejitter_seconds must be >= 0");
  if (dm_lag < 0) throw ConfigError("dm.lag must be >= 0");
  if (!(window_start < window_end)) throw ConfigError("window.start must precede window.end");
  (void)score::MinuteGrid{window_start, window_end}.size();
  const auto cal = calendar();
  for (int s : selected_products()) {
    if (!(cal.trading_begin(s) < window_start && window_end <= cal.trading_end(s))) {
      throw ConfigError("window must lie inside the trading period of product " +
                        std::to_string(s));
    }
  }
  (void)model_specs();
}

ingest::MarketCalendar RunConfig::calendar() const {
  if (products < 1) throw ConfigError("products must be >= 1");
  auto zone = ingest::TimeZone::parse(timezone);
  std::vector<double> b = trading_begin;
  std::vector<double> e = trading_end;
  if (b.empty()) {
    for (int s = 1; s <= products; ++s) b.push_back(-8.0 - s);
  }
  if (e.empty()) e.assign(static_cast<std::size_t>(products), -0.5);
  if (b.size() != static_cast<std::size_t>(products) ||
      e.size() != static_cast<std::size_t>(products)) {
    throw ConfigError("trading_begin/trading_end need one value per product");
  }
  const int minutes = 24 * 60 / products;
  return ingest::MarketCalendar(products, zone, b, e, minutes);
}

std::vector<tv::ModelSpec> RunConfig::model_specs() const {
  if (models.empty()) return tv::enumerate_models();
  std::vector<tv::ModelSpec> out;
  std::set<std::string> seen;
  for (const auto& m : models) {
    tv::ModelSpec spec = tv::ModelSpec::parse(m);
    if (!seen.insert(spec.name()).second) throw ConfigError("model listed twice: " + m);
    out.push_back(spec);
  }
  return out;
}

std::vector<int> RunConfig::selected_products() const {
  std::vector<int> out;
  if (product_subset.empty()) {
    for (int s = 1; s <= products; ++s) out.push_back(s);
    return out;
  }
  std::set<int> seen;
  for (int s : product_subset) {
    if (s < 1 || s > products) throw ConfigError("product " + std::to_string(s) + " out of range");
    if (seen.insert(s).second) out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ida::backtest
