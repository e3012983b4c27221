#include "ida/ingest.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ida::ingest {

using namespace std::chrono;

namespace {

// Splits one CSV record; supports double-quoted fields with "" escapes.
std::vector<std::string> split_record(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

bool RawTransaction::same_record(const RawTransaction& o) const {
  return delivery_date == o.delivery_date && product == o.product &&
         market_area == o.market_area && volume == o.volume && price == o.price &&
         transaction_id == o.transaction_id && timestamp == o.timestamp;
}

RowError::RowError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

std::vector<RawTransaction> parse_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  return parse_csv_text(read_file(path), schema);
}

std::vector<RawTransaction> parse_csv_text(std::string_view text, const CsvSchema& schema) {
  std::vector<RawTransaction> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::string> header;
  struct Columns {
    int date = -1, product = -1, timestamp = -1, volume = -1, price = -1, area = -1, id = -1;
  } col;

  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line == "\r") continue;

    auto fields = split_record(line, schema.delimiter);
    if (header.empty()) {
      header = std::move(fields);
      const auto index_of = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
      };
      col.date = index_of(schema.delivery_date);
      col.product = index_of(schema.product);
      col.timestamp = index_of(schema.timestamp);
      col.volume = index_of(schema.volume);
      col.price = index_of(schema.price);
      col.area = index_of(schema.market_area);
      col.id = index_of(schema.transaction_id);
      std::string missing;
      if (col.date < 0) missing += " " + schema.delivery_date;
      if (col.product < 0) missing += " " + schema.product;
      if (col.timestamp < 0) missing += " " + schema.timestamp;
      if (!missing.empty()) throw SchemaError("missing required column(s):" + missing);
      continue;
    }
    if (fields.size() != header.size()) {
      throw RowError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    }

    RawTransaction tx;
    tx.line = line_no;
    const auto date = parse_date(fields[static_cast<std::size_t>(col.date)]);
    if (!date) throw RowError(line_no, "bad delivery date '" + fields[col.date] + "'");
    tx.delivery_date = *date;

    const auto product = parse_double(fields[static_cast<std::size_t>(col.product)]);
    if (!product || *product != static_cast<int>(*product)) {
      throw RowError(line_no, "bad product '" + fields[col.product] + "'");
    }
    tx.product = static_cast<int>(*product);
    if (tx.product < 1 || tx.product > schema.products) {
      throw RowError(line_no, "product " + std::to_string(tx.product) + " outside 1.." +
                                  std::to_string(schema.products));
    }

    const auto ts = parse_timestamp(fields[static_cast<std::size_t>(col.timestamp)]);
    if (!ts) throw RowError(line_no, "bad timestamp '" + fields[col.timestamp] + "'");
    tx.timestamp = *ts;

    const auto optional_number = [&](int c, const char* what) -> std::optional<double> {
      if (c < 0 || fields[static_cast<std::size_t>(c)].empty()) return std::nullopt;
      const auto v = parse_double(fields[static_cast<std::size_t>(c)]);
      if (!v) throw RowError(line_no, std::string("bad ") + what + " '" + fields[c] + "'");
      return v;
    };
    tx.volume = optional_number(col.volume, "volume");
    tx.price = optional_number(col.price, "price");
    if (col.area >= 0) tx.market_area = fields[static_cast<std::size_t>(col.area)];
    if (col.id >= 0) tx.transaction_id = fields[static_cast<std::size_t>(col.id)];
    rows.push_back(std::move(tx));
  }
  if (header.empty()) throw SchemaError("input has no header row");
  return rows;
}

std::vector<LocalTime> dejitter(std::span<const LocalTime> sorted, Micros resolution) {
  std::vector<LocalTime> out;
  out.reserve(sorted.size());
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto k = static_cast<std::int64_t>(j - i);
    Micros width = resolution;
    if (j < sorted.size()) width = std::min(width, sorted[j] - sorted[i]);
    for (std::int64_t m = 0; m < k; ++m) out.push_back(sorted[i] + width * m / k);
    i = j;
  }
  return out;
}

std::vector<LocalTime> dejitter(std::span<const RawTransaction> sorted, Micros resolution) {
  std::vector<LocalTime> times;
  times.reserve(sorted.size());
  for (const auto& tx : sorted) times.push_back(tx.timestamp);
  return dejitter(std::span<const LocalTime>(times), resolution);
}

void InterArrivalSample::append(const InterArrivalSample& other) {
  spells.insert(spells.end(), other.spells.begin(), other.spells.end());
  days += other.days;
}

InterArrivalSample slice_window(const ArrivalSeries& series, double window_start) {
  if (!(series.trading_begin < window_start && window_start < series.trading_end)) {
    throw std::invalid_argument("window start must lie strictly inside the trading period");
  }
  InterArrivalSample sample;
  sample.days = 1;
  const auto& T = series.arrivals;
  const auto first = std::upper_bound(T.begin(), T.end(), window_start);
  for (auto it = first; it != T.end(); ++it) {
    const double prev = it == T.begin() ? series.trading_begin : *(it - 1);
    sample.spells.push_back({*it - prev, prev});
  }
  return sample;
}

ArrivalStore ArrivalStore::from_transactions(std::vector<RawTransaction> transactions,
                                             const MarketCalendar& calendar,
                                             Micros dejitter_resolution, IngestStats* stats) {
  IngestStats local;
  IngestStats& st = stats ? *stats : local;
  st.rows += transactions.size();

  std::stable_sort(transactions.begin(), transactions.end(),
                   [](const RawTransaction& a, const RawTransaction& b) {
                     const sys_days da{a.delivery_date};
                     const sys_days db{b.delivery_date};
                     if (da != db) return da < db;
                     if (a.product != b.product) return a.product < b.product;
                     return a.timestamp < b.timestamp;
                   });

  ArrivalStore store;
  std::set<sys_days> seen_days;
  std::size_t i = 0;
  while (i < transactions.size()) {
    std::size_t j = i;
    while (j < transactions.size() &&
           transactions[j].delivery_date == transactions[i].delivery_date &&
           transactions[j].product == transactions[i].product) {
      ++j;
    }
    const Date day = transactions[i].delivery_date;
    const int product = transactions[i].product;
    seen_days.insert(sys_days{day});

    // Drop rows identical in every field; distinct fills sharing an id stay.
    std::vector<RawTransaction> cell;
    for (std::size_t k = i; k < j; ++k) {
      bool dup = false;
      for (auto it = cell.rbegin(); it != cell.rend() && it->timestamp == transactions[k].timestamp;
           ++it) {
        dup = dup || it->same_record(transactions[k]);
      }
      if (dup) {
        ++st.exact_duplicates;
        spdlog::warn("dropping duplicate row at line {}", transactions[k].line);
      } else {
        cell.push_back(transactions[k]);
      }
    }
    i = j;

    if (!calendar.delivery_start(day, product)) {
      st.invalid_delivery += cell.size();
      spdlog::warn("dropping product {} on {}: delivery start falls on a DST transition", product,
                   format_date(day));
      continue;
    }
    ArrivalSeries series;
    series.day = day;
    series.product = product;
    series.trading_begin = calendar.trading_begin(product);
    series.trading_end = calendar.trading_end(product);
    for (const LocalTime t : dejitter(std::span<const RawTransaction>(cell), dejitter_resolution)) {
      double h = 0.0;
      try {
        h = calendar.to_delivery_relative(t, day, product);
      } catch (const ExcludedFromTradingError&) {
        ++st.outside_trading;
        continue;
      } catch (const InvalidDeliveryError&) {
        ++st.outside_trading;
        continue;
      }
      if (h <= series.trading_begin) {
        ++st.outside_trading;
        continue;
      }
      if (!series.arrivals.empty() && h <= series.arrivals.back()) {
        // Only reachable across a DST fold; keep the series strictly increasing.
        ++st.outside_trading;
        continue;
      }
      series.arrivals.push_back(h);
    }
    store.add(std::move(series));
  }
  if (st.outside_trading > 0) {
    spdlog::warn("{} transactions fell outside their trading period and were dropped",
                 st.outside_trading);
  }

  // Every product on a day with data gets a series, empty if nothing traded.
  for (const sys_days d : seen_days) {
    for (int s = 1; s <= calendar.products(); ++s) {
      if (store.find(Date{d}, s) || !calendar.delivery_start(Date{d}, s)) continue;
      store.add(ArrivalSeries{Date{d}, s, {}, calendar.trading_begin(s), calendar.trading_end(s)});
    }
  }
  return store;
}

void ArrivalStore::add(ArrivalSeries series) {
  Key key{sys_days{series.day}, series.product};
  cells_.insert_or_assign(key, std::move(series));
}

const ArrivalSeries* ArrivalStore::find(const Date& day, int product) const {
  const auto it = cells_.find(Key{sys_days{day}, product});
  return it == cells_.end() ? nullptr : &it->second;
}

std::vector<Date> ArrivalStore::days() const {
  std::vector<Date> out;
  for (const auto& [key, series] : cells_) {
    const Date d{key.first};
    if (out.empty() || out.back() != d) out.push_back(d);
  }
  return out;
}

void ArrivalStore::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "delivery_date,product,arrival_hours\n";
  char buf[64];
  for (const auto& [key, series] : cells_) {
    const std::string day = format_date(series.day);
    // An empty time field records a cell with data on that day but no arrivals.
    if (series.arrivals.empty()) out << day << ',' << series.product << ",\n";
    for (double t : series.arrivals) {
      std::snprintf(buf, sizeof buf, "%.17g", t);
      out << day << ',' << series.product << ',' << buf << '\n';
    }
  }
}

ArrivalStore ArrivalStore::read_csv(const std::filesystem::path& path,
                                    const MarketCalendar& calendar) {
  const std::string text = read_file(path);
  ArrivalStore store;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_record(line, ',');
    if (header) {
      if (fields.size() != 3 || fields[0] != "delivery_date" || fields[1] != "product" ||
          fields[2] != "arrival_hours") {
        throw SchemaError("arrival store header must be delivery_date,product,arrival_hours");
      }
      header = false;
      continue;
    }
    if (fields.size() != 3) throw RowError(line_no, "expected 3 fields");
    const auto day = parse_date(fields[0]);
    const auto product = parse_double(fields[1]);
    const auto t = fields[2].empty() ? std::optional<double>(0.0) : parse_double(fields[2]);
    if (!day || !product || !t) throw RowError(line_no, "malformed arrival record");
    const int s = static_cast<int>(*product);
    if (s < 1 || s > calendar.products()) {
      throw RowError(line_no, "product " + std::to_string(s) + " outside calendar");
    }
    const Key key{sys_days{*day}, s};
    auto it = store.cells_.find(key);
    if (it == store.cells_.end()) {
      it = store.cells_
               .emplace(key, ArrivalSeries{*day, s, {}, calendar.trading_begin(s),
                                           calendar.trading_end(s)})
               .first;
    }
    if (fields[2].empty()) continue;
    auto& arr = it->second.arrivals;
    if (!(*t > it->second.trading_begin && *t < it->second.trading_end) ||
        (!arr.empty() && *t <= arr.back())) {
      throw RowError(line_no, "arrival times must be strictly increasing inside the trading period");
    }
    arr.push_back(*t);
  }
  std::set<sys_days> days;
  for (const auto& [key, s] : store.cells_) days.insert(key.first);
  for (const sys_days d : days) {
    for (int s = 1; s <= calendar.products(); ++s) {
      if (store.find(Date{d}, s) || !calendar.delivery_start(Date{d}, s)) continue;
      store.add(ArrivalSeries{Date{d}, s, {}, calendar.trading_begin(s), calendar.trading_end(s)});
    }
  }
  return store;
}

}  // namespace ida::ingest
