#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ida::ingest {

using Date = std::chrono::year_month_day;
using Micros = std::chrono::microseconds;
/// Wall-clock time in the market's local zone.
using LocalTime = std::chrono::local_time<Micros>;
using UtcTime = std::chrono::sys_time<Micros>;

/// Accepts YYYY-MM-DD and DD.MM.YYYY.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(const Date& d);

/// Accepts "<date> HH:MM[:SS[.ffffff]]" with ' ' or 'T' between date and time.
std::optional<LocalTime> parse_timestamp(std::string_view text);
/// "YYYY-MM-DD HH:MM:SS.ffffff".
std::string format_timestamp(LocalTime t);

/// Local-time to UTC conversion for the zones a power market needs: fixed
/// offsets, and zones that follow the EU summer-time rule (last Sunday of
/// March to last Sunday of October, switching at 01:00 UTC).
class TimeZone {
 public:
  /// "UTC", "UTC+HH:MM", "UTC-HH:MM", "EU+HH:MM", or a named European zone
  /// ("Europe/Berlin", "CET", "Europe/London", ...). Throws std::invalid_argument.
  static TimeZone parse(std::string_view spec);
  static TimeZone utc() { return TimeZone(std::chrono::minutes{0}, false, "UTC"); }

  enum class Kind { Unique, Nonexistent, Ambiguous };
  struct Resolution {
    Kind kind;
    UtcTime earliest;  // valid unless kind == Nonexistent
    UtcTime latest;
  };

  Resolution to_utc(LocalTime local) const;
  std::chrono::minutes offset_at(UtcTime t) const;
  const std::string& name() const noexcept { return name_; }

 private:
  TimeZone(std::chrono::minutes standard, bool eu_dst, std::string name)
      : standard_(standard), eu_dst_(eu_dst), name_(std::move(name)) {}

  std::chrono::minutes standard_;
  bool eu_dst_;
  std::string name_;
};

class ExcludedFromTradingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Delivery start falls on a skipped or repeated local hour.
class InvalidDeliveryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Products, their trading periods [b(s), e(s)) in delivery-relative hours,
/// and the local zone used to place delivery starts.
class MarketCalendar {
 public:
  MarketCalendar(int products, TimeZone zone, std::vector<double> trading_begin,
                 std::vector<double> trading_end, int product_minutes = 60);

  /// Hourly market with b(s) = -8 - s and e(s) = -0.5.
  static MarketCalendar hourly(int products = 24, TimeZone zone = TimeZone::utc());

  int products() const noexcept { return products_; }
  double trading_begin(int product) const;
  double trading_end(int product) const;
  const TimeZone& zone() const noexcept { return zone_; }

  /// UTC instant of delivery start: day `d` at local (s - 1) * product_minutes.
  /// std::nullopt on DST-skipped or repeated local times.
  std::optional<UtcTime> delivery_start(const Date& d, int product) const;

  /// Hours from delivery start; negative before delivery. Throws
  /// ExcludedFromTradingError when the result is >= e(s) and
  /// InvalidDeliveryError when the delivery start is not well defined.
  double to_delivery_relative(LocalTime timestamp, const Date& d, int product) const;

 private:
  void check_product(int product) const;

  int products_;
  TimeZone zone_;
  std::vector<double> begin_;
  std::vector<double> end_;
  int product_minutes_;
};

struct RawTransaction {
  Date delivery_date;
  int product = 0;
  std::string market_area;
  std::optional<double> volume;
  std::optional<double> price;
  std::string transaction_id;
  LocalTime timestamp;
  std::size_t line = 0;  // 1-based line in the source file

  /// Equal in every data field (line excluded).
  bool same_record(const RawTransaction& other) const;
};

struct CsvSchema {
  char delimiter = ',';
  int products = 24;
  std::string delivery_date = "delivery_date";
  std::string product = "product";
  std::string timestamp = "timestamp";
  std::string volume = "volume";
  std::string price = "price";
  std::string market_area = "market_area";
  std::string transaction_id = "transaction_id";
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RowError : public std::runtime_error {
 public:
  RowError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Reads every row or throws on the first bad one; row order is preserved.
std::vector<RawTransaction> parse_csv(const std::filesystem::path& path, const CsvSchema& schema);
std::vector<RawTransaction> parse_csv_text(std::string_view text, const CsvSchema& schema);

/// Spreads transactions that share a timestamp T evenly over [T, T + resolution):
/// k ties become T + j * resolution / k, j = 0..k-1. The spread is narrowed
/// when the next distinct timestamp comes sooner, so the output is strictly
/// increasing. Input must be sorted by timestamp.
std::vector<LocalTime> dejitter(std::span<const RawTransaction> sorted,
                                Micros resolution = std::chrono::seconds{60});
std::vector<LocalTime> dejitter(std::span<const LocalTime> sorted,
                                Micros resolution = std::chrono::seconds{60});

/// Transaction times of one (day, product) cell, in delivery-relative hours.
struct ArrivalSeries {
  Date day;
  int product = 0;
  std::vector<double> arrivals;  // strictly increasing, inside (begin, end)
  double trading_begin = 0.0;
  double trading_end = 0.0;
};

struct Spell {
  double x;  // inter-arrival length, hours
  double t;  // spell start T_{i-1}, hours
};

/// Inter-arrival times whose spell ends after the window start, pooled over days.
struct InterArrivalSample {
  std::vector<Spell> spells;
  std::size_t days = 0;

  bool empty() const noexcept { return spells.empty(); }
  std::size_t size() const noexcept { return spells.size(); }
  void append(const InterArrivalSample& other);
};

/// Pairs (T_i - T_{i-1}, T_{i-1}) for every i with T_i > a, where T_0 = b.
/// An empty result means no arrival falls after `a`. Requires b < a < e.
InterArrivalSample slice_window(const ArrivalSeries& series, double window_start);

struct IngestStats {
  std::size_t rows = 0;
  std::size_t exact_duplicates = 0;
  std::size_t outside_trading = 0;
  std::size_t invalid_delivery = 0;  // rows on DST-dropped products
};

/// Normalized arrivals for every (day, product) cell seen in the input. A day
/// present for any product yields a (possibly empty) series for every
/// product whose delivery start is well defined.
class ArrivalStore {
 public:
  static ArrivalStore from_transactions(std::vector<RawTransaction> transactions,
                                        const MarketCalendar& calendar,
                                        Micros dejitter_resolution = std::chrono::seconds{60},
                                        IngestStats* stats = nullptr);

  void add(ArrivalSeries series);
  const ArrivalSeries* find(const Date& day, int product) const;
  /// Sorted distinct delivery days.
  std::vector<Date> days() const;
  std::size_t cell_count() const noexcept { return cells_.size(); }

  /// CSV with columns delivery_date,product,arrival_hours.
  void write_csv(const std::filesystem::path& path) const;
  static ArrivalStore read_csv(const std::filesystem::path& path, const MarketCalendar& calendar);

 private:
  using Key = std::pair<std::chrono::sys_days, int>;
  std::map<Key, ArrivalSeries> cells_;
};

}  // namespace ida::ingest
