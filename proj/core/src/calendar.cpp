#include "ida/ingest.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace ida::ingest {

using namespace std::chrono;

namespace {

template <class T>
bool parse_int(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<minutes> parse_offset(std::string_view s) {
  // "+HH:MM", "-HH:MM", "+HH"
  if (s.empty() || (s[0] != '+' && s[0] != '-')) return std::nullopt;
  const int sign = s[0] == '-' ? -1 : 1;
  s.remove_prefix(1);
  int h = 0;
  int m = 0;
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) {
    if (!parse_int(s, h)) return std::nullopt;
  } else if (!parse_int(s.substr(0, colon), h) || !parse_int(s.substr(colon + 1), m)) {
    return std::nullopt;
  }
  if (h > 14 || m >= 60) return std::nullopt;
  return minutes{sign * (h * 60 + m)};
}

sys_seconds eu_switch(year y, month m) {
  return sys_days{y / m / Sunday[last]} + hours{1};
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
  text = trim(text);
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
        !parse_int(text.substr(8, 2), d)) {
      return std::nullopt;
    }
  } else if (text.size() == 10 && text[2] == '.' && text[5] == '.') {
    if (!parse_int(text.substr(6, 4), y) || !parse_int(text.substr(3, 2), m) ||
        !parse_int(text.substr(0, 2), d)) {
      return std::nullopt;
    }
  } else {
    return std::nullopt;
  }
  const Date date{year{y}, month{m}, day{d}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::optional<LocalTime> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.size() < 16) return std::nullopt;
  const auto date = parse_date(text.substr(0, 10));
  if (!date || (text[10] != ' ' && text[10] != 'T')) return std::nullopt;
  std::string_view rest = text.substr(11);
  int hh = 0;
  int mm = 0;
  int ss = 0;
  long micro = 0;
  if (rest.size() < 5 || rest[2] != ':' || !parse_int(rest.substr(0, 2), hh) ||
      !parse_int(rest.substr(3, 2), mm)) {
    return std::nullopt;
  }
  rest.remove_prefix(5);
  if (!rest.empty()) {
    if (rest.size() < 3 || rest[0] != ':' || !parse_int(rest.substr(1, 2), ss)) {
      return std::nullopt;
    }
    rest.remove_prefix(3);
    if (!rest.empty()) {
      if (rest[0] != '.' || rest.size() < 2 || rest.size() > 7) return std::nullopt;
      const std::string_view frac = rest.substr(1);
      if (!parse_int(frac, micro) || micro < 0) return std::nullopt;
      for (std::size_t i = frac.size(); i < 6; ++i) micro *= 10;
    }
  }
  if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
  return local_days{*date} + hours{hh} + minutes{mm} + seconds{ss} + Micros{micro};
}

std::string format_timestamp(LocalTime t) {
  const auto day_start = floor<days>(t);
  const Date d{day_start};
  const hh_mm_ss<Micros> tod{t - day_start};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s %02d:%02d:%02d.%06ld", format_date(d).c_str(),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()),
                static_cast<long>(tod.subseconds().count()));
  return buf;
}

TimeZone TimeZone::parse(std::string_view spec) {
  spec = trim(spec);
  struct Named {
    std::string_view name;
    int standard_minutes;
  };
  static constexpr std::array<Named, 14> kNamed{{
      {"CET", 60},
      {"Europe/Berlin", 60},
      {"Europe/Paris", 60},
      {"Europe/Amsterdam", 60},
      {"Europe/Brussels", 60},
      {"Europe/Vienna", 60},
      {"Europe/Madrid", 60},
      {"Europe/Warsaw", 60},
      {"Europe/Oslo", 60},
      {"WET", 0},
      {"Europe/London", 0},
      {"Europe/Lisbon", 0},
      {"EET", 120},
      {"Europe/Helsinki", 120},
  }};
  if (spec == "UTC" || spec == "Z") return utc();
  for (const auto& n : kNamed) {
    if (n.name == spec) return TimeZone(minutes{n.standard_minutes}, true, std::string(spec));
  }
  if (spec.size() > 3 && (spec.substr(0, 3) == "UTC" || spec.substr(0, 2) == "EU")) {
    const bool eu = spec.substr(0, 2) == "EU";
    if (auto off = parse_offset(spec.substr(eu ? 2 : 3))) {
      return TimeZone(*off, eu, std::string(spec));
    }
  }
  throw std::invalid_argument("unsupported time zone '" + std::string(spec) + "'");
}

minutes TimeZone::offset_at(UtcTime t) const {
  if (!eu_dst_) return standard_;
  const auto y = year_month_day{floor<days>(t)}.year();
  const bool summer = t >= eu_switch(y, March) && t < eu_switch(y, October);
  return summer ? standard_ + hours{1} : standard_;
}

TimeZone::Resolution TimeZone::to_utc(LocalTime local) const {
  const UtcTime standard{local.time_since_epoch() - standard_};
  if (!eu_dst_) return {Kind::Unique, standard, standard};
  const UtcTime summer{local.time_since_epoch() - standard_ - hours{1}};
  const bool standard_ok = offset_at(standard) == standard_;
  const bool summer_ok = offset_at(summer) == standard_ + hours{1};
  if (standard_ok && summer_ok) return {Kind::Ambiguous, summer, standard};
  if (standard_ok) return {Kind::Unique, standard, standard};
  if (summer_ok) return {Kind::Unique, summer, summer};
  return {Kind::Nonexistent, standard, standard};
}

MarketCalendar::MarketCalendar(int products, TimeZone zone, std::vector<double> trading_begin,
                               std::vector<double> trading_end, int product_minutes)
    : products_(products),
      zone_(std::move(zone)),
      begin_(std::move(trading_begin)),
      end_(std::move(trading_end)),
      product_minutes_(product_minutes) {
  if (products_ < 1) throw std::invalid_argument("market needs at least one product");
  if (product_minutes_ < 1) throw std::invalid_argument("product length must be positive");
  if (begin_.size() != static_cast<std::size_t>(products_) ||
      end_.size() != static_cast<std::size_t>(products_)) {
    throw std::invalid_argument("trading period tables must have one entry per product");
  }
  for (int s = 0; s < products_; ++s) {
    if (!(begin_[s] < end_[s])) {
      throw std::invalid_argument("trading begin must precede trading end for product " +
                                  std::to_string(s + 1));
    }
  }
}

MarketCalendar MarketCalendar::hourly(int products, TimeZone zone) {
  std::vector<double> b;
  for (int s = 1; s <= products; ++s) b.push_back(-8.0 - s);
  return MarketCalendar(products, std::move(zone), std::move(b),
                        std::vector<double>(static_cast<std::size_t>(products), -0.5));
}

void MarketCalendar::check_product(int product) const {
  if (product < 1 || product > products_) {
    throw std::out_of_range("product " + std::to_string(product) + " outside 1.." +
                            std::to_string(products_));
  }
}

double MarketCalendar::trading_begin(int product) const {
  check_product(product);
  return begin_[static_cast<std::size_t>(product - 1)];
}

double MarketCalendar::trading_end(int product) const {
  check_product(product);
  return end_[static_cast<std::size_t>(product - 1)];
}

std::optional<UtcTime> MarketCalendar::delivery_start(const Date& d, int product) const {
  check_product(product);
  const LocalTime local = local_days{d} + minutes{(product - 1) * product_minutes_};
  const auto r = zone_.to_utc(local);
  if (r.kind != TimeZone::Kind::Unique) return std::nullopt;
  return r.earliest;
}

double MarketCalendar::to_delivery_relative(LocalTime timestamp, const Date& d, int product) const {
  const auto start = delivery_start(d, product);
  if (!start) {
    throw InvalidDeliveryError("delivery start of product " + std::to_string(product) + " on " +
                               format_date(d) + " is not a unique local time");
  }
  // Transactions inside a repeated local hour take the earlier instant.
  const auto r = zone_.to_utc(timestamp);
  if (r.kind == TimeZone::Kind::Nonexistent) {
    throw InvalidDeliveryError("timestamp " + format_timestamp(timestamp) +
                               " does not exist in zone " + zone_.name());
  }
  const double hours_rel = duration<double, std::ratio<3600>>(r.earliest - *start).count();
  if (hours_rel >= trading_end(product)) {
    throw ExcludedFromTradingError("timestamp " + format_timestamp(timestamp) +
                                   " is at or after the end of trading for product " +
                                   std::to_string(product));
  }
  return hours_rel;
}

}  // namespace ida::ingest
