#include "ida/backtest.hpp"

#include "ida/rng.hpp"

#include <cmath>
#include <fstream>

namespace ida::backtest {

std::size_t synth_generate(const SynthOptions& o, const ingest::MarketCalendar& calendar,
                           const std::filesystem::path& csv_path) {
  if (o.days < 0) throw std::invalid_argument("days must be >= 0");
  if (o.theta.size() != o.spec.parameter_count()) {
    throw dist::ParameterError(o.spec.name() + " expects " +
                               std::to_string(o.spec.parameter_count()) + " parameters");
  }
  if (!tv::feasible_on_grid(o.spec, o.theta, o.window_start, o.window_end)) {
    throw dist::ParameterError("parameters of " + o.spec.name() +
                               " are not positive over the window");
  }
  for (int s : o.products) {
    if (s < 1 || s > calendar.products()) {
      throw std::invalid_argument("product " + std::to_string(s) + " out of range");
    }
    if (!(calendar.trading_begin(s) < o.window_start && o.window_end <= calendar.trading_end(s))) {
      throw std::invalid_argument("window outside the trading period of product " +
                                  std::to_string(s));
    }
  }

  const fit::FittedModel model{o.spec, o.theta, 0.0, 0, 0, {o.window_start, o.window_end},
                               fit::ParamTime::SpellStart, {}, {}};

  if (!csv_path.parent_path().empty()) std::filesystem::create_directories(csv_path.parent_path());
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + csv_path.string());
  out << "delivery_date,product,timestamp,transaction_id\n";

  std::size_t rows = 0;
  const std::chrono::sys_days first = o.first_day;
  for (int i = 0; i < o.days; ++i) {
    const ingest::Date day{first + std::chrono::days{i}};
    const std::string date = ingest::format_date(day);
    for (int s : o.products) {
      const auto start = calendar.delivery_start(day, s);
      if (!start) continue;
      const double b = calendar.trading_begin(s);
      const double e = calendar.trading_end(s);
      RngStream rng(derive_seed(o.seed, {static_cast<std::uint64_t>(i),
                                         static_cast<std::uint64_t>(s)}));
      std::optional<double> last_before;
      std::vector<double> inside;
      double t = b;
      for (;;) {
        double next = t + dist::sample(model.params_at(t), rng);
        if (next <= t) next = std::nextafter(t, e);
        t = next;
        if (t >= e) break;
        if (t < o.window_start) {
          last_before = t;
        } else {
          inside.push_back(t);
        }
      }
      if (last_before) inside.insert(inside.begin(), *last_before);

      std::int64_t previous = std::numeric_limits<std::int64_t>::min();
      for (std::size_t k = 0; k < inside.size(); ++k) {
        auto us = static_cast<std::int64_t>(std::llround(inside[k] * 3.6e9));
        // Keep timestamps distinct after rounding to microseconds.
        if (us <= previous) us = previous + 1;
        previous = us;
        const ingest::UtcTime utc = *start + ingest::Micros{us};
        const auto offset = calendar.zone().offset_at(utc);
        const ingest::LocalTime local{(utc + offset).time_since_epoch()};
        out << date << ',' << s << ',' << ingest::format_timestamp(local) << ",syn-" << date << '-'
            << s << '-' << k << '\n';
        ++rows;
      }
    }
  }
  return rows;
}

}  // namespace ida::backtest
