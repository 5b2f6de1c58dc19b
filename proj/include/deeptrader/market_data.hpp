#pragma once

#include <deque>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "deeptrader/timeutil.hpp"

namespace deeptrader {

struct Trade {
  Micros timestamp = 0;
  double price = 0;   // currency per contract, > 0
  double volume = 0;  // contracts, > 0
};

struct Bar {
  double open = 0;
  double high = 0;
  double low = 0;
  double close = 0;
  double volume = 0;         // contracts
  double dollar_volume = 0;  // strictly above the threshold in force at emission
  Micros start_ts = 0;
  Micros end_ts = 0;
};

// Self-adjusting sampling threshold: delta = SMA over the daily dollar
// volumes of the past (up to) 90 days, divided by the target samples/day.
// Before the first complete day, delta falls back to `initial_threshold`.
class ThresholdState {
 public:
  ThresholdState(double tgt, double initial_threshold);

  // Advance the ring by one completed calendar day and recompute delta.
  void update(double completed_day_total);

  double threshold() const { return threshold_; }
  double tgt() const { return tgt_; }
  std::size_t days_stored() const { return daily_totals_.size(); }

  static constexpr std::size_t kWindowDays = 90;

 private:
  std::deque<double> daily_totals_;
  double tgt_;
  double threshold_;
};

// Accumulates trades until the running dollar-volume sum breaches the
// threshold; the breaching trade closes the bar.
class BarAccumulator {
 public:
  explicit BarAccumulator(const ThresholdState& threshold) : threshold_(&threshold) {}

  // Returns a completed bar iff this trade breached the threshold.
  std::optional<Bar> accumulate(const Trade& trade);

  double dollar_sum() const { return chi_; }
  bool empty() const { return trade_count_ == 0; }
  void reset();

 private:
  const ThresholdState* threshold_;
  double chi_ = 0;
  std::size_t trade_count_ = 0;
  double open_ = 0, high_ = 0, low_ = 0;
  double volume_ = 0;
  Micros start_ts_ = 0;
};

// Streaming sampler: folds trades into dollar-volume bars, rolling the
// threshold at every UTC-day boundary. No data after the bar being formed
// ever influences it, so truncating the stream preserves earlier bars
// bit-identically.
class DollarBarSampler {
 public:
  DollarBarSampler(double tgt, double initial_threshold);

  // Feed one trade (timestamps must be non-decreasing); returns a bar when
  // one completes. A trailing partial bar is simply never returned.
  std::optional<Bar> on_trade(const Trade& trade);

  double current_threshold() const { return threshold_.threshold(); }

 private:
  ThresholdState threshold_;
  BarAccumulator acc_;
  bool have_day_ = false;
  std::int64_t current_day_ = 0;
  double day_total_ = 0;
  Micros last_ts_ = 0;
  bool have_last_ts_ = false;
};

// Whole-stream convenience wrapper around DollarBarSampler.
std::vector<Bar> sample_stream(const std::vector<Trade>& trades, double tgt, double initial_threshold);

// Tick CSV ingestion. Schema: header "timestamp,price,volume"; ISO-8601
// timestamps with offset; one trade per line. Malformed rows, non-positive
// prices/volumes and decreasing timestamps raise IngestError naming the line.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<Trade> load_ticks(std::istream& in);
std::vector<Trade> load_ticks_file(const std::string& path);
void write_ticks_csv(std::ostream& out, const std::vector<Trade>& trades);

}  // namespace deeptrader
