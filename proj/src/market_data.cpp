#include "deeptrader/market_data.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace deeptrader {

ThresholdState::ThresholdState(double tgt, double initial_threshold) : tgt_(tgt), threshold_(initial_threshold) {
  if (tgt <= 0) throw std::invalid_argument("tgt must be positive");
  if (initial_threshold <= 0) throw std::invalid_argument("initial_threshold must be positive");
}

void ThresholdState::update(double completed_day_total) {
  if (completed_day_total < 0) throw std::invalid_argument("negative daily dollar volume");
  daily_totals_.push_back(completed_day_total);
  if (daily_totals_.size() > kWindowDays) daily_totals_.pop_front();
  const double sum = std::accumulate(daily_totals_.begin(), daily_totals_.end(), 0.0);
  const double mean = sum / static_cast<double>(daily_totals_.size());
  if (mean > 0) threshold_ = mean / tgt_;
  // an all-zero ring keeps the previous (positive) threshold in force
}

std::optional<Bar> BarAccumulator::accumulate(const Trade& trade) {
  if (trade_count_ == 0) {
    open_ = high_ = low_ = trade.price;
    start_ts_ = trade.timestamp;
  } else {
    high_ = std::max(high_, trade.price);
    low_ = std::min(low_, trade.price);
  }
  ++trade_count_;
  volume_ += trade.volume;
  chi_ += trade.price * trade.volume;

  if (chi_ > threshold_->threshold()) {
    Bar bar;
    bar.open = open_;
    bar.high = high_;
    bar.low = low_;
    bar.close = trade.price;  // the breaching trade closes the bar
    bar.volume = volume_;
    bar.dollar_volume = chi_;
    bar.start_ts = start_ts_;
    bar.end_ts = trade.timestamp;
    reset();
    return bar;
  }
  return std::nullopt;
}

void BarAccumulator::reset() {
  chi_ = 0;
  trade_count_ = 0;
  open_ = high_ = low_ = 0;
  volume_ = 0;
  start_ts_ = 0;
}

DollarBarSampler::DollarBarSampler(double tgt, double initial_threshold)
    : threshold_(tgt, initial_threshold), acc_(threshold_) {}

std::optional<Bar> DollarBarSampler::on_trade(const Trade& trade) {
  if (trade.price <= 0 || trade.volume <= 0) throw std::invalid_argument("trade price and volume must be positive");
  if (have_last_ts_ && trade.timestamp < last_ts_) throw std::invalid_argument("trade timestamps must be non-decreasing");
  last_ts_ = trade.timestamp;
  have_last_ts_ = true;

  const std::int64_t day = utc_day(trade.timestamp);
  if (!have_day_) {
    have_day_ = true;
    current_day_ = day;
  }
  while (current_day_ < day) {
    // roll the threshold at each boundary; tradeless days count as zero
    threshold_.update(day_total_);
    day_total_ = 0;
    ++current_day_;
  }
  day_total_ += trade.price * trade.volume;
  return acc_.accumulate(trade);
}

std::vector<Bar> sample_stream(const std::vector<Trade>& trades, double tgt, double initial_threshold) {
  DollarBarSampler sampler(tgt, initial_threshold);
  std::vector<Bar> bars;
  for (const Trade& t : trades) {
    if (auto bar = sampler.on_trade(t)) bars.push_back(*bar);
  }
  return bars;
}

namespace {

double parse_positive(const std::string& field, std::size_t line_no, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0') {
    throw IngestError("line " + std::to_string(line_no) + ": malformed " + what + " '" + field + "'");
  }
  if (!(v > 0)) {
    throw IngestError("line " + std::to_string(line_no) + ": non-positive " + what + " '" + field + "'");
  }
  return v;
}

}  // namespace

std::vector<Trade> load_ticks(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IngestError("line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "timestamp,price,volume") {
    throw IngestError("line 1: expected header 'timestamp,price,volume', got '" + line + "'");
  }

  std::vector<Trade> trades;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
      throw IngestError("line " + std::to_string(line_no) + ": expected 3 comma-separated fields");
    }

    Trade t;
    try {
      t.timestamp = parse_iso8601(std::string_view(line).substr(0, c1));
    } catch (const std::invalid_argument& e) {
      throw IngestError("line " + std::to_string(line_no) + ": " + e.what());
    }
    t.price = parse_positive(line.substr(c1 + 1, c2 - c1 - 1), line_no, "price");
    t.volume = parse_positive(line.substr(c2 + 1), line_no, "volume");

    if (!trades.empty() && t.timestamp < trades.back().timestamp) {
      throw IngestError("line " + std::to_string(line_no) + ": decreasing timestamp");
    }
    trades.push_back(t);
  }
  return trades;
}

std::vector<Trade> load_ticks_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open tick file: " + path);
  return load_ticks(in);
}

void write_ticks_csv(std::ostream& out, const std::vector<Trade>& trades) {
  out << "timestamp,price,volume\n";
  char buf[64];
  for (const Trade& t : trades) {
    out << format_iso8601(t.timestamp);
    std::snprintf(buf, sizeof buf, ",%.9g,%.9g\n", t.price, t.volume);
    out << buf;
  }
}

}  // namespace deeptrader
