#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deeptrader/market_data.hpp"
#include "deeptrader/rng.hpp"

namespace deeptrader {

// Deterministic tick generators standing in for proprietary market data.
struct SyntheticSpec {
  enum class Generator { sine, gbm, regime };

  Generator generator = Generator::sine;
  double base_price = 100.0;
  double amplitude = 0.05;          // sine: fractional swing around the base
  double period_days = 4.0;         // sine period
  double drift = 0.0;               // gbm/regime: log drift per day
  double volatility = 0.01;         // gbm/regime: log volatility per day
  double regime_length_days = 20.0; // regime: days between drift sign flips
  double ticks_per_day = 200.0;
  double duration_days = 200.0;
  double tick_volume = 1.0;
  Micros start_ts = 1577836800000000LL;  // 2020-01-01T00:00:00Z

  void validate() const;
};

SyntheticSpec::Generator generator_from_string(const std::string& s);
std::string to_string(SyntheticSpec::Generator g);

// Same spec + seed always yields the identical stream.
std::vector<Trade> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace deeptrader
