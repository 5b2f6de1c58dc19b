#include "deeptrader/synthetic.hpp"

#include <cmath>
#include <stdexcept>

namespace deeptrader {

void SyntheticSpec::validate() const {
  if (!(base_price > 0)) throw std::invalid_argument("base_price must be positive");
  if (amplitude < 0 || amplitude >= 1) throw std::invalid_argument("amplitude must lie in [0,1)");
  if (!(period_days > 0)) throw std::invalid_argument("period_days must be positive");
  if (volatility < 0) throw std::invalid_argument("volatility must be non-negative");
  if (!(regime_length_days > 0)) throw std::invalid_argument("regime_length_days must be positive");
  if (!(ticks_per_day >= 1)) throw std::invalid_argument("ticks_per_day must be at least 1");
  if (!(duration_days > 0)) throw std::invalid_argument("duration_days must be positive");
  if (!(tick_volume > 0)) throw std::invalid_argument("tick_volume must be positive");
}

SyntheticSpec::Generator generator_from_string(const std::string& s) {
  if (s == "sine") return SyntheticSpec::Generator::sine;
  if (s == "gbm" || s == "geometric-random-walk") return SyntheticSpec::Generator::gbm;
  if (s == "regime" || s == "regime-switch") return SyntheticSpec::Generator::regime;
  throw std::invalid_argument("unknown synthetic generator: " + s);
}

std::string to_string(SyntheticSpec::Generator g) {
  switch (g) {
    case SyntheticSpec::Generator::sine: return "sine";
    case SyntheticSpec::Generator::gbm: return "gbm";
    default: return "regime";
  }
}

std::vector<Trade> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  RngStream rng(seed, "data");

  const std::size_t n_ticks = static_cast<std::size_t>(spec.duration_days * spec.ticks_per_day);
  const double step_days = 1.0 / spec.ticks_per_day;
  const Micros step_us = static_cast<Micros>(step_days * static_cast<double>(kMicrosPerDay));
  if (step_us <= 0) throw std::invalid_argument("ticks_per_day too high for microsecond timestamps");

  std::vector<Trade> out;
  out.reserve(n_ticks);

  double log_price = std::log(spec.base_price);
  const double two_pi = 6.283185307179586476925286766559;

  for (std::size_t i = 0; i < n_ticks; ++i) {
    const double tau_days = static_cast<double>(i) * step_days;
    double price;
    switch (spec.generator) {
      case SyntheticSpec::Generator::sine:
        price = spec.base_price * (1.0 + spec.amplitude * std::sin(two_pi * tau_days / spec.period_days));
        break;
      case SyntheticSpec::Generator::gbm: {
        if (i > 0) log_price += spec.drift * step_days + spec.volatility * std::sqrt(step_days) * rng.normal();
        price = std::exp(log_price);
        break;
      }
      default: {  // regime-switching drift
        const auto regime = static_cast<std::int64_t>(tau_days / spec.regime_length_days);
        const double d = regime % 2 == 0 ? spec.drift : -spec.drift;
        if (i > 0) log_price += d * step_days + spec.volatility * std::sqrt(step_days) * rng.normal();
        price = std::exp(log_price);
        break;
      }
    }
    Trade t;
    t.timestamp = spec.start_ts + static_cast<Micros>(i) * step_us;
    t.price = price;
    t.volume = spec.tick_volume;
    out.push_back(t);
  }
  return out;
}

}  // namespace deeptrader
