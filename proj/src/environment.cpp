#include "deeptrader/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deeptrader {

void RewardParams::validate() const {
  if (lambda_cost < 0 || lambda_cost > 1) throw std::invalid_argument("lambda_cost must lie in [0,1]");
  if (lambda_risk < 0) throw std::invalid_argument("lambda_risk must be non-negative");
  if (lookback < 2) throw std::invalid_argument("lookback must be at least 2");
}

double multiplicative_return(double p_t, double p_prev) {
  if (!(p_t > 0) || !(p_prev > 0)) throw std::domain_error("prices must be positive");
  return p_t / p_prev - 1.0;
}

double drift_weight(double a_prev, double y) {
  const double denom = a_prev * y + 1.0;
  if (denom == 0.0) throw std::domain_error("position wiped out: a_prev*y + 1 == 0");
  return a_prev * (1.0 + y) / denom;
}

double gross_return(double y, double a_prev) {
  if (!(1.0 + y > 0)) throw std::domain_error("1 + y must be positive");
  return std::log1p(y) * a_prev;
}

double net_return(double r_gross, double a_chosen, double a_drift, double lambda_c) {
  return r_gross - lambda_c * std::abs(a_chosen - a_drift);
}

double trailing_population_variance(const std::deque<double>& values, std::size_t lookback) {
  const std::size_t m = std::min(values.size(), lookback);
  if (m < 2) return 0.0;
  const std::size_t begin = values.size() - m;
  double mean = 0;
  for (std::size_t i = begin; i < values.size(); ++i) mean += values[i];
  mean /= static_cast<double>(m);
  double var = 0;
  for (std::size_t i = begin; i < values.size(); ++i) {
    const double d = values[i] - mean;
    var += d * d;
  }
  return var / static_cast<double>(m);
}

double risk_adjusted_reward(PositionLedger& ledger, double r_net, double lambda_risk, std::size_t lookback) {
  if (!std::isfinite(r_net)) throw std::domain_error("non-finite net return");
  ledger.net_return_history.push_back(r_net);
  while (ledger.net_return_history.size() > lookback) ledger.net_return_history.pop_front();
  const double var = trailing_population_variance(ledger.net_return_history, lookback);
  return r_net - lambda_risk * var;
}

NormalizedObservation normalize_observation(const Bar& bar, const std::deque<double>& trailing_closes,
                                            std::size_t lookback) {
  if (trailing_closes.size() < 2) throw std::invalid_argument("need at least 2 trailing closes");
  const double p_prev = trailing_closes.back();
  if (!(p_prev > 0) || !(bar.close > 0) || !(bar.high > 0) || !(bar.low > 0)) {
    throw std::domain_error("prices must be positive");
  }

  // population variance of the trailing log close-to-close returns,
  // over at most the last `lookback` bars
  const std::size_t nrets = std::min(trailing_closes.size() - 1, lookback);
  const std::size_t begin = trailing_closes.size() - 1 - nrets;
  double mean = 0;
  for (std::size_t i = begin; i + 1 < trailing_closes.size(); ++i) {
    mean += std::log(trailing_closes[i + 1] / trailing_closes[i]);
  }
  mean /= static_cast<double>(nrets);
  double var = 0;
  for (std::size_t i = begin; i + 1 < trailing_closes.size(); ++i) {
    const double d = std::log(trailing_closes[i + 1] / trailing_closes[i]) - mean;
    var += d * d;
  }
  var /= static_cast<double>(nrets);

  NormalizedObservation out{0.0, 0.0, 0.0};
  if (var == 0.0) return out;  // constant prices carry no signal

  const double denom = var * std::sqrt(static_cast<double>(lookback));
  const double comps[3] = {bar.close, bar.high, bar.low};
  for (int i = 0; i < 3; ++i) {
    out[i] = std::clamp(std::log(comps[i] / p_prev) / denom, -1.0, 1.0);
  }
  return out;
}

double linear_step_return(double y, double a_chosen, double a_drift, double lambda_c) {
  return y * a_chosen - lambda_c * std::abs(a_chosen - a_drift);
}

Environment::Environment(RewardParams params, std::size_t window_size)
    : params_(params), window_size_(window_size) {
  params_.validate();
  if (window_size_ == 0) throw std::invalid_argument("window size must be positive");
}

void Environment::feed(const Bar& bar) {
  if (closes_.size() >= 2) {
    window_.push_back(normalize_observation(bar, closes_, params_.lookback));
    while (window_.size() > window_size_) window_.pop_front();
  }
  closes_.push_back(bar.close);
  while (closes_.size() > params_.lookback + 1) closes_.pop_front();
  ++bars_seen_;
}

AgentState Environment::state() const {
  if (!ready()) throw std::logic_error("environment not warm: window incomplete");
  AgentState s;
  s.window.assign(window_.begin(), window_.end());
  s.prev_action = ledger_.a_prev;
  return s;
}

StepResult Environment::step(double chosen_action, const Bar& next_bar) {
  if (!ready()) throw std::logic_error("environment not warm");
  if (chosen_action < -1.0 || chosen_action > 1.0) throw std::domain_error("action outside [-1,1]");

  StepResult r;
  r.y = multiplicative_return(next_bar.close, closes_.back());
  r.rebalance = std::abs(chosen_action - ledger_.a_drift);

  const double r_gross = gross_return(r.y, chosen_action);
  r.net_log_return = net_return(r_gross, chosen_action, ledger_.a_drift, params_.lambda_cost);
  r.reward = risk_adjusted_reward(ledger_, r.net_log_return, params_.lambda_risk, params_.lookback);
  r.linear_return = linear_step_return(r.y, chosen_action, ledger_.a_drift, params_.lambda_cost);

  ledger_.a_drift = drift_weight(chosen_action, r.y);
  ledger_.a_prev = chosen_action;
  feed(next_bar);
  return r;
}

StepResult Environment::liquidate() {
  StepResult r;
  r.y = 0.0;
  r.rebalance = std::abs(0.0 - ledger_.a_drift);
  r.net_log_return = net_return(0.0, 0.0, ledger_.a_drift, params_.lambda_cost);
  r.reward = risk_adjusted_reward(ledger_, r.net_log_return, params_.lambda_risk, params_.lookback);
  r.linear_return = linear_step_return(0.0, 0.0, ledger_.a_drift, params_.lambda_cost);
  ledger_.a_drift = 0.0;
  ledger_.a_prev = 0.0;
  return r;
}

void Environment::reset() {
  closes_.clear();
  window_.clear();
  ledger_ = PositionLedger{};
  bars_seen_ = 0;
}

}  // namespace deeptrader
