#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

#include "deeptrader/market_data.hpp"

namespace deeptrader {

struct RewardParams {
  double lambda_cost = 0.0002;  // transaction cost fraction, in [0,1]
  double lambda_risk = 0.0;     // risk-sensitivity, >= 0
  std::size_t lookback = 60;    // variance / volatility window L, >= 2
  // discount rate is fixed at 0: the MDP is an immediate-reward process

  void validate() const;
};

// Normalized (close, high, low) triple, each clipped to [-1,1].
using NormalizedObservation = std::array<double, 3>;

struct AgentState {
  std::vector<NormalizedObservation> window;  // exactly n, oldest first
  double prev_action = 0.0;                   // in [-1,1]
};

// Position accounting across steps: the chosen weight, the weight after
// market drift, and the recent net-return history feeding the risk term.
struct PositionLedger {
  double a_prev = 0.0;   // chosen weight, in [-1,1]
  double a_drift = 0.0;  // drifted weight, unbounded
  std::deque<double> net_return_history;
};

// --- reward pieces -----------------------------------------------------

// p_t / p_prev - 1
double multiplicative_return(double p_t, double p_prev);

// a_prev*(1+y) / (a_prev*y + 1); throws std::domain_error on a wiped-out
// denominator (the backtest aborts with a diagnostic in that case).
double drift_weight(double a_prev, double y);

// log(1+y) * a_prev
double gross_return(double y, double a_prev);

// r_gross - lambda_c * |a_chosen - a_drift|, where (a_chosen, a_drift) is
// the rebalancing that established the position earning r_gross.
double net_return(double r_gross, double a_chosen, double a_drift, double lambda_c);

// Population variance over the last min(L, size) entries; 0 with fewer
// than two samples.
double trailing_population_variance(const std::deque<double>& values, std::size_t lookback);

// Appends r_net to the ledger history and returns r_net - lambda_risk * Var.
double risk_adjusted_reward(PositionLedger& ledger, double r_net, double lambda_risk, std::size_t lookback);

// Normalizes one bar against trailing closes (most recent last): each of
// (close, high, low) maps to clip(log(x / p_prev) / (var_L * sqrt(L)), -1, 1)
// with var_L the population variance of log close-to-close returns across
// the trailing closes. Constant prices (zero variance) yield the zero
// vector. Requires at least two trailing closes.
NormalizedObservation normalize_observation(const Bar& bar, const std::deque<double>& trailing_closes,
                                            std::size_t lookback);

// Per-step linear trade return: y*a_chosen - lambda_c*|a_chosen - a_drift|.
double linear_step_return(double y, double a_chosen, double a_drift, double lambda_c);

// --- the environment ---------------------------------------------------

struct StepResult {
  double reward = 0;         // risk-adjusted log return net of costs
  double net_log_return = 0; // before the risk term
  double linear_return = 0;  // for performance accounting
  double y = 0;              // multiplicative price return of the bar
  double rebalance = 0;      // |a_chosen - a_drift| charged this step
};

// Sequential trading MDP over a bar stream. Owns normalization state, the
// observation window and the position ledger. One backtest owns one
// environment; no shared state.
class Environment {
 public:
  Environment(RewardParams params, std::size_t window_size);

  // Feed a bar without acting (warm-up). Builds normalization history and
  // the observation window.
  void feed(const Bar& bar);

  // True once the window holds exactly n observations.
  bool ready() const { return window_.size() == window_size_; }

  // Current agent state; only valid when ready().
  AgentState state() const;

  // Apply the chosen weight, realize the next bar, return the reward and
  // update all internal state. The cost is charged on the rebalancing from
  // the drifted weight at decision time to the chosen weight.
  StepResult step(double chosen_action, const Bar& next_bar);

  // Force the position to zero at stream end, charging the final
  // transaction cost (episodes start and end flat).
  StepResult liquidate();

  void reset();

  const PositionLedger& ledger() const { return ledger_; }
  const RewardParams& params() const { return params_; }
  std::size_t window_size() const { return window_size_; }
  std::size_t bars_seen() const { return bars_seen_; }

 private:
  RewardParams params_;
  std::size_t window_size_;
  std::deque<double> closes_;  // trailing closes, capacity L+1
  std::deque<NormalizedObservation> window_;
  PositionLedger ledger_;
  std::size_t bars_seen_ = 0;
};

}  // namespace deeptrader
