#pragma once

#include <functional>
#include <optional>
#include <span>

#include "deeptrader/agents.hpp"

namespace deeptrader {

// Chronological, contiguous split of the bar sequence.
struct SplitSpec {
  double train_frac = 0.25;
  double val_frac = 0.25;
  double test_frac = 0.5;

  void validate() const;
};

struct BarSplits {
  std::span<const Bar> train;
  std::span<const Bar> val;
  std::span<const Bar> test;
};

BarSplits split_bars(std::span<const Bar> bars, const SplitSpec& spec);

struct EarlyStopConfig {
  std::size_t check_every = 10;  // validation cadence in epochs
  std::size_t max_epochs = 100;
};

struct MetricsReport {
  double expected_return = 0;      // annualized mean of linear trade returns
  double std_return = 0;           // annualized std
  std::optional<double> sharpe;    // absent when std_return == 0
  double mdd = 0;                  // in [0,1]
  double hit = 0;                  // in [0,1]
};

// --- metric primitives --------------------------------------------------

// mean * bars_per_year, std * sqrt(bars_per_year)
std::pair<double, double> annualize(double per_bar_mean, double per_bar_std, double bars_per_year);

// expected / std; requires std > 0
double sharpe(double expected, double std);

// max over t of (peak - value_t) / peak; curve values strictly positive
double max_drawdown(std::span<const double> equity_curve);

// strict: zero returns do not count as hits
double hit_rate(std::span<const double> step_returns);

// --- walk-forward -------------------------------------------------------

struct BacktestConfig {
  SplitSpec split{};
  EarlyStopConfig early_stop{};
  RewardParams reward{};
  std::size_t window_size = 20;
  double bars_per_year = 1260.0;  // 252 trading days x tgt samples/day
  bool refit_during_test = true;
};

struct StepRecord {
  Micros ts = 0;            // end of the bar the position was held through
  double action = 0;        // weight held during that bar
  double y = 0;             // bar price return
  double linear_return = 0; // rho
  double reward = 0;        // risk-adjusted log reward
};

struct WalkForwardResult {
  std::vector<StepRecord> test_records;  // includes the terminal liquidation
  std::vector<double> equity;            // cumprod(1 + rho), starts at 1
  MetricsReport metrics;
  double cumulative_log_return = 0;      // sum of log(1 + rho) over the test
  double best_val_score = 0;
  std::size_t epochs_trained = 0;
  bool bankrupt = false;
};

// Expanding-window backtest per the training scheme: fit on the train
// split with early stopping against the validation split, then walk the
// test split registering one trade per bar, refitting online after each.
WalkForwardResult walk_forward(Agent& agent, std::span<const Bar> bars, const BacktestConfig& cfg);

// One pass over the training bars: explore, step, learn; decays
// exploration at the end.
void run_training_episode(Agent& agent, std::span<const Bar> bars, const BacktestConfig& cfg);

// Deterministic cumulative reward of the greedy policy over an evaluation
// span warmed with the trailing bars of the preceding data.
double evaluate_cumulative_reward(Agent& agent, std::span<const Bar> warmup, std::span<const Bar> bars,
                                  const BacktestConfig& cfg);

// Training loop with validation checks every `check_every` epochs; stops at
// the first non-improving check and restores the best snapshot.
void train_with_early_stopping(Agent& agent, std::span<const Bar> train, std::span<const Bar> val,
                               const BacktestConfig& cfg, WalkForwardResult& diag);

// Constant full-long strategy pushed through the identical return pipeline
// (entry cost at the first step, exit cost at liquidation).
WalkForwardResult buy_and_hold_baseline(std::span<const Bar> bars, const BacktestConfig& cfg);

// Metrics from a finished record sequence.
void fill_performance(WalkForwardResult& result, double bars_per_year);

}  // namespace deeptrader
