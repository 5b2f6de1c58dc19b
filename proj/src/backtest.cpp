#include "deeptrader/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace deeptrader {

void SplitSpec::validate() const {
  if (train_frac <= 0 || val_frac <= 0 || test_frac <= 0 ||
      std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must be positive and sum to 1");
  }
}

BarSplits split_bars(std::span<const Bar> bars, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = bars.size();
  const std::size_t a = static_cast<std::size_t>(std::floor(n * spec.train_frac));
  const std::size_t b = static_cast<std::size_t>(std::floor(n * (spec.train_frac + spec.val_frac)));
  return {bars.subspan(0, a), bars.subspan(a, b - a), bars.subspan(b)};
}

std::pair<double, double> annualize(double per_bar_mean, double per_bar_std, double bars_per_year) {
  if (!(bars_per_year > 0)) throw std::invalid_argument("bars_per_year must be positive");
  return {per_bar_mean * bars_per_year, per_bar_std * std::sqrt(bars_per_year)};
}

double sharpe(double expected, double std) {
  if (!(std > 0)) throw std::domain_error("sharpe undefined for std <= 0");
  return expected / std;
}

double max_drawdown(std::span<const double> equity_curve) {
  if (equity_curve.empty()) throw std::invalid_argument("empty equity curve");
  double peak = equity_curve[0];
  double mdd = 0;
  for (double v : equity_curve) {
    peak = std::max(peak, v);
    if (peak > 0) mdd = std::max(mdd, (peak - v) / peak);
  }
  return mdd;
}

double hit_rate(std::span<const double> step_returns) {
  if (step_returns.empty()) throw std::invalid_argument("empty return sequence");
  std::size_t hits = 0;
  for (double r : step_returns) {
    if (r > 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(step_returns.size());
}

namespace {

std::size_t warmup_need(const BacktestConfig& cfg) {
  // n observations need n+1 closes; the normalizer wants another lookback
  return cfg.window_size + cfg.reward.lookback + 1;
}

std::span<const Bar> warm_tail(std::span<const Bar> prior, const BacktestConfig& cfg) {
  const std::size_t take = std::min(prior.size(), warmup_need(cfg));
  return prior.subspan(prior.size() - take);
}

// Shared walking loop. `policy` picks the action; `learn`, when set, feeds
// the realized reward back. Returns per-step records including the
// terminal liquidation; stops early on bankruptcy.
struct WalkOutput {
  std::vector<StepRecord> records;
  bool bankrupt = false;
};

WalkOutput walk_span(std::span<const Bar> warmup, std::span<const Bar> bars, const BacktestConfig& cfg,
                     const std::function<double(const AgentState&)>& policy,
                     const std::function<void(const AgentState&, double, double)>& learn) {
  Environment env(cfg.reward, cfg.window_size);
  for (const Bar& b : warmup) env.feed(b);

  WalkOutput out;
  for (const Bar& bar : bars) {
    if (!env.ready()) {
      env.feed(bar);
      continue;
    }
    const AgentState state = env.state();
    const double action = policy(state);
    const StepResult sr = env.step(action, bar);
    if (learn) learn(state, action, sr.reward);
    out.records.push_back({bar.end_ts, action, sr.y, sr.linear_return, sr.reward});
    if (1.0 + sr.linear_return <= 0.0) {
      out.bankrupt = true;  // total loss: the curve cannot continue
      return out;
    }
  }
  // forced terminal liquidation; a zero-cost unwind changes nothing and is
  // not recorded as a trade
  if (env.ready() && !out.records.empty() &&
      std::abs(env.ledger().a_drift) * cfg.reward.lambda_cost > 0) {
    const StepResult fin = env.liquidate();
    out.records.push_back({out.records.back().ts, 0.0, fin.y, fin.linear_return, fin.reward});
  }
  return out;
}

}  // namespace

void run_training_episode(Agent& agent, std::span<const Bar> bars, const BacktestConfig& cfg) {
  walk_span({}, bars, cfg, [&](const AgentState& s) { return agent.act(s); },
            [&](const AgentState& s, double a, double r) { agent.observe(s, a, r); });
  agent.end_episode();
}

double evaluate_cumulative_reward(Agent& agent, std::span<const Bar> warmup, std::span<const Bar> bars,
                                  const BacktestConfig& cfg) {
  WalkOutput out = walk_span(warmup, bars, cfg,
                             [&](const AgentState& s) { return agent.act_greedy(s); }, nullptr);
  double total = 0;
  for (const StepRecord& r : out.records) total += r.reward;
  return total;
}

void train_with_early_stopping(Agent& agent, std::span<const Bar> train, std::span<const Bar> val,
                               const BacktestConfig& cfg, WalkForwardResult& diag) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<NetState> best_snap;
  bool have_snap = false;

  for (std::size_t epoch = 1; epoch <= cfg.early_stop.max_epochs; ++epoch) {
    run_training_episode(agent, train, cfg);
    diag.epochs_trained = epoch;
    if (epoch % cfg.early_stop.check_every != 0) continue;

    const double score = evaluate_cumulative_reward(agent, warm_tail(train, cfg), val, cfg);
    if (score > best) {  // strict improvement, no epsilon band
      best = score;
      best_snap = agent.snapshot();
      have_snap = true;
    } else {
      break;
    }
  }
  if (have_snap) {
    agent.restore(best_snap);
    diag.best_val_score = best;
  }
}

void fill_performance(WalkForwardResult& result, double bars_per_year) {
  const auto& recs = result.test_records;
  if (recs.empty()) throw std::invalid_argument("no test records: stream too short for warm-up");

  result.equity.clear();
  result.equity.reserve(recs.size() + 1);
  result.equity.push_back(1.0);
  double cum_log = 0;
  for (const StepRecord& r : recs) {
    const double growth = 1.0 + r.linear_return;
    if (growth <= 0) {
      result.bankrupt = true;
      result.equity.push_back(0.0);
      cum_log = -std::numeric_limits<double>::infinity();
      break;
    }
    result.equity.push_back(result.equity.back() * growth);
    cum_log += std::log(growth);
  }
  result.cumulative_log_return = cum_log;

  std::vector<double> rhos;
  rhos.reserve(recs.size());
  for (const StepRecord& r : recs) rhos.push_back(r.linear_return);

  double mean = 0;
  for (double r : rhos) mean += r;
  mean /= static_cast<double>(rhos.size());
  double var = 0;
  for (double r : rhos) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rhos.size());  // population variance
  const double sd = std::sqrt(var);

  auto [ann_mean, ann_std] = annualize(mean, sd, bars_per_year);
  result.metrics.expected_return = ann_mean;
  result.metrics.std_return = ann_std;
  result.metrics.sharpe = ann_std > 0 ? std::optional<double>(sharpe(ann_mean, ann_std)) : std::nullopt;
  result.metrics.mdd = result.bankrupt ? 1.0 : max_drawdown(result.equity);
  result.metrics.hit = hit_rate(rhos);
}

WalkForwardResult walk_forward(Agent& agent, std::span<const Bar> bars, const BacktestConfig& cfg) {
  const BarSplits splits = split_bars(bars, cfg.split);
  WalkForwardResult result;

  train_with_early_stopping(agent, splits.train, splits.val, cfg, result);

  agent.enter_test_phase();
  std::function<void(const AgentState&, double, double)> learn;
  if (cfg.refit_during_test) {
    learn = [&](const AgentState& s, double a, double r) { agent.observe(s, a, r); };
  }
  WalkOutput out = walk_span(warm_tail(splits.val, cfg), splits.test, cfg,
                             [&](const AgentState& s) { return agent.act(s); }, learn);
  result.test_records = std::move(out.records);
  result.bankrupt = out.bankrupt;
  fill_performance(result, cfg.bars_per_year);
  return result;
}

WalkForwardResult buy_and_hold_baseline(std::span<const Bar> bars, const BacktestConfig& cfg) {
  const BarSplits splits = split_bars(bars, cfg.split);
  WalkForwardResult result;
  WalkOutput out = walk_span(warm_tail(splits.val, cfg), splits.test, cfg,
                             [](const AgentState&) { return 1.0; }, nullptr);
  result.test_records = std::move(out.records);
  result.bankrupt = out.bankrupt;
  fill_performance(result, cfg.bars_per_year);
  return result;
}

}  // namespace deeptrader
