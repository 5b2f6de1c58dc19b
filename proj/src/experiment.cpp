#include "deeptrader/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace deeptrader {

namespace fs = std::filesystem;

std::vector<Trade> load_or_generate_ticks(const ExperimentConfig& cfg) {
  if (cfg.data) return load_ticks_file(*cfg.data);
  if (cfg.synthetic) {
    // one shared dataset per experiment: every run sees identical bars
    return generate_synthetic(*cfg.synthetic, mix_seed(cfg.seed, "data"));
  }
  throw ConfigError("config needs either 'data' or 'generator'");
}

std::vector<Bar> prepare_bars(const ExperimentConfig& cfg) {
  const std::vector<Trade> ticks = load_or_generate_ticks(cfg);
  return sample_stream(ticks, cfg.tgt, cfg.initial_threshold);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.bars = prepare_bars(cfg);
  const BacktestConfig bc = cfg.backtest_config();

  result.runs.resize(cfg.runs);
  std::vector<std::string> failures(cfg.runs);

  auto execute_run = [&](std::size_t i) {
    RunResult& rr = result.runs[i];
    rr.run_index = i;
    rr.seed = run_seed(cfg.seed, i);
    try {
      auto agent = cfg.make_agent(rr.seed);
      rr.backtest = walk_forward(*agent, result.bars, bc);
    } catch (const std::exception& e) {
      failures[i] = std::string("run ") + std::to_string(i) + ": " + e.what();
    }
  };

  // runs are fully isolated; aggregation below is a sequential reduce
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t workers = std::min(hw, cfg.runs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < cfg.runs; ++i) execute_run(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cfg.runs; i = next.fetch_add(1)) execute_run(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  for (const std::string& f : failures) {
    if (!f.empty()) throw std::runtime_error("experiment aborted: " + f);
  }

  // arithmetic average across runs, metric by metric
  MetricsReport avg;
  double sharpe_sum = 0;
  std::size_t sharpe_count = 0;
  for (const RunResult& rr : result.runs) {
    const MetricsReport& m = rr.backtest.metrics;
    avg.expected_return += m.expected_return;
    avg.std_return += m.std_return;
    avg.mdd += m.mdd;
    avg.hit += m.hit;
    if (m.sharpe) {
      sharpe_sum += *m.sharpe;
      ++sharpe_count;
    }
  }
  const double n = static_cast<double>(result.runs.size());
  avg.expected_return /= n;
  avg.std_return /= n;
  avg.mdd /= n;
  avg.hit /= n;
  if (sharpe_count == result.runs.size()) avg.sharpe = sharpe_sum / n;
  result.averaged = avg;

  result.baseline = buy_and_hold_baseline(result.bars, bc);
  return result;
}

double round_sig9(double v) {
  if (v == 0 || !std::isfinite(v)) return v;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

namespace {

nlohmann::ordered_json metrics_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["expected_return"] = round_sig9(m.expected_return);
  j["std_return"] = round_sig9(m.std_return);
  if (m.sharpe) {
    j["sharpe"] = round_sig9(*m.sharpe);
  } else {
    j["sharpe"] = nullptr;
  }
  j["mdd"] = round_sig9(m.mdd);
  j["hit"] = round_sig9(m.hit);
  return j;
}

void write_run_csvs(const fs::path& dir, const WalkForwardResult& wf) {
  {
    std::ofstream out(dir / "equity_curve.csv");
    out << "timestamp,equity\n";
    char buf[64];
    // equity[0] is the unit start, timestamped at the first record
    for (std::size_t i = 0; i < wf.test_records.size() && i + 1 < wf.equity.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.9g\n", wf.equity[i + 1]);
      out << format_iso8601(wf.test_records[i].ts) << buf;
    }
  }
  {
    std::ofstream out(dir / "actions.csv");
    out << "timestamp,action\n";
    char buf[64];
    for (const StepRecord& r : wf.test_records) {
      std::snprintf(buf, sizeof buf, ",%.9g\n", r.action);
      out << format_iso8601(r.ts) << buf;
    }
  }
  {
    // calendar-month buckets of bar end timestamps
    std::map<std::string, double> monthly;
    for (const StepRecord& r : wf.test_records) {
      const double g = 1.0 + r.linear_return;
      if (g <= 0) break;
      monthly[utc_month(r.ts)] += std::log(g);
    }
    std::ofstream out(dir / "monthly_log_returns.csv");
    out << "month,log_return\n";
    char buf[64];
    for (const auto& [month, lr] : monthly) {
      std::snprintf(buf, sizeof buf, ",%.9g\n", lr);
      out << month << buf;
    }
  }
}

}  // namespace

void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
  const fs::path out_dir(cfg.out);
  fs::create_directories(out_dir);

  for (const RunResult& rr : result.runs) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%03zu", rr.run_index);
    const fs::path run_dir = out_dir / name;
    fs::create_directories(run_dir);
    write_run_csvs(run_dir, rr.backtest);
  }

  nlohmann::ordered_json metrics;
  metrics["model"] = cfg.model_name();
  metrics["lambda_sigma"] = round_sig9(cfg.lambda_sigma);
  auto& runs = metrics["runs"] = nlohmann::ordered_json::array();
  for (const RunResult& rr : result.runs) {
    nlohmann::ordered_json j = metrics_json(rr.backtest.metrics);
    j["run"] = rr.run_index;
    j["seed"] = rr.seed;
    j["cumulative_log_return"] = round_sig9(rr.backtest.cumulative_log_return);
    j["epochs_trained"] = rr.backtest.epochs_trained;
    runs.push_back(std::move(j));
  }
  metrics["average"] = metrics_json(result.averaged);
  metrics["baseline"] = metrics_json(result.baseline.metrics);
  {
    std::ofstream out(out_dir / "metrics.json");
    out << metrics.dump(2) << "\n";
  }

  nlohmann::ordered_json manifest;
  manifest["tool"] = "deeptrader";
  manifest["version"] = "0.1.0";
  manifest["config"] = serialize_config(cfg);
  manifest["master_seed"] = cfg.seed;
  // fan-out rule: run_seed(master, i) = splitmix64(master ^ f(i)), i fixed
  // per run index so extending `runs` never reseeds earlier runs
  auto& seeds = manifest["run_seeds"] = nlohmann::ordered_json::array();
  for (const RunResult& rr : result.runs) seeds.push_back(rr.seed);
  if (cfg.synthetic) manifest["data_seed"] = mix_seed(cfg.seed, "data");
  {
    std::ofstream out(out_dir / "manifest.json");
    out << manifest.dump(2) << "\n";
  }
}

ExperimentResult run_experiment_to_dir(const ExperimentConfig& cfg) {
  ExperimentResult result = run_experiment(cfg);
  write_experiment_outputs(cfg, result);
  return result;
}

}  // namespace deeptrader
