#pragma once

#include <string>
#include <vector>

#include "deeptrader/config.hpp"

namespace deeptrader {

struct RunResult {
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
  WalkForwardResult backtest;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  MetricsReport averaged;
  WalkForwardResult baseline;
  std::vector<Bar> bars;  // the shared evaluation data
};

// Materialize the configured data source into a bar sequence.
std::vector<Trade> load_or_generate_ticks(const ExperimentConfig& cfg);
std::vector<Bar> prepare_bars(const ExperimentConfig& cfg);

// Execute `runs` isolated walk-forward backtests (in parallel when
// possible), average the metrics arithmetically, and attach the
// buy-and-hold baseline over the same test region.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Execute and write every artifact (per-run CSVs, metrics.json,
// manifest.json) under cfg.out. Returns the experiment result.
ExperimentResult run_experiment_to_dir(const ExperimentConfig& cfg);

// Output writers (run-scoped files live in <out>/run_XXX/).
void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& result);

// Round a value to 9 significant decimal digits (the serialization
// precision of every number in the output files).
double round_sig9(double v);

}  // namespace deeptrader
