#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "deeptrader/experiment.hpp"

using namespace deeptrader;

namespace {

// a quick experiment: tiny windows, short training, small batches
ExperimentConfig quick_config(Algorithm algo, SeqKind kind) {
  ExperimentConfig cfg = parse_config_text(
      "generator = gbm\n"
      "volatility = 0.25\n"
      "drift = 0.05\n"
      "ticks_per_day = 60\n"
      "duration_days = 60\n"
      "window = 6\n"
      "lookback = 10\n"
      "batch_size = 8\n"
      "replay_capacity = 64\n"
      "max_epochs = 10\n"
      "initial_threshold = 3000\n"
      "runs = 2\n");
  cfg.algorithm = algo;
  cfg.seq = kind;
  return cfg;
}

}  // namespace

TEST_CASE("walk_forward: deterministic for a fixed seed") {
  const ExperimentConfig cfg = quick_config(Algorithm::pg, SeqKind::cnn);
  const auto bars = prepare_bars(cfg);
  REQUIRE(bars.size() > 100);

  auto run_once = [&] {
    auto agent = cfg.make_agent(424242);
    return walk_forward(*agent, bars, cfg.backtest_config());
  };
  const WalkForwardResult a = run_once();
  const WalkForwardResult b = run_once();
  REQUIRE(a.test_records.size() == b.test_records.size());
  for (std::size_t i = 0; i < a.test_records.size(); ++i) {
    CHECK(a.test_records[i].action == b.test_records[i].action);
    CHECK(a.test_records[i].reward == b.test_records[i].reward);
  }
  CHECK(a.metrics.expected_return == b.metrics.expected_return);
}

TEST_CASE("walk_forward: no lookahead, perturbing future bars keeps earlier actions") {
  for (Algorithm algo : {Algorithm::pg, Algorithm::ac}) {
    const ExperimentConfig cfg = quick_config(algo, SeqKind::cnn);
    auto bars = prepare_bars(cfg);
    REQUIRE(bars.size() > 100);

    auto agent = cfg.make_agent(7);
    const WalkForwardResult base = walk_forward(*agent, bars, cfg.backtest_config());
    const std::size_t n_records = base.test_records.size();
    REQUIRE(n_records > 10);

    const BarSplits splits = split_bars(bars, cfg.backtest_config().split);
    const std::size_t test_begin = bars.size() - splits.test.size();
    const std::size_t first_acted = bars.size() - (n_records);  // records cover the tail bars

    for (std::size_t j : {n_records / 4, n_records / 2, n_records - 3}) {
      std::vector<Bar> mutated(bars.begin(), bars.end());
      for (std::size_t k = first_acted + j; k < mutated.size(); ++k) {
        mutated[k].open *= 1.07;
        mutated[k].high *= 1.09;
        mutated[k].low *= 1.05;
        mutated[k].close *= 1.07;
      }
      auto agent2 = cfg.make_agent(7);
      const WalkForwardResult alt = walk_forward(*agent2, mutated, cfg.backtest_config());
      REQUIRE(alt.test_records.size() >= j);
      for (std::size_t i = 0; i < j; ++i) {
        CHECK(alt.test_records[i].action == base.test_records[i].action);
      }
    }
    (void)test_begin;
  }
}

TEST_CASE("run_experiment: averaged metrics and per-run isolation") {
  ExperimentConfig cfg = quick_config(Algorithm::pg, SeqKind::cnn);
  cfg.runs = 2;
  const ExperimentResult r = run_experiment(cfg);
  REQUIRE(r.runs.size() == 2);
  CHECK(r.runs[0].seed != r.runs[1].seed);
  CHECK(r.runs[0].seed == run_seed(cfg.seed, 0));
  const double mean_e = (r.runs[0].backtest.metrics.expected_return +
                         r.runs[1].backtest.metrics.expected_return) / 2.0;
  CHECK(r.averaged.expected_return == doctest::Approx(mean_e).epsilon(1e-12));
  // baseline rides the same bars
  CHECK(r.baseline.test_records.size() >= r.runs[0].backtest.test_records.size() - 1);
}

TEST_CASE("run_experiment: manifest config echo round-trips") {
  namespace fs = std::filesystem;
  ExperimentConfig cfg = quick_config(Algorithm::pg, SeqKind::cnn);
  cfg.runs = 1;
  cfg.max_epochs = 2;
  const fs::path dir = fs::temp_directory_path() / "deeptrader_manifest_test";
  fs::remove_all(dir);
  cfg.out = dir.string();
  run_experiment_to_dir(cfg);

  std::ifstream in(dir / "manifest.json");
  REQUIRE(in.good());
  nlohmann::json manifest;
  in >> manifest;
  const ExperimentConfig back = parse_config_text(manifest.at("config").get<std::string>());
  CHECK(back == cfg);
  CHECK(manifest.at("master_seed").get<std::uint64_t>() == cfg.seed);
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: same master seed reproduces the report") {
  ExperimentConfig cfg = quick_config(Algorithm::pg, SeqKind::cnn);
  cfg.runs = 2;
  const ExperimentResult a = run_experiment(cfg);
  const ExperimentResult b = run_experiment(cfg);
  CHECK(a.averaged.expected_return == b.averaged.expected_return);
  CHECK(a.averaged.std_return == b.averaged.std_return);
  CHECK(a.averaged.mdd == b.averaged.mdd);
  CHECK(a.averaged.hit == b.averaged.hit);
}
