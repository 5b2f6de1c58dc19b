#include <doctest.h>

#include <sstream>

#include "deeptrader/config.hpp"
#include "deeptrader/experiment.hpp"

using namespace deeptrader;

TEST_CASE("config: an empty file yields the default hyperparameter set") {
  const ExperimentConfig cfg = parse_config_text("");
  CHECK(cfg.alpha_actor == 0.0001);
  CHECK(cfg.alpha_critic == 0.001);
  CHECK(cfg.batch_size == 128);
  CHECK(cfg.replay_capacity == 1000);
  CHECK(cfg.lambda_cost == 0.0002);
  CHECK(cfg.epsilon == 1.0);
  CHECK(cfg.epsilon_decay == 0.9);
  CHECK(cfg.epsilon_min == 0.01);
  CHECK(cfg.window == 20);
  CHECK(cfg.lambda_sigma == 0.0);
  CHECK(cfg.lookback == 60);
  CHECK(cfg.tgt == 5.0);
  CHECK(cfg.runs == 10);
  CHECK(cfg.algorithm == Algorithm::pg);
  CHECK(cfg.seq == SeqKind::cnn);
  CHECK(cfg.bars_per_year() == doctest::Approx(1260.0));
}

TEST_CASE("config: named validation errors") {
  CHECK_THROWS_WITH_AS(parse_config_text("lambda_sigma = -1\n"), doctest::Contains("lambda_sigma"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("mystery_key = 3\n"), doctest::Contains("mystery_key"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("lambda_cost = 1.5\n"), doctest::Contains("lambda_cost"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("algorithm = QL\n"), doctest::Contains("algorithm"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("window = 3\n"), doctest::Contains("window"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("epsilon = 1\nepsilon = 2\n"), doctest::Contains("duplicate"),
                       ConfigError);
  // PG needs a positive floor for test-time refits
  CHECK_THROWS_WITH_AS(parse_config_text("algorithm = PG\nepsilon_min = 0\n"),
                       doctest::Contains("epsilon_min"), ConfigError);
}

TEST_CASE("config: model selection keys") {
  const ExperimentConfig cfg = parse_config_text("algorithm = PG\nseq = CNN\nlambda_sigma = 0.1\n");
  CHECK(cfg.model_name() == "PG-CNN");
  CHECK(cfg.lambda_sigma == 0.1);
  const ExperimentConfig cfg2 = parse_config_text("algorithm = AC\nseq = LSTM\nepsilon_min = 0\n");
  CHECK(cfg2.model_name() == "AC-LSTM");
}

TEST_CASE("config: serialization round-trips to an equal config") {
  ExperimentConfig cfg = parse_config_text(
      "generator = sine\n"
      "amplitude = 0.07\n"
      "period_days = 3.5\n"
      "algorithm = AC\n"
      "seq = LSTM\n"
      "lambda_sigma = 0.01\n"
      "batch_size = 64\n"
      "seed = 1234\n"
      "runs = 3\n"
      "out = /tmp/somewhere\n");
  const std::string text = serialize_config(cfg);
  const ExperimentConfig back = parse_config_text(text);
  CHECK(back == cfg);
  CHECK(serialize_config(back) == text);
}

TEST_CASE("synthetic: same seed gives a byte-identical csv") {
  SyntheticSpec spec;
  spec.generator = SyntheticSpec::Generator::gbm;
  spec.volatility = 0.03;
  spec.ticks_per_day = 60;
  spec.duration_days = 10;

  auto render = [&](std::uint64_t seed) {
    std::ostringstream out;
    write_ticks_csv(out, generate_synthetic(spec, seed));
    return out.str();
  };
  CHECK(render(5) == render(5));
  CHECK(render(5) != render(6));
}

TEST_CASE("synthetic: zero amplitude sine is constant") {
  SyntheticSpec spec;
  spec.generator = SyntheticSpec::Generator::sine;
  spec.amplitude = 0.0;
  spec.ticks_per_day = 24;
  spec.duration_days = 5;
  for (const Trade& t : generate_synthetic(spec, 1)) CHECK(t.price == doctest::Approx(100.0));
}

TEST_CASE("synthetic: zero-drift walk has near-zero mean log return") {
  SyntheticSpec spec;
  spec.generator = SyntheticSpec::Generator::gbm;
  spec.drift = 0.0;
  spec.volatility = 0.02;
  spec.ticks_per_day = 10000;
  spec.duration_days = 100;  // 1e6 ticks
  const auto trades = generate_synthetic(spec, 17);
  REQUIRE(trades.size() == 1000000);
  double mean = 0;
  for (std::size_t i = 1; i < trades.size(); ++i) mean += std::log(trades[i].price / trades[i - 1].price);
  mean /= static_cast<double>(trades.size() - 1);
  // per-tick sigma; three standard errors of the mean
  const double per_tick_sd = 0.02 / std::sqrt(10000.0);
  const double se = per_tick_sd / std::sqrt(static_cast<double>(trades.size() - 1));
  CHECK(std::abs(mean) < 3 * se);
}

TEST_CASE("synthetic: trades satisfy the stream invariants") {
  SyntheticSpec spec;
  spec.generator = SyntheticSpec::Generator::regime;
  spec.drift = 0.4;
  spec.volatility = 0.05;
  spec.ticks_per_day = 100;
  spec.duration_days = 50;
  const auto trades = generate_synthetic(spec, 3);
  for (std::size_t i = 0; i < trades.size(); ++i) {
    CHECK(trades[i].price > 0);
    CHECK(trades[i].volume > 0);
    if (i) CHECK(trades[i].timestamp >= trades[i - 1].timestamp);
  }
}

TEST_CASE("synth spec file parsing") {
  std::istringstream in(
      "generator = sine\n"
      "amplitude = 0.1\n"
      "ticks_per_day = 50\n"
      "duration_days = 20\n"
      "seed = 99\n");
  const SynthFileSpec sf = parse_synth_spec(in);
  CHECK(sf.spec.generator == SyntheticSpec::Generator::sine);
  CHECK(sf.spec.amplitude == 0.1);
  CHECK(sf.seed == 99);

  std::istringstream missing("amplitude = 0.1\n");
  CHECK_THROWS_AS(parse_synth_spec(missing), ConfigError);
}

TEST_CASE("round_sig9") {
  CHECK(round_sig9(0.123456789123) == doctest::Approx(0.123456789).epsilon(1e-12));
  CHECK(round_sig9(0.0) == 0.0);
  CHECK(round_sig9(-1234567891.23) == doctest::Approx(-1234567890.0));
}
