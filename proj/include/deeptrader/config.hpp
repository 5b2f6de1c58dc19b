#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "deeptrader/backtest.hpp"
#include "deeptrader/synthetic.hpp"

namespace deeptrader {

enum class Algorithm { pg, ac };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Experiment definition. Defaults follow the reference hyperparameter set;
// every field is overridable from the flat key-value config file.
struct ExperimentConfig {
  // data source: a tick CSV path, or a synthetic generator spec
  std::optional<std::string> data;
  std::optional<SyntheticSpec> synthetic;

  Algorithm algorithm = Algorithm::pg;
  SeqKind seq = SeqKind::cnn;

  double lambda_sigma = 0.0;     // risk-sensitivity
  double alpha_actor = 0.0001;
  double alpha_critic = 0.001;
  std::size_t batch_size = 128;
  std::size_t replay_capacity = 1000;
  double lambda_cost = 0.0002;
  double epsilon = 1.0;
  double epsilon_decay = 0.9;
  double epsilon_min = 0.01;
  std::size_t window = 20;       // stacked observations n
  std::size_t lookback = 60;     // variance/volatility window L
  double tgt = 5.0;              // target samples per day
  double initial_threshold = 1e6;
  std::size_t max_epochs = 100;
  bool refit_during_test = true;

  std::uint64_t seed = 42;
  std::size_t runs = 10;
  std::string out = "out";

  void validate() const;

  double bars_per_year() const { return 252.0 * tgt; }
  AgentHyperparams agent_hyperparams() const;
  BacktestConfig backtest_config() const;
  std::unique_ptr<Agent> make_agent(std::uint64_t agent_seed) const;
  std::string model_name() const;  // e.g. "PG-CNN"
};

// Flat key-value text (UTF-8): `key = value` per line, `#` comments.
// Unknown keys and out-of-domain values raise ConfigError naming the key.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// Serializes every field; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

// Spec file for the `synth` subcommand: generator parameters plus a seed.
struct SynthFileSpec {
  SyntheticSpec spec;
  std::uint64_t seed = 0;
};

SynthFileSpec parse_synth_spec(std::istream& in);
SynthFileSpec parse_synth_spec_file(const std::string& path);

}  // namespace deeptrader
