#include "deeptrader/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace deeptrader {

std::string to_string(Algorithm a) { return a == Algorithm::pg ? "PG" : "AC"; }

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "PG" || s == "pg") return Algorithm::pg;
  if (s == "AC" || s == "ac") return Algorithm::ac;
  throw ConfigError("unknown algorithm: " + s + " (expected PG or AC)");
}

void ExperimentConfig::validate() const {
  // a missing data source is caught when an experiment actually runs, so
  // that a bare config still exposes the full default set
  if (data && synthetic) throw ConfigError("config sets both 'data' and 'generator'");
  if (synthetic) {
    try {
      synthetic->validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (lambda_sigma < 0) throw ConfigError("lambda_sigma must be non-negative");
  if (lambda_cost < 0 || lambda_cost > 1) throw ConfigError("lambda_cost must lie in [0,1]");
  if (!(alpha_actor > 0)) throw ConfigError("alpha_actor must be positive");
  if (!(alpha_critic > 0)) throw ConfigError("alpha_critic must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (replay_capacity < batch_size) throw ConfigError("replay_capacity must be at least batch_size");
  if (epsilon < 0) throw ConfigError("epsilon must be non-negative");
  if (epsilon_decay < 0 || epsilon_decay > 1) throw ConfigError("epsilon_decay must lie in [0,1]");
  if (epsilon_min < 0) throw ConfigError("epsilon_min must be non-negative");
  if (algorithm == Algorithm::pg && !(epsilon_min > 0)) {
    throw ConfigError("epsilon_min must be positive for PG (test-time refits need a defined density)");
  }
  if (window < 5) throw ConfigError("window must be at least 5");
  if (lookback < 2) throw ConfigError("lookback must be at least 2");
  if (!(tgt > 0)) throw ConfigError("tgt must be positive");
  if (!(initial_threshold > 0)) throw ConfigError("initial_threshold must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (runs == 0) throw ConfigError("runs must be positive");
}

AgentHyperparams ExperimentConfig::agent_hyperparams() const {
  AgentHyperparams hp;
  hp.alpha_actor = alpha_actor;
  hp.alpha_critic = alpha_critic;
  hp.batch_size = batch_size;
  hp.replay_capacity = replay_capacity;
  hp.exploration = {epsilon, epsilon_decay, epsilon_min};
  return hp;
}

BacktestConfig ExperimentConfig::backtest_config() const {
  BacktestConfig bc;
  bc.early_stop.max_epochs = max_epochs;
  bc.reward.lambda_cost = lambda_cost;
  bc.reward.lambda_risk = lambda_sigma;
  bc.reward.lookback = lookback;
  bc.window_size = window;
  bc.bars_per_year = bars_per_year();
  bc.refit_during_test = refit_during_test;
  return bc;
}

std::unique_ptr<Agent> ExperimentConfig::make_agent(std::uint64_t agent_seed) const {
  if (algorithm == Algorithm::pg) {
    return std::make_unique<PgAgent>(seq, window, agent_hyperparams(), agent_seed);
  }
  return std::make_unique<AcAgent>(seq, window, agent_hyperparams(), agent_seed);
}

std::string ExperimentConfig::model_name() const { return to_string(algorithm) + "-" + to_string(seq); }

namespace {

struct KvReader {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> consumed;

  static KvReader read(std::istream& in) {
    KvReader kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
      };
      if (trim(line).empty()) continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
      if (kv.values.count(key)) {
        throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
      }
      kv.values[key] = value;
      kv.consumed[key] = false;
    }
    return kv;
  }

  std::optional<std::string> take(const std::string& key) {
    auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    consumed[key] = true;
    return it->second;
  }

  void reject_unknown(const char* what) const {
    for (const auto& [key, used] : consumed) {
      if (!used) throw ConfigError(std::string("unknown ") + what + " key: '" + key + "'");
    }
  }
};

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0' || !std::isfinite(d)) {
    throw ConfigError("key '" + key + "': not a number: '" + v + "'");
  }
  return d;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
  return u;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false: '" + v + "'");
}

void apply_synth_keys(KvReader& kv, SyntheticSpec& s) {
  if (auto v = kv.take("base_price")) s.base_price = parse_double("base_price", *v);
  if (auto v = kv.take("amplitude")) s.amplitude = parse_double("amplitude", *v);
  if (auto v = kv.take("period_days")) s.period_days = parse_double("period_days", *v);
  if (auto v = kv.take("drift")) s.drift = parse_double("drift", *v);
  if (auto v = kv.take("volatility")) s.volatility = parse_double("volatility", *v);
  if (auto v = kv.take("regime_length_days")) s.regime_length_days = parse_double("regime_length_days", *v);
  if (auto v = kv.take("ticks_per_day")) s.ticks_per_day = parse_double("ticks_per_day", *v);
  if (auto v = kv.take("duration_days")) s.duration_days = parse_double("duration_days", *v);
  if (auto v = kv.take("tick_volume")) s.tick_volume = parse_double("tick_volume", *v);
  if (auto v = kv.take("start")) {
    try {
      s.start_ts = parse_iso8601(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("key 'start': ") + e.what());
    }
  }
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  KvReader kv = KvReader::read(in);
  ExperimentConfig cfg;

  if (auto v = kv.take("data")) cfg.data = *v;
  if (auto v = kv.take("generator")) {
    SyntheticSpec s;
    try {
      s.generator = generator_from_string(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    cfg.synthetic = s;
  }
  if (cfg.synthetic) {
    apply_synth_keys(kv, *cfg.synthetic);
  }

  if (auto v = kv.take("algorithm")) cfg.algorithm = algorithm_from_string(*v);
  if (auto v = kv.take("seq")) {
    try {
      cfg.seq = seq_kind_from_string(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (auto v = kv.take("lambda_sigma")) cfg.lambda_sigma = parse_double("lambda_sigma", *v);
  if (auto v = kv.take("alpha_actor")) cfg.alpha_actor = parse_double("alpha_actor", *v);
  if (auto v = kv.take("alpha_critic")) cfg.alpha_critic = parse_double("alpha_critic", *v);
  if (auto v = kv.take("batch_size")) cfg.batch_size = parse_size("batch_size", *v);
  if (auto v = kv.take("replay_capacity")) cfg.replay_capacity = parse_size("replay_capacity", *v);
  if (auto v = kv.take("lambda_cost")) cfg.lambda_cost = parse_double("lambda_cost", *v);
  if (auto v = kv.take("epsilon")) cfg.epsilon = parse_double("epsilon", *v);
  if (auto v = kv.take("epsilon_decay")) cfg.epsilon_decay = parse_double("epsilon_decay", *v);
  if (auto v = kv.take("epsilon_min")) cfg.epsilon_min = parse_double("epsilon_min", *v);
  if (auto v = kv.take("window")) cfg.window = parse_size("window", *v);
  if (auto v = kv.take("lookback")) cfg.lookback = parse_size("lookback", *v);
  if (auto v = kv.take("tgt")) cfg.tgt = parse_double("tgt", *v);
  if (auto v = kv.take("initial_threshold")) cfg.initial_threshold = parse_double("initial_threshold", *v);
  if (auto v = kv.take("max_epochs")) cfg.max_epochs = parse_size("max_epochs", *v);
  if (auto v = kv.take("refit_during_test")) cfg.refit_during_test = parse_bool("refit_during_test", *v);
  if (auto v = kv.take("seed")) cfg.seed = parse_u64("seed", *v);
  if (auto v = kv.take("runs")) cfg.runs = parse_size("runs", *v);
  if (auto v = kv.take("out")) cfg.out = *v;

  kv.reject_unknown("config");
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in);
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  if (cfg.data) out << "data = " << *cfg.data << "\n";
  if (cfg.synthetic) {
    const SyntheticSpec& s = *cfg.synthetic;
    out << "generator = " << to_string(s.generator) << "\n";
    out << "base_price = " << fmt_double(s.base_price) << "\n";
    out << "amplitude = " << fmt_double(s.amplitude) << "\n";
    out << "period_days = " << fmt_double(s.period_days) << "\n";
    out << "drift = " << fmt_double(s.drift) << "\n";
    out << "volatility = " << fmt_double(s.volatility) << "\n";
    out << "regime_length_days = " << fmt_double(s.regime_length_days) << "\n";
    out << "ticks_per_day = " << fmt_double(s.ticks_per_day) << "\n";
    out << "duration_days = " << fmt_double(s.duration_days) << "\n";
    out << "tick_volume = " << fmt_double(s.tick_volume) << "\n";
    out << "start = " << format_iso8601(s.start_ts) << "\n";
  }
  out << "algorithm = " << to_string(cfg.algorithm) << "\n";
  out << "seq = " << to_string(cfg.seq) << "\n";
  out << "lambda_sigma = " << fmt_double(cfg.lambda_sigma) << "\n";
  out << "alpha_actor = " << fmt_double(cfg.alpha_actor) << "\n";
  out << "alpha_critic = " << fmt_double(cfg.alpha_critic) << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "replay_capacity = " << cfg.replay_capacity << "\n";
  out << "lambda_cost = " << fmt_double(cfg.lambda_cost) << "\n";
  out << "epsilon = " << fmt_double(cfg.epsilon) << "\n";
  out << "epsilon_decay = " << fmt_double(cfg.epsilon_decay) << "\n";
  out << "epsilon_min = " << fmt_double(cfg.epsilon_min) << "\n";
  out << "window = " << cfg.window << "\n";
  out << "lookback = " << cfg.lookback << "\n";
  out << "tgt = " << fmt_double(cfg.tgt) << "\n";
  out << "initial_threshold = " << fmt_double(cfg.initial_threshold) << "\n";
  out << "max_epochs = " << cfg.max_epochs << "\n";
  out << "refit_during_test = " << (cfg.refit_during_test ? "true" : "false") << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "runs = " << cfg.runs << "\n";
  out << "out = " << cfg.out << "\n";
  return out.str();
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  auto synth_eq = [](const std::optional<SyntheticSpec>& x, const std::optional<SyntheticSpec>& y) {
    if (x.has_value() != y.has_value()) return false;
    if (!x) return true;
    return x->generator == y->generator && x->base_price == y->base_price && x->amplitude == y->amplitude &&
           x->period_days == y->period_days && x->drift == y->drift && x->volatility == y->volatility &&
           x->regime_length_days == y->regime_length_days && x->ticks_per_day == y->ticks_per_day &&
           x->duration_days == y->duration_days && x->tick_volume == y->tick_volume &&
           x->start_ts == y->start_ts;
  };
  return a.data == b.data && synth_eq(a.synthetic, b.synthetic) && a.algorithm == b.algorithm &&
         a.seq == b.seq && a.lambda_sigma == b.lambda_sigma && a.alpha_actor == b.alpha_actor &&
         a.alpha_critic == b.alpha_critic && a.batch_size == b.batch_size &&
         a.replay_capacity == b.replay_capacity && a.lambda_cost == b.lambda_cost &&
         a.epsilon == b.epsilon && a.epsilon_decay == b.epsilon_decay && a.epsilon_min == b.epsilon_min &&
         a.window == b.window && a.lookback == b.lookback && a.tgt == b.tgt &&
         a.initial_threshold == b.initial_threshold && a.max_epochs == b.max_epochs &&
         a.refit_during_test == b.refit_during_test && a.seed == b.seed && a.runs == b.runs && a.out == b.out;
}

SynthFileSpec parse_synth_spec(std::istream& in) {
  KvReader kv = KvReader::read(in);
  SynthFileSpec out;
  if (auto v = kv.take("generator")) {
    try {
      out.spec.generator = generator_from_string(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else {
    throw ConfigError("synth spec needs a 'generator' key");
  }
  apply_synth_keys(kv, out.spec);
  if (auto v = kv.take("seed")) out.seed = parse_u64("seed", *v);
  kv.reject_unknown("synth spec");
  try {
    out.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return out;
}

SynthFileSpec parse_synth_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth spec: " + path);
  return parse_synth_spec(in);
}

}  // namespace deeptrader
