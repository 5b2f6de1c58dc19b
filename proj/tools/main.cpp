#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "deeptrader/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::size_t> runs, std::optional<std::string> out, bool dry_run) {
  deeptrader::ExperimentConfig cfg = deeptrader::parse_config_file(config_path);
  if (seed) cfg.seed = *seed;
  if (runs) cfg.runs = *runs;
  if (out) cfg.out = *out;
  cfg.validate();

  if (dry_run) {
    // validate the data source end to end, but skip training
    const auto ticks = deeptrader::load_or_generate_ticks(cfg);
    const auto bars = deeptrader::sample_stream(ticks, cfg.tgt, cfg.initial_threshold);
    std::cout << "config ok: model " << cfg.model_name() << ", " << ticks.size() << " ticks, "
              << bars.size() << " bars, " << cfg.runs << " runs -> " << cfg.out << "\n";
    return 0;
  }

  const deeptrader::ExperimentResult result = deeptrader::run_experiment_to_dir(cfg);
  const auto& avg = result.averaged;
  std::printf("%s lambda_sigma=%g runs=%zu\n", cfg.model_name().c_str(), cfg.lambda_sigma,
              result.runs.size());
  std::printf("  E[R]=%.4f Std(R)=%.4f Sharpe=%s MDD=%.4f Hit=%.4f\n", avg.expected_return,
              avg.std_return, avg.sharpe ? std::to_string(*avg.sharpe).c_str() : "n/a", avg.mdd, avg.hit);
  const auto& base = result.baseline.metrics;
  std::printf("  baseline: E[R]=%.4f Std(R)=%.4f Sharpe=%s MDD=%.4f Hit=%.4f\n", base.expected_return,
              base.std_return, base.sharpe ? std::to_string(*base.sharpe).c_str() : "n/a", base.mdd,
              base.hit);
  std::cout << "outputs written to " << cfg.out << "\n";
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_path) {
  const deeptrader::SynthFileSpec sf = deeptrader::parse_synth_spec_file(spec_path);
  const auto ticks = deeptrader::generate_synthetic(sf.spec, sf.seed);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write tick file: " + out_path);
  deeptrader::write_ticks_csv(out, ticks);
  std::cout << "wrote " << ticks.size() << " ticks to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dollar-bar sampled deep-RL trading experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::string> out_dir;
  bool dry_run = false;
  CLI::App* run = app.add_subcommand("run", "run a configured experiment");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--seed", seed, "master seed override");
  run->add_option("--runs", runs, "run count override");
  run->add_option("--out", out_dir, "output directory override");
  run->add_flag("--dry-run", dry_run, "validate config and data schema without training");

  std::string spec_path, synth_out;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic tick CSV");
  synth->add_option("--spec", spec_path, "synthetic generator spec file")->required();
  synth->add_option("--out", synth_out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, seed, runs, out_dir, dry_run);
    if (synth->parsed()) return cmd_synth(spec_path, synth_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
