#pragma once

#include <functional>
#include <vector>

#include "deeptrader/graph.hpp"
#include "deeptrader/rng.hpp"

namespace deeptrader::nn {

struct OptimizerConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.001;
  double clip_norm = 1.0;  // joint gradient norm across all parameters

  void validate() const;
};

// One Adam step over a parameter group. Pipeline: negate for ascent if
// maximizing, clip the joint gradient norm, add the weight-decay term
// lambda_wd * theta, then per-parameter moments with bias correction.
// Returns false (leaving everything untouched) on a non-finite gradient.
bool adam_step(const std::vector<Parameter*>& params, const std::vector<Tensor>& grads,
               const OptimizerConfig& cfg, bool maximize = false);

// Central finite-difference check: builds the scalar function via `build`
// on a fresh graph per evaluation and compares the analytic gradient per
// coordinate. Relative error |a-n| / max(|a|,|n|,1e-8). With
// coords_per_param > 0, a random subset of coordinates per parameter is
// checked (rng required); 0 checks every coordinate.
double grad_check(const std::function<Var(Graph&)>& build, const std::vector<Parameter*>& params,
                  double h = 1e-5, std::size_t coords_per_param = 0, RngStream* rng = nullptr);

}  // namespace deeptrader::nn
