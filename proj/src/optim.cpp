#include "deeptrader/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deeptrader::nn {

void OptimizerConfig::validate() const {
  if (!(lr > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) {
    throw std::invalid_argument("adam betas must lie in (0,1)");
  }
  if (!(eps > 0) || weight_decay < 0 || !(clip_norm > 0)) {
    throw std::invalid_argument("invalid optimizer constants");
  }
}

bool adam_step(const std::vector<Parameter*>& params, const std::vector<Tensor>& grads,
               const OptimizerConfig& cfg, bool maximize) {
  if (params.size() != grads.size()) throw std::invalid_argument("params/grads size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(params[i]->value)) throw ShapeError("gradient shape mismatch");
    for (double v : grads[i].data) {
      if (!std::isfinite(v)) return false;  // step rejected, state untouched
    }
  }

  // working copies; ascent is descent on the negated gradient
  std::vector<Tensor> g = grads;
  if (maximize) {
    for (Tensor& t : g)
      for (double& v : t.data) v = -v;
  }

  double norm_sq = 0;
  for (const Tensor& t : g)
    for (double v : t.data) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  if (norm > cfg.clip_norm) {
    const double s = cfg.clip_norm / norm;
    for (Tensor& t : g)
      for (double& v : t.data) v *= s;
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Tensor& gi = g[i];
    if (cfg.weight_decay != 0) {
      for (std::size_t j = 0; j < gi.size(); ++j) gi[j] += cfg.weight_decay * p.value[j];
    }
    p.step_count += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step_count));
    for (std::size_t j = 0; j < gi.size(); ++j) {
      p.adam_m[j] = cfg.beta1 * p.adam_m[j] + (1.0 - cfg.beta1) * gi[j];
      p.adam_v[j] = cfg.beta2 * p.adam_v[j] + (1.0 - cfg.beta2) * gi[j] * gi[j];
      const double m_hat = p.adam_m[j] / bc1;
      const double v_hat = p.adam_v[j] / bc2;
      p.value[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
  return true;
}

double grad_check(const std::function<Var(Graph&)>& build, const std::vector<Parameter*>& params,
                  double h, std::size_t coords_per_param, RngStream* rng) {
  // analytic pass
  std::vector<Tensor> analytic;
  {
    Graph g;
    Var out = build(g);
    if (out.value().size() != 1) throw ShapeError("grad_check: function must be scalar");
    g.backward(out);
    analytic = g.grads_for(params);
  }

  auto eval = [&]() {
    Graph g;
    return build(g).value()[0];
  };

  double max_rel = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    std::vector<std::size_t> coords;
    if (coords_per_param == 0 || coords_per_param >= p.value.size()) {
      coords.resize(p.value.size());
      for (std::size_t j = 0; j < coords.size(); ++j) coords[j] = j;
    } else {
      if (!rng) throw std::invalid_argument("grad_check: sampled coordinates need an rng");
      for (std::size_t j = 0; j < coords_per_param; ++j) coords.push_back(rng->index(p.value.size()));
    }
    for (std::size_t j : coords) {
      const double orig = p.value[j];
      p.value[j] = orig + h;
      const double fp = eval();
      p.value[j] = orig - h;
      const double fm = eval();
      p.value[j] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi][j];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace deeptrader::nn
