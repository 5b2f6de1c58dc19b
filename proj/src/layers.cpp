#include "deeptrader/layers.hpp"

#include <cmath>

namespace deeptrader::nn {

void kaiming_init(Tensor& weights, std::size_t fan_in, RngStream& rng) {
  if (fan_in == 0) throw std::invalid_argument("fan_in must be positive");
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& w : weights.data) w = rng.normal(0.0, stddev);
}

DenseLayer::DenseLayer(std::string name, std::size_t out_dim, std::size_t in_dim, RngStream& rng)
    : weights(name + ".weights", Tensor({out_dim, in_dim})), bias(name + ".bias", Tensor({out_dim})) {
  kaiming_init(weights.value, in_dim, rng);
}

Conv1dLayer::Conv1dLayer(std::string name, std::size_t out_ch, std::size_t in_ch, std::size_t ksize,
                         RngStream& rng)
    : kernels(name + ".kernels", Tensor({out_ch, in_ch, ksize})), bias(name + ".bias", Tensor({out_ch})) {
  kaiming_init(kernels.value, in_ch * ksize, rng);
}

BatchNorm1d::BatchNorm1d(std::string name, std::size_t features)
    : gamma(name + ".gamma", Tensor({features}, 1.0)),
      beta(name + ".beta", Tensor({features})),
      running_mean({features}),
      running_var(Tensor({features}, 1.0)),
      features_(features) {}

Var BatchNorm1d::forward(Graph& g, Var x, Mode mode) {
  const Tensor& xv = x.value();
  std::size_t B, F, W;
  if (xv.rank() == 2) {
    B = xv.dim(0), F = xv.dim(1), W = 1;
  } else if (xv.rank() == 3) {
    B = xv.dim(0), F = xv.dim(1), W = xv.dim(2);
  } else {
    throw ShapeError("batchnorm: expected [B,F] or [B,C,W]");
  }
  if (F != features_) throw ShapeError("batchnorm: feature count mismatch");

  auto flat = [F, W](std::size_t b, std::size_t f, std::size_t w) { return (b * F + f) * W + w; };
  const std::size_t m = B * W;  // samples per feature

  if (mode == Mode::eval) {
    // standardize with running stats: an elementwise affine per feature
    Tensor out(xv.shape);
    std::vector<double> inv_std(F), mu(F);
    for (std::size_t f = 0; f < F; ++f) {
      inv_std[f] = 1.0 / std::sqrt(running_var[f] + eps);
      mu[f] = running_mean[f];
    }
    const Tensor& gv = gamma.value;
    const Tensor& bv = beta.value;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t w = 0; w < W; ++w)
          out[flat(b, f, w)] = gv[f] * (xv[flat(b, f, w)] - mu[f]) * inv_std[f] + bv[f];

    const std::size_t ix = x.id;
    Var vg = g.param(gamma);
    Var vb = g.param(beta);
    const std::size_t ig = vg.id, ib = vb.id;
    bool ng = g.needs_grad(ix) || g.needs_grad(ig) || g.needs_grad(ib);
    return g.make_node(std::move(out), ng,
                       [ix, ig, ib, B, F, W, flat, inv_std, mu](Graph& gr, std::size_t self) {
                         const Tensor& dy = gr.grad(self);
                         const Tensor& xv2 = gr.value(ix);
                         const Tensor& gv2 = gr.value(ig);
                         if (gr.needs_grad(ix)) {
                           Tensor& dx = gr.grad(ix);
                           for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t f = 0; f < F; ++f)
                               for (std::size_t w = 0; w < W; ++w)
                                 dx[flat(b, f, w)] += dy[flat(b, f, w)] * gv2[f] * inv_std[f];
                         }
                         if (gr.needs_grad(ig)) {
                           Tensor& dg = gr.grad(ig);
                           for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t f = 0; f < F; ++f)
                               for (std::size_t w = 0; w < W; ++w)
                                 dg[f] += dy[flat(b, f, w)] * (xv2[flat(b, f, w)] - mu[f]) * inv_std[f];
                         }
                         if (gr.needs_grad(ib)) {
                           Tensor& db = gr.grad(ib);
                           for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t f = 0; f < F; ++f)
                               for (std::size_t w = 0; w < W; ++w) db[f] += dy[flat(b, f, w)];
                         }
                       });
  }

  // train mode
  if (m < 2) throw std::invalid_argument("batchnorm train mode needs a batch of at least 2");

  std::vector<double> mu(F, 0.0), var(F, 0.0), inv_std(F);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t w = 0; w < W; ++w) mu[f] += xv[flat(b, f, w)];
  for (std::size_t f = 0; f < F; ++f) mu[f] /= static_cast<double>(m);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t w = 0; w < W; ++w) {
        const double d = xv[flat(b, f, w)] - mu[f];
        var[f] += d * d;
      }
  for (std::size_t f = 0; f < F; ++f) {
    var[f] /= static_cast<double>(m);
    inv_std[f] = 1.0 / std::sqrt(var[f] + eps);
  }

  // x_hat cached for backward; output applies scale/shift
  std::vector<double> x_hat(xv.size());
  Tensor out(xv.shape);
  const Tensor& gv = gamma.value;
  const Tensor& bv = beta.value;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t w = 0; w < W; ++w) {
        const std::size_t i = flat(b, f, w);
        x_hat[i] = (xv[i] - mu[f]) * inv_std[f];
        out[i] = gv[f] * x_hat[i] + bv[f];
      }

  // running stats update is a training side effect
  for (std::size_t f = 0; f < F; ++f) {
    running_mean[f] = (1.0 - momentum) * running_mean[f] + momentum * mu[f];
    running_var[f] = (1.0 - momentum) * running_var[f] + momentum * var[f];
  }

  const std::size_t ix = x.id;
  Var vg = g.param(gamma);
  Var vb = g.param(beta);
  const std::size_t ig = vg.id, ib = vb.id;
  bool ng = g.needs_grad(ix) || g.needs_grad(ig) || g.needs_grad(ib);
  return g.make_node(
      std::move(out), ng,
      [ix, ig, ib, B, F, W, m, flat, inv_std, xh = std::move(x_hat)](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad(self);
        const Tensor& gv2 = gr.value(ig);
        if (gr.needs_grad(ig)) {
          Tensor& dg = gr.grad(ig);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t f = 0; f < F; ++f)
              for (std::size_t w = 0; w < W; ++w) dg[f] += dy[flat(b, f, w)] * xh[flat(b, f, w)];
        }
        if (gr.needs_grad(ib)) {
          Tensor& db = gr.grad(ib);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t f = 0; f < F; ++f)
              for (std::size_t w = 0; w < W; ++w) db[f] += dy[flat(b, f, w)];
        }
        if (gr.needs_grad(ix)) {
          // dx = (gamma*inv_std/m) * (m*dy - sum(dy) - x_hat*sum(dy*x_hat))
          Tensor& dx = gr.grad(ix);
          std::vector<double> sum_dy(F, 0.0), sum_dy_xh(F, 0.0);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t f = 0; f < F; ++f)
              for (std::size_t w = 0; w < W; ++w) {
                const std::size_t i = flat(b, f, w);
                sum_dy[f] += dy[i];
                sum_dy_xh[f] += dy[i] * xh[i];
              }
          const double inv_m = 1.0 / static_cast<double>(m);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t f = 0; f < F; ++f)
              for (std::size_t w = 0; w < W; ++w) {
                const std::size_t i = flat(b, f, w);
                dx[i] += gv2[f] * inv_std[f] * inv_m *
                         (static_cast<double>(m) * dy[i] - sum_dy[f] - xh[i] * sum_dy_xh[f]);
              }
        }
      });
}

Var Dropout::forward([[maybe_unused]] Graph& g, Var x, Mode mode, RngStream* rng) const {
  if (p < 0 || p >= 1) throw std::invalid_argument("dropout p must lie in [0,1)");
  if (mode == Mode::eval || p == 0.0) return x;  // exact identity
  if (!rng) throw std::invalid_argument("dropout train mode needs an rng");
  Tensor mask(x.value().shape);
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& v : mask.data) v = rng->uniform() < p ? 0.0 : keep_scale;
  return cmul(x, mask);
}

LstmLayer::LstmLayer(std::string name, std::size_t hidden_dim, std::size_t input_dim, RngStream& rng)
    : weights(name + ".weights", Tensor({4 * hidden_dim, hidden_dim + input_dim})),
      bias(name + ".bias", Tensor({4 * hidden_dim})),
      hidden(hidden_dim),
      in_dim(input_dim) {
  kaiming_init(weights.value, hidden_dim + input_dim, rng);
}

std::pair<Var, Var> LstmLayer::step(Graph& g, Var x, Var h_prev, Var c_prev) {
  if (x.value().rank() != 2 || x.value().dim(1) != in_dim) throw ShapeError("lstm: bad input shape");
  Var z = concat_cols(h_prev, x);                 // [B, H+in]
  Var pre = dense(z, g.param(weights), g.param(bias));  // [B, 4H]
  const std::size_t H = hidden;
  Var i = vsigmoid(slice_cols(pre, 0, H));
  Var f = vsigmoid(slice_cols(pre, H, 2 * H));
  Var o = vsigmoid(slice_cols(pre, 2 * H, 3 * H));
  Var gg = vtanh(slice_cols(pre, 3 * H, 4 * H));
  Var c = add(mul(f, c_prev), mul(i, gg));
  Var h = mul(o, vtanh(c));
  return {h, c};
}

std::pair<Var, Var> LstmLayer::zero_state(Graph& g, std::size_t batch) const {
  return {g.constant(Tensor({batch, hidden})), g.constant(Tensor({batch, hidden}))};
}

}  // namespace deeptrader::nn
