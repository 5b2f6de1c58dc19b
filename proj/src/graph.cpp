#include "deeptrader/graph.hpp"

#include <algorithm>
#include <cmath>

namespace deeptrader::nn {

const Tensor& Var::value() const { return graph->value(id); }
const Tensor& Var::grad() const { return const_cast<Graph*>(graph)->grad(id); }

Var Graph::make_node(Tensor value, bool needs_grad, std::function<void(Graph&, std::size_t)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::input(Tensor value) { return make_node(std::move(value), true, nullptr); }

Var Graph::constant(Tensor value) { return make_node(std::move(value), false, nullptr); }

Var Graph::param(Parameter& p) {
  auto it = bound_params_.find(&p);
  if (it != bound_params_.end()) return Var{this, it->second};
  Var v = make_node(p.value, true, nullptr);
  bound_params_.emplace(&p, v.id);
  return v;
}

Tensor& Graph::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad_alloc) {
    n.grad = Tensor(n.value.shape);
    n.grad_alloc = true;
  }
  return n.grad;
}

void Graph::backward(const Var& root) {
  if (root.graph != this) throw std::logic_error("backward on foreign graph");
  if (value(root.id).size() != 1) throw ShapeError("backward root must be scalar");
  grad(root.id)[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.back && n.grad_alloc) n.back(*this, i);
  }
  ran_backward_ = true;
}

Tensor Graph::grad_of(const Parameter& p) const {
  auto it = bound_params_.find(&p);
  if (it == bound_params_.end() || !nodes_[it->second].grad_alloc) return Tensor(p.value.shape);
  return nodes_[it->second].grad;
}

std::vector<Tensor> Graph::grads_for(const std::vector<Parameter*>& params) const {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(grad_of(*p));
  return out;
}

namespace {

Graph& same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw std::logic_error("vars belong to different graphs");
  return *a.graph;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) throw ShapeError(std::string(op) + ": shape mismatch");
}

// Accumulate src into the grad of node `id` if it participates.
inline void accum(Graph& g, std::size_t id, const std::vector<double>& src) {
  if (!g.needs_grad(id)) return;
  Tensor& dst = g.grad(id);
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

}  // namespace

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  check_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return g.make_node(std::move(out), g.needs_grad(ia) || g.needs_grad(ib),
                     [ia, ib](Graph& gr, std::size_t self) {
                       const Tensor& dy = gr.grad(self);
                       accum(gr, ia, dy.data);
                       accum(gr, ib, dy.data);
                     });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return g.make_node(std::move(out), g.needs_grad(ia) || g.needs_grad(ib),
                     [ia, ib](Graph& gr, std::size_t self) {
                       const Tensor& dy = gr.grad(self);
                       accum(gr, ia, dy.data);
                       if (gr.needs_grad(ib)) {
                         Tensor& db = gr.grad(ib);
                         for (std::size_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
                       }
                     });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return g.make_node(std::move(out), g.needs_grad(ia) || g.needs_grad(ib),
                     [ia, ib](Graph& gr, std::size_t self) {
                       const Tensor& dy = gr.grad(self);
                       const Tensor& av = gr.value(ia);
                       const Tensor& bv2 = gr.value(ib);
                       if (gr.needs_grad(ia)) {
                         Tensor& da = gr.grad(ia);
                         for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bv2[i];
                       }
                       if (gr.needs_grad(ib)) {
                         Tensor& db = gr.grad(ib);
                         for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * av[i];
                       }
                     });
}

Var square(Var a) {
  Graph& g = *a.graph;
  Tensor out = a.value();
  for (double& v : out.data) v *= v;
  const std::size_t ia = a.id;
  return g.make_node(std::move(out), g.needs_grad(ia), [ia](Graph& gr, std::size_t self) {
    const Tensor& dy = gr.grad(self);
    const Tensor& av = gr.value(ia);
    Tensor& da = gr.grad(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += 2.0 * av[i] * dy[i];
  });
}

Var scale(Var a, double c) {
  Graph& g = *a.graph;
  Tensor out = a.value();
  for (double& v : out.data) v *= c;
  const std::size_t ia = a.id;
  return g.make_node(std::move(out), g.needs_grad(ia), [ia, c](Graph& gr, std::size_t self) {
    const Tensor& dy = gr.grad(self);
    Tensor& da = gr.grad(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += c * dy[i];
  });
}

Var add_scalar(Var a, double c) {
  Graph& g = *a.graph;
  Tensor out = a.value();
  for (double& v : out.data) v += c;
  const std::size_t ia = a.id;
  return g.make_node(std::move(out), g.needs_grad(ia), [ia](Graph& gr, std::size_t self) {
    accum(gr, ia, gr.grad(self).data);
  });
}

Var cmul(Var a, const Tensor& c) {
  Graph& g = *a.graph;
  check_same_shape(a.value(), c, "cmul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i];
  const std::size_t ia = a.id;
  return g.make_node(std::move(out), g.needs_grad(ia), [ia, c](Graph& gr, std::size_t self) {
    const Tensor& dy = gr.grad(self);
    Tensor& da = gr.grad(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += c[i] * dy[i];
  });
}

Var cadd(Var a, const Tensor& c) {
  Graph& g = *a.graph;
  check_same_shape(a.value(), c, "cadd");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
  const std::size_t ia = a.id;
  return g.make_node(std::move(out), g.needs_grad(ia), [ia](Graph& gr, std::size_t self) {
    accum(gr, ia, gr.grad(self).data);
  });
}

Var vtanh(Var a) {
  Graph& g = *a.graph;
  Tensor out = a.value();
  for (double& v : out.data) v = std::tanh(v);
  const std::size_t ia = a.id;
  return g.make_node(std::move(out), g.needs_grad(ia), [ia](Graph& gr, std::size_t self) {
    const Tensor& dy = gr.grad(self);
    const Tensor& y = gr.value(self);
    Tensor& da = gr.grad(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += (1.0 - y[i] * y[i]) * dy[i];
  });
}

Var vsigmoid(Var a) {
  Graph& g = *a.graph;
  Tensor out = a.value();
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  const std::size_t ia = a.id;
  return g.make_node(std::move(out), g.needs_grad(ia), [ia](Graph& gr, std::size_t self) {
    const Tensor& dy = gr.grad(self);
    const Tensor& y = gr.value(self);
    Tensor& da = gr.grad(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += y[i] * (1.0 - y[i]) * dy[i];
  });
}

Var leaky_relu(Var a, double slope) {
  Graph& g = *a.graph;
  Tensor out = a.value();
  for (double& v : out.data) v = v >= 0 ? v : slope * v;
  const std::size_t ia = a.id;
  return g.make_node(std::move(out), g.needs_grad(ia), [ia, slope](Graph& gr, std::size_t self) {
    const Tensor& dy = gr.grad(self);
    const Tensor& av = gr.value(ia);
    Tensor& da = gr.grad(ia);
    // derivative at exactly 0 takes the positive branch
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += (av[i] >= 0 ? 1.0 : slope) * dy[i];
  });
}

Var sum(Var a) {
  Graph& g = *a.graph;
  double s = 0;
  for (double v : a.value().data) s += v;
  const std::size_t ia = a.id;
  return g.make_node(Tensor::scalar(s), g.needs_grad(ia), [ia](Graph& gr, std::size_t self) {
    const double dy = gr.grad(self)[0];
    Tensor& da = gr.grad(ia);
    for (double& v : da.data) v += dy;
  });
}

Var mean(Var a) {
  Graph& g = *a.graph;
  const std::size_t n = a.value().size();
  double s = 0;
  for (double v : a.value().data) s += v;
  const std::size_t ia = a.id;
  return g.make_node(Tensor::scalar(s / static_cast<double>(n)), g.needs_grad(ia),
                     [ia, n](Graph& gr, std::size_t self) {
                       const double dy = gr.grad(self)[0] / static_cast<double>(n);
                       Tensor& da = gr.grad(ia);
                       for (double& v : da.data) v += dy;
                     });
}

namespace {

Var dense_impl(Var x, Var weights, const Var* bias) {
  Graph& g = same_graph(x, weights);
  const Tensor& xv = x.value();
  const Tensor& wv = weights.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1)) {
    throw ShapeError("dense: expected x[B,k], W[m,k]");
  }
  const std::size_t B = xv.dim(0), k = xv.dim(1), m = wv.dim(0);
  const double* bptr = nullptr;
  std::size_t bias_id = 0;
  bool has_bias = bias != nullptr;
  if (has_bias) {
    const Tensor& bv = bias->value();
    if (bv.rank() != 1 || bv.dim(0) != m) throw ShapeError("dense: bias must be [m]");
    bptr = bv.data.data();
    bias_id = bias->id;
  }

  Tensor out({B, m});
  for (std::size_t b = 0; b < B; ++b) {
    const double* xr = &xv.data[b * k];
    double* yr = &out.data[b * m];
    for (std::size_t i = 0; i < m; ++i) {
      const double* wr = &wv.data[i * k];
      double acc = has_bias ? bptr[i] : 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += wr[j] * xr[j];
      yr[i] = acc;
    }
  }

  const std::size_t ix = x.id, iw = weights.id;
  bool ng = g.needs_grad(ix) || g.needs_grad(iw) || (has_bias && g.needs_grad(bias_id));
  return g.make_node(std::move(out), ng, [ix, iw, bias_id, has_bias, B, k, m](Graph& gr, std::size_t self) {
    const Tensor& dy = gr.grad(self);
    const Tensor& xv2 = gr.value(ix);
    const Tensor& wv2 = gr.value(iw);
    if (gr.needs_grad(ix)) {
      Tensor& dx = gr.grad(ix);
      for (std::size_t b = 0; b < B; ++b) {
        const double* dyr = &dy.data[b * m];
        double* dxr = &dx.data[b * k];
        for (std::size_t i = 0; i < m; ++i) {
          const double* wr = &wv2.data[i * k];
          const double d = dyr[i];
          for (std::size_t j = 0; j < k; ++j) dxr[j] += d * wr[j];
        }
      }
    }
    if (gr.needs_grad(iw)) {
      Tensor& dw = gr.grad(iw);
      for (std::size_t b = 0; b < B; ++b) {
        const double* dyr = &dy.data[b * m];
        const double* xr = &xv2.data[b * k];
        for (std::size_t i = 0; i < m; ++i) {
          double* dwr = &dw.data[i * k];
          const double d = dyr[i];
          for (std::size_t j = 0; j < k; ++j) dwr[j] += d * xr[j];
        }
      }
    }
    if (has_bias && gr.needs_grad(bias_id)) {
      Tensor& db = gr.grad(bias_id);
      for (std::size_t b = 0; b < B; ++b) {
        const double* dyr = &dy.data[b * m];
        for (std::size_t i = 0; i < m; ++i) db[i] += dyr[i];
      }
    }
  });
}

}  // namespace

Var dense(Var x, Var weights, Var bias) { return dense_impl(x, weights, &bias); }
Var dense_nobias(Var x, Var weights) { return dense_impl(x, weights, nullptr); }

Var conv1d(Var x, Var kernels, Var bias) {
  Graph& g = same_graph(x, kernels);
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 3 || kv.rank() != 3) throw ShapeError("conv1d: expected x[B,C,W], k[F,C,R]");
  const std::size_t B = xv.dim(0), C = xv.dim(1), W = xv.dim(2);
  const std::size_t F = kv.dim(0), R = kv.dim(2);
  if (kv.dim(1) != C) throw ShapeError("conv1d: channel mismatch");
  if (bv.rank() != 1 || bv.dim(0) != F) throw ShapeError("conv1d: bias must be [F]");
  if (W < R) throw ShapeError("conv1d: input width smaller than kernel");
  const std::size_t OW = W - R + 1;

  Tensor out({B, F, OW});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F; ++f) {
      double* yr = &out.data[(b * F + f) * OW];
      for (std::size_t o = 0; o < OW; ++o) yr[o] = bv[f];
      for (std::size_t c = 0; c < C; ++c) {
        const double* xr = &xv.data[(b * C + c) * W];
        const double* kr = &kv.data[(f * C + c) * R];
        for (std::size_t o = 0; o < OW; ++o) {
          double acc = 0;
          for (std::size_t r = 0; r < R; ++r) acc += xr[o + r] * kr[r];
          yr[o] += acc;
        }
      }
    }
  }

  const std::size_t ix = x.id, ik = kernels.id, ib = bias.id;
  bool ng = g.needs_grad(ix) || g.needs_grad(ik) || g.needs_grad(ib);
  return g.make_node(std::move(out), ng, [ix, ik, ib, B, C, W, F, R, OW](Graph& gr, std::size_t self) {
    const Tensor& dy = gr.grad(self);
    const Tensor& xv2 = gr.value(ix);
    const Tensor& kv2 = gr.value(ik);
    if (gr.needs_grad(ix)) {
      Tensor& dx = gr.grad(ix);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t f = 0; f < F; ++f) {
          const double* dyr = &dy.data[(b * F + f) * OW];
          for (std::size_t c = 0; c < C; ++c) {
            double* dxr = &dx.data[(b * C + c) * W];
            const double* kr = &kv2.data[(f * C + c) * R];
            for (std::size_t o = 0; o < OW; ++o)
              for (std::size_t r = 0; r < R; ++r) dxr[o + r] += dyr[o] * kr[r];
          }
        }
    }
    if (gr.needs_grad(ik)) {
      Tensor& dk = gr.grad(ik);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t f = 0; f < F; ++f) {
          const double* dyr = &dy.data[(b * F + f) * OW];
          for (std::size_t c = 0; c < C; ++c) {
            const double* xr = &xv2.data[(b * C + c) * W];
            double* dkr = &dk.data[(f * C + c) * R];
            for (std::size_t o = 0; o < OW; ++o)
              for (std::size_t r = 0; r < R; ++r) dkr[r] += dyr[o] * xr[o + r];
          }
        }
    }
    if (gr.needs_grad(ib)) {
      Tensor& db = gr.grad(ib);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t f = 0; f < F; ++f) {
          const double* dyr = &dy.data[(b * F + f) * OW];
          for (std::size_t o = 0; o < OW; ++o) db[f] += dyr[o];
        }
    }
  });
}

Var maxpool1d(Var x) {
  Graph& g = *x.graph;
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ShapeError("maxpool1d: expected [B,C,W]");
  const std::size_t B = xv.dim(0), C = xv.dim(1), W = xv.dim(2);
  const std::size_t OW = W / 2;  // an odd trailing element is dropped

  Tensor out({B, C, OW});
  std::vector<std::size_t> argmax(B * C * OW);
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const double* xr = &xv.data[bc * W];
    double* yr = &out.data[bc * OW];
    for (std::size_t o = 0; o < OW; ++o) {
      const std::size_t i0 = 2 * o;
      // first index wins ties
      if (xr[i0] >= xr[i0 + 1]) {
        yr[o] = xr[i0];
        argmax[bc * OW + o] = bc * W + i0;
      } else {
        yr[o] = xr[i0 + 1];
        argmax[bc * OW + o] = bc * W + i0 + 1;
      }
    }
  }

  const std::size_t ix = x.id;
  return g.make_node(std::move(out), g.needs_grad(ix),
                     [ix, am = std::move(argmax)](Graph& gr, std::size_t self) {
                       const Tensor& dy = gr.grad(self);
                       Tensor& dx = gr.grad(ix);
                       for (std::size_t i = 0; i < dy.size(); ++i) dx[am[i]] += dy[i];
                     });
}

Var concat_cols(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(0) != bv.dim(0)) {
    throw ShapeError("concat_cols: expected [B,p] and [B,q]");
  }
  const std::size_t B = av.dim(0), p = av.dim(1), q = bv.dim(1);
  Tensor out({B, p + q});
  for (std::size_t r = 0; r < B; ++r) {
    std::copy_n(&av.data[r * p], p, &out.data[r * (p + q)]);
    std::copy_n(&bv.data[r * q], q, &out.data[r * (p + q) + p]);
  }
  const std::size_t ia = a.id, ib = b.id;
  return g.make_node(std::move(out), g.needs_grad(ia) || g.needs_grad(ib),
                     [ia, ib, B, p, q](Graph& gr, std::size_t self) {
                       const Tensor& dy = gr.grad(self);
                       if (gr.needs_grad(ia)) {
                         Tensor& da = gr.grad(ia);
                         for (std::size_t r = 0; r < B; ++r)
                           for (std::size_t j = 0; j < p; ++j) da[r * p + j] += dy[r * (p + q) + j];
                       }
                       if (gr.needs_grad(ib)) {
                         Tensor& db = gr.grad(ib);
                         for (std::size_t r = 0; r < B; ++r)
                           for (std::size_t j = 0; j < q; ++j) db[r * q + j] += dy[r * (p + q) + p + j];
                       }
                     });
}

Var slice_cols(Var x, std::size_t lo, std::size_t hi) {
  Graph& g = *x.graph;
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || hi > xv.dim(1) || lo >= hi) throw ShapeError("slice_cols: bad range");
  const std::size_t B = xv.dim(0), k = xv.dim(1), w = hi - lo;
  Tensor out({B, w});
  for (std::size_t r = 0; r < B; ++r) std::copy_n(&xv.data[r * k + lo], w, &out.data[r * w]);
  const std::size_t ix = x.id;
  return g.make_node(std::move(out), g.needs_grad(ix), [ix, lo, B, k, w](Graph& gr, std::size_t self) {
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(ix);
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t j = 0; j < w; ++j) dx[r * k + lo + j] += dy[r * w + j];
  });
}

Var timestep(Var x, std::size_t t) {
  Graph& g = *x.graph;
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || t >= xv.dim(2)) throw ShapeError("timestep: bad index");
  const std::size_t B = xv.dim(0), C = xv.dim(1), W = xv.dim(2);
  Tensor out({B, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) out[b * C + c] = xv[(b * C + c) * W + t];
  const std::size_t ix = x.id;
  return g.make_node(std::move(out), g.needs_grad(ix), [ix, t, B, C, W](Graph& gr, std::size_t self) {
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(ix);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) dx[(b * C + c) * W + t] += dy[b * C + c];
  });
}

Var reshape(Var x, Shape s) {
  Graph& g = *x.graph;
  if (numel(s) != x.value().size()) throw ShapeError("reshape: element count mismatch");
  Tensor out(std::move(s), x.value().data);
  const std::size_t ix = x.id;
  return g.make_node(std::move(out), g.needs_grad(ix), [ix](Graph& gr, std::size_t self) {
    accum(gr, ix, gr.grad(self).data);
  });
}

}  // namespace deeptrader::nn
