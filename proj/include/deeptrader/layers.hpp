#pragma once

#include <utility>

#include "deeptrader/graph.hpp"
#include "deeptrader/rng.hpp"

namespace deeptrader::nn {

enum class Mode { train, eval };

// Kaiming draws: N(0, 2/fan_in). Biases stay zero.
void kaiming_init(Tensor& weights, std::size_t fan_in, RngStream& rng);

struct DenseLayer {
  Parameter weights;  // [m,k]
  Parameter bias;     // [m]

  DenseLayer() = default;
  DenseLayer(std::string name, std::size_t out_dim, std::size_t in_dim, RngStream& rng);
  Var forward(Graph& g, Var x) { return dense(x, g.param(weights), g.param(bias)); }
};

struct Conv1dLayer {
  Parameter kernels;  // [F,C,R]
  Parameter bias;     // [F]

  Conv1dLayer() = default;
  Conv1dLayer(std::string name, std::size_t out_ch, std::size_t in_ch, std::size_t ksize, RngStream& rng);
  Var forward(Graph& g, Var x) { return conv1d(x, g.param(kernels), g.param(bias)); }
};

// Per-feature standardization over the batch (and width, for [B,C,W]
// inputs), with learned scale/shift and running statistics for eval mode.
class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(std::string name, std::size_t features);

  Var forward(Graph& g, Var x, Mode mode);

  Parameter gamma;  // scale, init 1
  Parameter beta;   // shift, init 0
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;  // new = (1-momentum)*old + momentum*batch
  double eps = 1e-8;

 private:
  std::size_t features_ = 0;
};

// Inverted dropout: train zeroes with probability p and scales survivors
// by 1/(1-p); eval is an exact identity. rng may be null in eval mode.
struct Dropout {
  double p = 0.2;
  Var forward(Graph& g, Var x, Mode mode, RngStream* rng) const;
};

// Single LSTM layer: gates [i,f,o,g] from one affine map of [h_prev; x].
struct LstmLayer {
  Parameter weights;  // [4H, H+in]
  Parameter bias;     // [4H]
  std::size_t hidden = 0;
  std::size_t in_dim = 0;

  LstmLayer() = default;
  LstmLayer(std::string name, std::size_t hidden_dim, std::size_t input_dim, RngStream& rng);

  // One step: x[B,in], h[B,H], c[B,H] -> (h', c'). Built from primitive ops,
  // so backpropagation through time falls out of the tape.
  std::pair<Var, Var> step(Graph& g, Var x, Var h_prev, Var c_prev);

  // Zero initial states for a batch of B sequences.
  std::pair<Var, Var> zero_state(Graph& g, std::size_t batch) const;
};

}  // namespace deeptrader::nn
