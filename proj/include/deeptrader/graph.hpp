#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "deeptrader/tensor.hpp"

namespace deeptrader::nn {

// One learnable tensor with its Adam state. Networks own Parameters;
// graphs bind them as leaves per forward pass.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor adam_m;
  Tensor adam_v;
  std::int64_t step_count = 0;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), adam_m(value.shape), adam_v(value.shape) {}
};

class Graph;

// Lightweight handle to a node in a Graph. Valid for the graph's lifetime.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
};

// Reverse-mode tape confined to one forward/backward pass on one thread.
// Nodes are appended in topological order; backward() sweeps in reverse.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Differentiable leaf (an input whose gradient is wanted).
  Var input(Tensor value);
  // Non-differentiable leaf.
  Var constant(Tensor value);
  // Leaf bound to a Parameter; repeated binds return the same node so the
  // gradient accumulates across every use in the pass.
  Var param(Parameter& p);

  // Seeds d(root)/d(root) = 1 (root must be scalar) and back-propagates.
  void backward(const Var& root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  Tensor& grad(std::size_t id);

  // Gradient of the scalar root w.r.t. a bound parameter; a zero tensor if
  // the parameter was never used in this graph.
  Tensor grad_of(const Parameter& p) const;
  std::vector<Tensor> grads_for(const std::vector<Parameter*>& params) const;

  std::size_t node_count() const { return nodes_.size(); }

  // --- internal builder API (used by the op free functions) ---
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily at backward time
    bool needs_grad = false;
    bool grad_alloc = false;
    std::function<void(Graph&, std::size_t)> back;  // may be empty for leaves
  };

  Var make_node(Tensor value, bool needs_grad, std::function<void(Graph&, std::size_t)> back);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  bool ran_backward() const { return ran_backward_; }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_params_;
  bool ran_backward_ = false;
};

// --- primitive ops ------------------------------------------------------

Var add(Var a, Var b);                 // elementwise, same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var square(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var cmul(Var a, const Tensor& c);      // elementwise by a constant tensor
Var cadd(Var a, const Tensor& c);
Var vtanh(Var a);
Var vsigmoid(Var a);
Var leaky_relu(Var a, double slope = 0.01);
Var sum(Var a);                        // -> scalar
Var mean(Var a);                       // -> scalar

// x:[B,k] W:[m,k] b:[m] -> [B,m]
Var dense(Var x, Var weights, Var bias);
Var dense_nobias(Var x, Var weights);

// x:[B,C,W] k:[F,C,R] b:[F] -> [B,F,W-R+1], valid cross-correlation
Var conv1d(Var x, Var kernels, Var bias);

// x:[B,C,W] -> [B,C,floor(W/2)], kernel 2 stride 2, ties to the first index
Var maxpool1d(Var x);

// [B,p] ++ [B,q] -> [B,p+q]
Var concat_cols(Var a, Var b);
// [B,k] -> [B,hi-lo]
Var slice_cols(Var x, std::size_t lo, std::size_t hi);
// [B,C,W] -> [B,C] at time t
Var timestep(Var x, std::size_t t);
// same numel, new shape
Var reshape(Var x, Shape s);

}  // namespace deeptrader::nn
