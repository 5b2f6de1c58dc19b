#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deeptrader/environment.hpp"
#include "deeptrader/layers.hpp"
#include "deeptrader/optim.hpp"

namespace deeptrader {

enum class SeqKind { cnn, lstm };

std::string to_string(SeqKind k);
SeqKind seq_kind_from_string(const std::string& s);

namespace nn {

// Pack agent states into network inputs: windows to [B,3,n] (rows are
// close/high/low, columns oldest to newest), previous actions to [B,1].
Tensor pack_windows(std::span<const AgentState> states);
Tensor pack_prev_actions(std::span<const AgentState> states);

// conv(3->32,k3) -> bn -> lrelu -> dropout -> conv(32->32,k3) -> bn ->
// lrelu -> dropout -> maxpool(2,2) -> flatten
struct CnnSeq {
  Conv1dLayer conv1, conv2;
  BatchNorm1d bn1, bn2;
  Dropout drop{0.2};

  CnnSeq() = default;
  CnnSeq(const std::string& prefix, RngStream& init_rng);

  Var forward(Graph& g, Var x, Mode mode, RngStream* dropout_rng);
  static std::size_t out_dim(std::size_t n) { return 32 * ((n - 4) / 2); }
  void collect(std::vector<Parameter*>& ps, std::vector<Tensor*>& bufs);
};

// Two stacked LSTM layers (128 hidden units each) with dropout after each;
// the feature vector is the final hidden state of the second layer. No
// batchnorm: its statistics do not compose with recurrence.
struct LstmSeq {
  static constexpr std::size_t kHidden = 128;
  LstmLayer l1, l2;
  Dropout drop{0.2};

  LstmSeq() = default;
  LstmSeq(const std::string& prefix, RngStream& init_rng);

  Var forward(Graph& g, Var x, Mode mode, RngStream* dropout_rng);
  static std::size_t out_dim(std::size_t) { return kHidden; }
  void collect(std::vector<Parameter*>& ps, std::vector<Tensor*>& bufs);
};

}  // namespace nn

// Policy network mu_theta: sequential information layer, decision-making
// layer (a dot product over the features joined with the previous action),
// then tanh. Output always lies in (-1,1).
class PolicyNet {
 public:
  PolicyNet(SeqKind kind, std::size_t window_size, RngStream& init_rng);

  nn::Var forward(nn::Graph& g, nn::Var window, nn::Var prev_action, nn::Mode mode,
                  RngStream* dropout_rng);

  // Deterministic single-state evaluation (eval mode, no gradients).
  double act(const AgentState& state);

  std::vector<nn::Parameter*> params();
  std::vector<nn::Tensor*> buffers();

  SeqKind kind() const { return kind_; }
  std::size_t window_size() const { return n_; }
  std::size_t feature_dim() const;

 private:
  SeqKind kind_;
  std::size_t n_;
  std::optional<nn::CnnSeq> cnn_;
  std::optional<nn::LstmSeq> lstm_;
  nn::Parameter decision_;  // [1, feature_dim+1]
};

// Q-network: an input embed (state + actions -> dense -> lrelu -> dropout
// -> reshape 3xn) feeding the same sequential/decision stack, no tanh.
class QNet {
 public:
  QNet(SeqKind kind, std::size_t window_size, RngStream& init_rng);

  nn::Var forward(nn::Graph& g, nn::Var window, nn::Var prev_action, nn::Var action, nn::Mode mode,
                  RngStream* dropout_rng);

  double value(const AgentState& state, double action);

  std::vector<nn::Parameter*> params();
  std::vector<nn::Tensor*> buffers();

  SeqKind kind() const { return kind_; }
  std::size_t window_size() const { return n_; }

 private:
  SeqKind kind_;
  std::size_t n_;
  nn::DenseLayer embed_;  // [3n, 3n+2]
  nn::Dropout embed_drop_{0.2};
  std::optional<nn::CnnSeq> cnn_;
  std::optional<nn::LstmSeq> lstm_;
  nn::Parameter decision_;
};

// Full in-memory training state: parameter values, Adam moments and
// batchnorm running statistics. Used for early-stopping restores.
struct NetState {
  std::vector<nn::Tensor> values;
  std::vector<nn::Tensor> adam_m;
  std::vector<nn::Tensor> adam_v;
  std::vector<std::int64_t> steps;
  std::vector<nn::Tensor> buffers;
};

NetState capture_state(std::vector<nn::Parameter*> params, std::vector<nn::Tensor*> buffers);
void restore_state(const NetState& s, std::vector<nn::Parameter*> params, std::vector<nn::Tensor*> buffers);

// Flat binary snapshot: JSON manifest (layer names, shapes, seq kind)
// followed by row-major little-endian 64-bit values per tensor.
void save_snapshot(const std::string& path, const std::string& net_tag, SeqKind kind, std::size_t n,
                   std::vector<nn::Parameter*> params, std::vector<nn::Tensor*> buffers);
// Fills an already-constructed net's tensors; throws on any mismatch.
void load_snapshot(const std::string& path, const std::string& net_tag, SeqKind kind, std::size_t n,
                   std::vector<nn::Parameter*> params, std::vector<nn::Tensor*> buffers);

}  // namespace deeptrader
