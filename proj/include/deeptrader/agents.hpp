#pragma once

#include <deque>
#include <memory>
#include <vector>

#include "deeptrader/networks.hpp"

namespace deeptrader {

struct ExplorationSchedule {
  double eps = 1.0;
  double decay = 0.9;
  double floor = 0.01;

  // eps <- max(decay * eps, floor), applied after each episode
  void step() { eps = std::max(decay * eps, floor); }
};

struct Transition {
  AgentState state;
  double action = 0;  // in [-1,1]
  double reward = 0;
};

// FIFO ring of transitions, strictly oldest-first eviction.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {}

  void push(Transition t);
  std::size_t size() const { return buf_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return buf_[i]; }

 private:
  std::size_t capacity_;
  std::deque<Transition> buf_;
};

// Mini-batch draw: without replacement for CNN nets; a uniformly random
// contiguous window for LSTM nets (hidden state is zeroed per window
// anyway, contiguity preserves the recurrent sampling convention).
// Returns empty when the memory holds fewer than b transitions.
std::vector<Transition> replay_sample(const ReplayMemory& memory, std::size_t b, SeqKind kind,
                                      RngStream& rng);

struct GaussianSample {
  double executed = 0;  // clipped to [-1,1]
  double raw = 0;       // pre-clip draw, enters the log-probability
  double mean = 0;
};

// a ~ N(mu_theta(s), eps^2); eps == 0 collapses to the mean exactly.
GaussianSample sample_action_gaussian(PolicyNet& policy, const AgentState& state, double eps,
                                      RngStream& rng);

// -(raw - mu)^2 / (2 eps^2) - log(eps sqrt(2 pi)); requires eps > 0
double gaussian_log_prob(double raw, double mu, double eps);

// clip(mu_theta(s) + eps * W, -1, 1) with W ~ U[-1,1)
double ac_explore_action(PolicyNet& policy, const AgentState& state, double eps, RngStream& rng);

// Common driver interface for the backtester. One agent per environment,
// strictly sequential.
class Agent {
 public:
  virtual ~Agent() = default;

  // Behavior action during training or test-time refitting.
  virtual double act(const AgentState& state) = 0;
  // Deterministic greedy action (eps = 0, eval mode, no side effects).
  virtual double act_greedy(const AgentState& state) = 0;
  // Reward feedback for the previous act(); may trigger learning updates.
  virtual void observe(const AgentState& state, double executed_action, double reward) = 0;
  // Flush pending learning state and decay exploration.
  virtual void end_episode() = 0;
  // Switch to out-of-sample behavior (exploration per algorithm's rule).
  virtual void enter_test_phase() = 0;

  virtual std::vector<NetState> snapshot() = 0;
  virtual void restore(const std::vector<NetState>& s) = 0;

  virtual std::size_t rejected_updates() const = 0;
};

struct AgentHyperparams {
  double alpha_actor = 0.0001;
  double alpha_critic = 0.001;
  std::size_t batch_size = 128;
  std::size_t replay_capacity = 1000;
  ExplorationSchedule exploration{};
  nn::OptimizerConfig optimizer{};  // lr is overridden per network
};

// Actor-only stochastic policy gradient: actions drawn from a Gaussian
// with the exploration rate as its standard deviation; one gradient-ascent
// step on sum(r * log pi) whenever the buffer fills or the episode ends.
class PgAgent : public Agent {
 public:
  PgAgent(SeqKind kind, std::size_t window_size, AgentHyperparams hp, std::uint64_t seed);

  double act(const AgentState& state) override;
  double act_greedy(const AgentState& state) override { return policy_.act(state); }
  void observe(const AgentState& state, double executed_action, double reward) override;
  void end_episode() override;
  void enter_test_phase() override { test_phase_ = true; }

  std::vector<NetState> snapshot() override;
  void restore(const std::vector<NetState>& s) override;
  std::size_t rejected_updates() const override { return rejected_; }

  PolicyNet& policy() { return policy_; }
  const ExplorationSchedule& schedule() const { return hp_.exploration; }
  double behavior_eps() const;

 private:
  void flush();

  AgentHyperparams hp_;
  PolicyNet policy_;
  nn::OptimizerConfig actor_opt_;
  RngStream explore_rng_;
  RngStream dropout_rng_;

  struct BufferEntry {
    AgentState state;
    double raw = 0;
    double reward = 0;
  };
  std::vector<BufferEntry> buffer_;
  double pending_raw_ = 0;
  bool has_pending_ = false;
  bool test_phase_ = false;
  std::size_t rejected_ = 0;
};

// Off-policy deterministic actor-critic: uniform exploration noise, replay
// memory, and per-step critic (MSE to the immediate reward) and actor
// (ascent on Q(s, mu(s))) updates once the memory can fill a batch.
class AcAgent : public Agent {
 public:
  AcAgent(SeqKind kind, std::size_t window_size, AgentHyperparams hp, std::uint64_t seed);

  double act(const AgentState& state) override;
  double act_greedy(const AgentState& state) override { return policy_.act(state); }
  void observe(const AgentState& state, double executed_action, double reward) override;
  void end_episode() override;
  void enter_test_phase() override { test_phase_ = true; }

  std::vector<NetState> snapshot() override;
  void restore(const std::vector<NetState>& s) override;
  std::size_t rejected_updates() const override { return rejected_; }

  PolicyNet& policy() { return policy_; }
  QNet& qnet() { return qnet_; }
  ReplayMemory& memory() { return memory_; }

 private:
  void update_networks();

  AgentHyperparams hp_;
  PolicyNet policy_;
  QNet qnet_;
  nn::OptimizerConfig actor_opt_;
  nn::OptimizerConfig critic_opt_;
  ReplayMemory memory_;
  RngStream explore_rng_;
  RngStream dropout_rng_;
  RngStream replay_rng_;
  bool test_phase_ = false;
  std::size_t rejected_ = 0;
};

// Free-function building blocks used by both agents (exposed for tests).
bool pg_update(PolicyNet& policy, std::vector<Transition> batch_raw, double eps,
               const nn::OptimizerConfig& opt, RngStream& dropout_rng);
bool q_update(QNet& qnet, const std::vector<Transition>& batch, const nn::OptimizerConfig& opt,
              RngStream& dropout_rng);
bool policy_update_ddpg(PolicyNet& policy, QNet& qnet, const std::vector<Transition>& batch,
                        const nn::OptimizerConfig& opt, RngStream& dropout_rng);

}  // namespace deeptrader
