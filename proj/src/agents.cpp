#include "deeptrader/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace deeptrader {

using nn::Graph;
using nn::Mode;
using nn::Tensor;
using nn::Var;

void ReplayMemory::push(Transition t) {
  buf_.push_back(std::move(t));
  if (buf_.size() > capacity_) buf_.pop_front();
}

std::vector<Transition> replay_sample(const ReplayMemory& memory, std::size_t b, SeqKind kind,
                                      RngStream& rng) {
  if (b == 0 || memory.size() < b) return {};  // not ready, no update this step
  std::vector<Transition> batch;
  batch.reserve(b);
  if (kind == SeqKind::lstm) {
    // contiguous window, uniformly random start
    const std::size_t start = rng.index(memory.size() - b + 1);
    for (std::size_t i = 0; i < b; ++i) batch.push_back(memory[start + i]);
  } else {
    // uniform without replacement (partial Fisher-Yates)
    std::vector<std::size_t> idx(memory.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t j = i + rng.index(idx.size() - i);
      std::swap(idx[i], idx[j]);
      batch.push_back(memory[idx[i]]);
    }
  }
  return batch;
}

GaussianSample sample_action_gaussian(PolicyNet& policy, const AgentState& state, double eps,
                                      RngStream& rng) {
  if (eps < 0) throw std::invalid_argument("exploration rate must be non-negative");
  GaussianSample s;
  s.mean = policy.act(state);
  s.raw = eps == 0 ? s.mean : s.mean + eps * rng.normal();
  s.executed = std::clamp(s.raw, -1.0, 1.0);
  return s;
}

double gaussian_log_prob(double raw, double mu, double eps) {
  if (!(eps > 0)) throw std::domain_error("log-probability undefined for eps == 0");
  const double d = raw - mu;
  return -d * d / (2.0 * eps * eps) - std::log(eps * std::sqrt(2.0 * 3.14159265358979323846));
}

double ac_explore_action(PolicyNet& policy, const AgentState& state, double eps, RngStream& rng) {
  const double mu = policy.act(state);
  const double noise = eps * rng.uniform(-1.0, 1.0);
  return std::clamp(mu + noise, -1.0, 1.0);
}

namespace {

struct PackedBatch {
  Tensor windows;       // [B,3,n]
  Tensor prev_actions;  // [B,1]
  Tensor actions;       // [B,1]
  Tensor rewards;       // [B,1]
  std::size_t size = 0;
};

PackedBatch pack(const std::vector<Transition>& batch) {
  PackedBatch p;
  p.size = batch.size();
  std::vector<AgentState> states;
  states.reserve(batch.size());
  for (const Transition& t : batch) states.push_back(t.state);
  p.windows = nn::pack_windows(states);
  p.prev_actions = nn::pack_prev_actions(states);
  p.actions = Tensor({batch.size(), 1});
  p.rewards = Tensor({batch.size(), 1});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    p.actions[i] = batch[i].action;
    p.rewards[i] = batch[i].reward;
  }
  return p;
}

// batchnorm train mode needs at least two rows; a final one-row flush
// falls back to eval statistics
Mode batch_mode(std::size_t b) { return b >= 2 ? Mode::train : Mode::eval; }

}  // namespace

bool pg_update(PolicyNet& policy, std::vector<Transition> batch_raw, double eps,
               const nn::OptimizerConfig& opt, RngStream& dropout_rng) {
  if (batch_raw.empty()) return true;
  if (!(eps > 0)) throw std::domain_error("pg_update needs eps > 0 for the score function");
  PackedBatch p = pack(batch_raw);

  Graph g;
  Var w = g.constant(std::move(p.windows));
  Var pa = g.constant(std::move(p.prev_actions));
  Var mu = policy.forward(g, w, pa, batch_mode(p.size), &dropout_rng);

  // log pi(raw | mu, eps) = -(raw - mu)^2 / (2 eps^2) + const
  Var diff = nn::cadd(nn::scale(mu, -1.0), p.actions);
  Var logp = nn::add_scalar(nn::scale(nn::square(diff), -1.0 / (2.0 * eps * eps)),
                            -std::log(eps * std::sqrt(2.0 * 3.14159265358979323846)));
  Var objective = nn::sum(nn::cmul(logp, p.rewards));
  g.backward(objective);

  auto params = policy.params();
  return nn::adam_step(params, g.grads_for(params), opt, /*maximize=*/true);
}

bool q_update(QNet& qnet, const std::vector<Transition>& batch, const nn::OptimizerConfig& opt,
              RngStream& dropout_rng) {
  if (batch.empty()) return true;
  PackedBatch p = pack(batch);

  Graph g;
  Var w = g.constant(std::move(p.windows));
  Var pa = g.constant(std::move(p.prev_actions));
  Var a = g.constant(std::move(p.actions));
  Var q = qnet.forward(g, w, pa, a, batch_mode(p.size), &dropout_rng);

  Tensor neg_rewards = p.rewards;
  for (double& v : neg_rewards.data) v = -v;
  Var loss = nn::mean(nn::square(nn::cadd(q, neg_rewards)));
  g.backward(loss);

  auto params = qnet.params();
  return nn::adam_step(params, g.grads_for(params), opt, /*maximize=*/false);
}

bool policy_update_ddpg(PolicyNet& policy, QNet& qnet, const std::vector<Transition>& batch,
                        const nn::OptimizerConfig& opt, RngStream& dropout_rng) {
  if (batch.empty()) return true;
  PackedBatch p = pack(batch);

  Graph g;
  Var w = g.constant(std::move(p.windows));
  Var pa = g.constant(std::move(p.prev_actions));
  const Mode mode = batch_mode(p.size);
  Var mu = policy.forward(g, w, pa, mode, &dropout_rng);
  Var q = qnet.forward(g, w, pa, mu, mode, &dropout_rng);
  Var objective = nn::mean(q);
  g.backward(objective);

  // critic parameters stay frozen: only the policy takes a step
  auto params = policy.params();
  return nn::adam_step(params, g.grads_for(params), opt, /*maximize=*/true);
}

PgAgent::PgAgent(SeqKind kind, std::size_t window_size, AgentHyperparams hp, std::uint64_t seed)
    : hp_(hp),
      policy_([&] {
        RngStream init(seed, "init");
        return PolicyNet(kind, window_size, init);
      }()),
      actor_opt_(hp.optimizer),
      explore_rng_(seed, "exploration"),
      dropout_rng_(seed, "dropout") {
  actor_opt_.lr = hp_.alpha_actor;
  actor_opt_.validate();
  if (hp_.batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

double PgAgent::behavior_eps() const { return test_phase_ ? hp_.exploration.floor : hp_.exploration.eps; }

double PgAgent::act(const AgentState& state) {
  GaussianSample s = sample_action_gaussian(policy_, state, behavior_eps(), explore_rng_);
  pending_raw_ = s.raw;
  has_pending_ = true;
  return s.executed;
}

void PgAgent::observe(const AgentState& state, double, double reward) {
  if (!has_pending_) throw std::logic_error("observe() without a matching act()");
  buffer_.push_back({state, pending_raw_, reward});
  has_pending_ = false;
  if (buffer_.size() >= hp_.batch_size) flush();
}

void PgAgent::flush() {
  if (buffer_.empty()) return;
  const double eps = behavior_eps();
  if (!(eps > 0)) {
    // zero-variance density has no score function; drop the batch
    buffer_.clear();
    return;
  }
  std::vector<Transition> batch;
  batch.reserve(buffer_.size());
  for (const BufferEntry& e : buffer_) batch.push_back({e.state, e.raw, e.reward});
  buffer_.clear();
  if (!pg_update(policy_, std::move(batch), eps, actor_opt_, dropout_rng_)) ++rejected_;
}

void PgAgent::end_episode() {
  flush();
  if (!test_phase_) hp_.exploration.step();
}

std::vector<NetState> PgAgent::snapshot() {
  return {capture_state(policy_.params(), policy_.buffers())};
}

void PgAgent::restore(const std::vector<NetState>& s) {
  if (s.size() != 1) throw std::invalid_argument("pg agent expects one net state");
  restore_state(s[0], policy_.params(), policy_.buffers());
}

AcAgent::AcAgent(SeqKind kind, std::size_t window_size, AgentHyperparams hp, std::uint64_t seed)
    : hp_(hp),
      policy_([&] {
        RngStream init(seed, "init");
        return PolicyNet(kind, window_size, init);
      }()),
      qnet_([&] {
        RngStream init(seed, "init-critic");
        return QNet(kind, window_size, init);
      }()),
      actor_opt_(hp.optimizer),
      critic_opt_(hp.optimizer),
      memory_(hp.replay_capacity),
      explore_rng_(seed, "exploration"),
      dropout_rng_(seed, "dropout"),
      replay_rng_(seed, "replay") {
  actor_opt_.lr = hp_.alpha_actor;
  critic_opt_.lr = hp_.alpha_critic;
  actor_opt_.validate();
  critic_opt_.validate();
  if (hp_.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (hp_.replay_capacity < hp_.batch_size) throw std::invalid_argument("replay memory smaller than batch");
}

double AcAgent::act(const AgentState& state) {
  if (test_phase_) return policy_.act(state);  // eps = 0 out-of-sample
  return ac_explore_action(policy_, state, hp_.exploration.eps, explore_rng_);
}

void AcAgent::observe(const AgentState& state, double executed_action, double reward) {
  memory_.push({state, executed_action, reward});
  update_networks();
}

void AcAgent::update_networks() {
  std::vector<Transition> batch = replay_sample(memory_, hp_.batch_size, policy_.kind(), replay_rng_);
  if (batch.empty()) return;  // warm-fill
  if (!q_update(qnet_, batch, critic_opt_, dropout_rng_)) ++rejected_;
  if (!policy_update_ddpg(policy_, qnet_, batch, actor_opt_, dropout_rng_)) ++rejected_;
}

void AcAgent::end_episode() {
  if (!test_phase_) hp_.exploration.step();
}

std::vector<NetState> AcAgent::snapshot() {
  return {capture_state(policy_.params(), policy_.buffers()),
          capture_state(qnet_.params(), qnet_.buffers())};
}

void AcAgent::restore(const std::vector<NetState>& s) {
  if (s.size() != 2) throw std::invalid_argument("ac agent expects two net states");
  restore_state(s[0], policy_.params(), policy_.buffers());
  restore_state(s[1], qnet_.params(), qnet_.buffers());
}

}  // namespace deeptrader
