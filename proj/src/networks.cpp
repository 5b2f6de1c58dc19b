#include "deeptrader/networks.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace deeptrader {

std::string to_string(SeqKind k) { return k == SeqKind::cnn ? "CNN" : "LSTM"; }

SeqKind seq_kind_from_string(const std::string& s) {
  if (s == "CNN" || s == "cnn") return SeqKind::cnn;
  if (s == "LSTM" || s == "lstm") return SeqKind::lstm;
  throw std::invalid_argument("unknown sequential layer kind: " + s);
}

namespace nn {

Tensor pack_windows(std::span<const AgentState> states) {
  if (states.empty()) throw ShapeError("pack_windows: empty batch");
  const std::size_t B = states.size();
  const std::size_t n = states[0].window.size();
  Tensor out({B, 3, n});
  for (std::size_t b = 0; b < B; ++b) {
    const AgentState& s = states[b];
    if (s.window.size() != n) throw ShapeError("pack_windows: ragged windows");
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t c = 0; c < 3; ++c) out[(b * 3 + c) * n + t] = s.window[t][c];
  }
  return out;
}

Tensor pack_prev_actions(std::span<const AgentState> states) {
  Tensor out({states.size(), 1});
  for (std::size_t b = 0; b < states.size(); ++b) out[b] = states[b].prev_action;
  return out;
}

CnnSeq::CnnSeq(const std::string& prefix, RngStream& init_rng)
    : conv1(prefix + ".conv1", 32, 3, 3, init_rng),
      conv2(prefix + ".conv2", 32, 32, 3, init_rng),
      bn1(prefix + ".bn1", 32),
      bn2(prefix + ".bn2", 32) {}

Var CnnSeq::forward(Graph& g, Var x, Mode mode, RngStream* dropout_rng) {
  if (x.value().rank() != 3 || x.value().dim(2) < 5) throw ShapeError("cnn seq: window must be at least 5 wide");
  Var h = conv1.forward(g, x);
  h = bn1.forward(g, h, mode);
  h = leaky_relu(h, 0.01);
  h = drop.forward(g, h, mode, dropout_rng);
  h = conv2.forward(g, h);
  h = bn2.forward(g, h, mode);
  h = leaky_relu(h, 0.01);
  h = drop.forward(g, h, mode, dropout_rng);
  h = maxpool1d(h);
  const std::size_t B = h.value().dim(0);
  return reshape(h, {B, h.value().dim(1) * h.value().dim(2)});
}

void CnnSeq::collect(std::vector<Parameter*>& ps, std::vector<Tensor*>& bufs) {
  ps.push_back(&conv1.kernels);
  ps.push_back(&conv1.bias);
  ps.push_back(&bn1.gamma);
  ps.push_back(&bn1.beta);
  ps.push_back(&conv2.kernels);
  ps.push_back(&conv2.bias);
  ps.push_back(&bn2.gamma);
  ps.push_back(&bn2.beta);
  bufs.push_back(&bn1.running_mean);
  bufs.push_back(&bn1.running_var);
  bufs.push_back(&bn2.running_mean);
  bufs.push_back(&bn2.running_var);
}

LstmSeq::LstmSeq(const std::string& prefix, RngStream& init_rng)
    : l1(prefix + ".lstm1", kHidden, 3, init_rng), l2(prefix + ".lstm2", kHidden, kHidden, init_rng) {}

Var LstmSeq::forward(Graph& g, Var x, Mode mode, RngStream* dropout_rng) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || xv.dim(1) != 3 || xv.dim(2) == 0) throw ShapeError("lstm seq: expected [B,3,n]");
  const std::size_t B = xv.dim(0), n = xv.dim(2);

  // hidden/cell states start at zero for every window
  auto [h1, c1] = l1.zero_state(g, B);
  auto [h2, c2] = l2.zero_state(g, B);
  for (std::size_t t = 0; t < n; ++t) {
    Var xt = timestep(x, t);
    std::tie(h1, c1) = l1.step(g, xt, h1, c1);
    Var h1d = drop.forward(g, h1, mode, dropout_rng);
    std::tie(h2, c2) = l2.step(g, h1d, h2, c2);
  }
  return drop.forward(g, h2, mode, dropout_rng);
}

void LstmSeq::collect(std::vector<Parameter*>& ps, std::vector<Tensor*>&) {
  ps.push_back(&l1.weights);
  ps.push_back(&l1.bias);
  ps.push_back(&l2.weights);
  ps.push_back(&l2.bias);
}

}  // namespace nn

using nn::Var;

PolicyNet::PolicyNet(SeqKind kind, std::size_t window_size, RngStream& init_rng)
    : kind_(kind), n_(window_size) {
  if (kind_ == SeqKind::cnn) {
    if (n_ < 5) throw nn::ShapeError("cnn policy needs a window of at least 5");
    cnn_.emplace("policy.seq", init_rng);
  } else {
    lstm_.emplace("policy.seq", init_rng);
  }
  const std::size_t d = feature_dim() + 1;
  decision_ = nn::Parameter("policy.decision", nn::Tensor({1, d}));
  nn::kaiming_init(decision_.value, d, init_rng);
}

std::size_t PolicyNet::feature_dim() const {
  return kind_ == SeqKind::cnn ? nn::CnnSeq::out_dim(n_) : nn::LstmSeq::kHidden;
}

Var PolicyNet::forward(nn::Graph& g, Var window, Var prev_action, nn::Mode mode, RngStream* dropout_rng) {
  Var feat = kind_ == SeqKind::cnn ? cnn_->forward(g, window, mode, dropout_rng)
                                   : lstm_->forward(g, window, mode, dropout_rng);
  Var dec_in = nn::concat_cols(feat, prev_action);
  Var out = nn::dense_nobias(dec_in, g.param(decision_));
  return nn::vtanh(out);
}

double PolicyNet::act(const AgentState& state) {
  nn::Graph g;
  Var w = g.constant(nn::pack_windows(std::span<const AgentState>(&state, 1)));
  Var p = g.constant(nn::pack_prev_actions(std::span<const AgentState>(&state, 1)));
  return forward(g, w, p, nn::Mode::eval, nullptr).value()[0];
}

std::vector<nn::Parameter*> PolicyNet::params() {
  std::vector<nn::Parameter*> ps;
  std::vector<nn::Tensor*> bufs;
  if (cnn_) cnn_->collect(ps, bufs);
  if (lstm_) lstm_->collect(ps, bufs);
  ps.push_back(&decision_);
  return ps;
}

std::vector<nn::Tensor*> PolicyNet::buffers() {
  std::vector<nn::Parameter*> ps;
  std::vector<nn::Tensor*> bufs;
  if (cnn_) cnn_->collect(ps, bufs);
  if (lstm_) lstm_->collect(ps, bufs);
  return bufs;
}

QNet::QNet(SeqKind kind, std::size_t window_size, RngStream& init_rng) : kind_(kind), n_(window_size) {
  embed_ = nn::DenseLayer("q.embed", 3 * n_, 3 * n_ + 2, init_rng);
  if (kind_ == SeqKind::cnn) {
    if (n_ < 5) throw nn::ShapeError("cnn q-net needs a window of at least 5");
    cnn_.emplace("q.seq", init_rng);
  } else {
    lstm_.emplace("q.seq", init_rng);
  }
  const std::size_t d = (kind_ == SeqKind::cnn ? nn::CnnSeq::out_dim(n_) : nn::LstmSeq::kHidden) + 1;
  decision_ = nn::Parameter("q.decision", nn::Tensor({1, d}));
  nn::kaiming_init(decision_.value, d, init_rng);
}

Var QNet::forward(nn::Graph& g, Var window, Var prev_action, Var action, nn::Mode mode,
                  RngStream* dropout_rng) {
  const std::size_t B = window.value().dim(0);
  Var flat = nn::reshape(window, {B, 3 * n_});
  Var joined = nn::concat_cols(nn::concat_cols(flat, prev_action), action);  // [B, 3n+2]
  Var e = embed_.forward(g, joined);
  e = nn::leaky_relu(e, 0.01);
  e = embed_drop_.forward(g, e, mode, dropout_rng);
  Var seq_in = nn::reshape(e, {B, 3, n_});
  Var feat = kind_ == SeqKind::cnn ? cnn_->forward(g, seq_in, mode, dropout_rng)
                                   : lstm_->forward(g, seq_in, mode, dropout_rng);
  Var dec_in = nn::concat_cols(feat, prev_action);
  return nn::dense_nobias(dec_in, g.param(decision_));  // unbounded action-value
}

double QNet::value(const AgentState& state, double action) {
  nn::Graph g;
  Var w = g.constant(nn::pack_windows(std::span<const AgentState>(&state, 1)));
  Var p = g.constant(nn::pack_prev_actions(std::span<const AgentState>(&state, 1)));
  Var a = g.constant(nn::Tensor({1, 1}, std::vector<double>{action}));
  return forward(g, w, p, a, nn::Mode::eval, nullptr).value()[0];
}

std::vector<nn::Parameter*> QNet::params() {
  std::vector<nn::Parameter*> ps;
  std::vector<nn::Tensor*> bufs;
  ps.push_back(&embed_.weights);
  ps.push_back(&embed_.bias);
  if (cnn_) cnn_->collect(ps, bufs);
  if (lstm_) lstm_->collect(ps, bufs);
  ps.push_back(&decision_);
  return ps;
}

std::vector<nn::Tensor*> QNet::buffers() {
  std::vector<nn::Parameter*> ps;
  std::vector<nn::Tensor*> bufs;
  if (cnn_) cnn_->collect(ps, bufs);
  if (lstm_) lstm_->collect(ps, bufs);
  return bufs;
}

NetState capture_state(std::vector<nn::Parameter*> params, std::vector<nn::Tensor*> buffers) {
  NetState s;
  for (const nn::Parameter* p : params) {
    s.values.push_back(p->value);
    s.adam_m.push_back(p->adam_m);
    s.adam_v.push_back(p->adam_v);
    s.steps.push_back(p->step_count);
  }
  for (const nn::Tensor* b : buffers) s.buffers.push_back(*b);
  return s;
}

void restore_state(const NetState& s, std::vector<nn::Parameter*> params, std::vector<nn::Tensor*> buffers) {
  if (s.values.size() != params.size() || s.buffers.size() != buffers.size()) {
    throw std::invalid_argument("net state does not match network layout");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = s.values[i];
    params[i]->adam_m = s.adam_m[i];
    params[i]->adam_v = s.adam_v[i];
    params[i]->step_count = s.steps[i];
  }
  for (std::size_t i = 0; i < buffers.size(); ++i) *buffers[i] = s.buffers[i];
}

namespace {

constexpr char kSnapshotMagic[8] = {'D', 'T', 'S', 'N', 'A', 'P', '0', '1'};

void write_tensor(std::ofstream& out, const nn::Tensor& t) {
  const std::uint32_t rank = static_cast<std::uint32_t>(t.rank());
  out.write(reinterpret_cast<const char*>(&rank), sizeof rank);
  for (std::size_t d : t.shape) {
    const std::uint64_t dd = d;
    out.write(reinterpret_cast<const char*>(&dd), sizeof dd);
  }
  out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}

nn::Tensor read_tensor(std::ifstream& in) {
  std::uint32_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), sizeof rank);
  nn::Shape shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) {
    std::uint64_t d = 0;
    in.read(reinterpret_cast<char*>(&d), sizeof d);
    shape[i] = static_cast<std::size_t>(d);
  }
  nn::Tensor t(shape);
  in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated snapshot");
  return t;
}

}  // namespace

void save_snapshot(const std::string& path, const std::string& net_tag, SeqKind kind, std::size_t n,
                   std::vector<nn::Parameter*> params, std::vector<nn::Tensor*> buffers) {
  nlohmann::ordered_json manifest;
  manifest["net"] = net_tag;
  manifest["seq"] = to_string(kind);
  manifest["window"] = n;
  auto& tensors = manifest["tensors"] = nlohmann::ordered_json::array();
  for (const nn::Parameter* p : params) {
    tensors.push_back({{"name", p->name}, {"shape", p->value.shape}});
  }
  manifest["buffer_count"] = buffers.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write snapshot: " + path);
  out.write(kSnapshotMagic, sizeof kSnapshotMagic);
  const std::string mstr = manifest.dump();
  const std::uint64_t mlen = mstr.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof mlen);
  out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
  for (const nn::Parameter* p : params) write_tensor(out, p->value);
  for (const nn::Tensor* b : buffers) write_tensor(out, *b);
}

void load_snapshot(const std::string& path, const std::string& net_tag, SeqKind kind, std::size_t n,
                   std::vector<nn::Parameter*> params, std::vector<nn::Tensor*> buffers) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open snapshot: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kSnapshotMagic, sizeof magic) != 0) {
    throw std::runtime_error("not a snapshot file: " + path);
  }
  std::uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof mlen);
  std::string mstr(mlen, '\0');
  in.read(mstr.data(), static_cast<std::streamsize>(mlen));
  const auto manifest = nlohmann::json::parse(mstr);

  if (manifest.at("net").get<std::string>() != net_tag) throw std::runtime_error("snapshot net tag mismatch");
  if (seq_kind_from_string(manifest.at("seq").get<std::string>()) != kind) {
    throw std::runtime_error("snapshot sequential-layer kind mismatch");
  }
  if (manifest.at("window").get<std::size_t>() != n) throw std::runtime_error("snapshot window size mismatch");
  if (manifest.at("tensors").size() != params.size() ||
      manifest.at("buffer_count").get<std::size_t>() != buffers.size()) {
    throw std::runtime_error("snapshot layout mismatch");
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = manifest.at("tensors").at(i);
    if (entry.at("name").get<std::string>() != params[i]->name) {
      throw std::runtime_error("snapshot tensor name mismatch: " + params[i]->name);
    }
    nn::Tensor t = read_tensor(in);
    if (!t.same_shape(params[i]->value)) throw std::runtime_error("snapshot shape mismatch: " + params[i]->name);
    params[i]->value = std::move(t);
  }
  for (nn::Tensor* b : buffers) {
    nn::Tensor t = read_tensor(in);
    if (!t.same_shape(*b)) throw std::runtime_error("snapshot buffer shape mismatch");
    *b = std::move(t);
  }
}

}  // namespace deeptrader
