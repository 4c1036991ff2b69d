#include "intent/nn.hpp"

#include <cmath>
#include <numeric>

#include "intent/errors.hpp"

namespace intent::nn {

const char* act_name(Act a) { return a == Act::Tanh ? "tanh" : "relu"; }

Act act_from_name(const std::string& name) {
  if (name == "tanh") return Act::Tanh;
  if (name == "relu") return Act::Relu;
  throw ConfigError("unknown activation: " + name);
}

ParamPack::ParamPack(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
  Eigen::Index total = 0;
  offsets_.reserve(blocks_.size());
  for (const Block& b : blocks_) {
    if (b.rows <= 0 || b.cols <= 0) throw ShapeError("empty parameter block: " + b.name);
    offsets_.push_back(total);
    total += b.rows * b.cols;
  }
  data_ = VectorXd::Zero(total);
}

int ParamPack::block_index(const std::string& name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) return static_cast<int>(i);
  }
  throw ShapeError("no parameter block named " + name);
}

void ParamPack::check_storage(const VectorXd& storage) const {
  if (storage.size() != data_.size()) {
    throw ShapeError("storage size does not match parameter layout");
  }
}

Eigen::Map<MatrixXd> ParamPack::map_mat(VectorXd& storage, int block) const {
  check_storage(storage);
  const Block& b = blocks_[static_cast<std::size_t>(block)];
  return {storage.data() + offsets_[static_cast<std::size_t>(block)], b.rows, b.cols};
}

Eigen::Map<const MatrixXd> ParamPack::map_mat(const VectorXd& storage, int block) const {
  check_storage(storage);
  const Block& b = blocks_[static_cast<std::size_t>(block)];
  return {storage.data() + offsets_[static_cast<std::size_t>(block)], b.rows, b.cols};
}

Eigen::Map<VectorXd> ParamPack::map_vec(VectorXd& storage, int block) const {
  check_storage(storage);
  const Block& b = blocks_[static_cast<std::size_t>(block)];
  if (b.cols != 1) throw ShapeError("block is not a vector: " + b.name);
  return {storage.data() + offsets_[static_cast<std::size_t>(block)], b.rows};
}

Eigen::Map<const VectorXd> ParamPack::map_vec(const VectorXd& storage, int block) const {
  check_storage(storage);
  const Block& b = blocks_[static_cast<std::size_t>(block)];
  if (b.cols != 1) throw ShapeError("block is not a vector: " + b.name);
  return {storage.data() + offsets_[static_cast<std::size_t>(block)], b.rows};
}

namespace {

void glorot_fill(Eigen::Map<MatrixXd> w, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      w(r, c) = rng.uniform(-limit, limit);
    }
  }
}

}  // namespace

FfnnParams init_ffnn(const std::vector<int>& dims, std::uint64_t seed) {
  std::vector<Act> acts;
  for (std::size_t l = 0; l + 2 < dims.size(); ++l) {
    acts.push_back(l == 0 ? Act::Tanh : Act::Relu);
  }
  return init_ffnn(dims, acts, seed);
}

FfnnParams init_ffnn(const std::vector<int>& dims, const std::vector<Act>& acts,
                     std::uint64_t seed) {
  if (dims.size() < 2) throw ShapeError("network needs at least input and output dims");
  for (int d : dims) {
    if (d <= 0) throw ShapeError("layer dims must be positive");
  }
  if (dims.back() != 1) throw ShapeError("output layer must have a single unit");
  if (acts.size() + 2 != dims.size()) {
    throw ShapeError("need one activation tag per hidden layer");
  }

  FfnnParams p;
  p.dims = dims;
  p.acts = acts;

  std::vector<ParamPack::Block> blocks;
  const int n_hidden = static_cast<int>(dims.size()) - 2;
  for (int l = 0; l < n_hidden; ++l) {
    blocks.push_back({"U" + std::to_string(l), dims[l + 1], dims[l]});
    blocks.push_back({"a" + std::to_string(l), dims[l + 1], 1});
  }
  blocks.push_back({"v", dims[dims.size() - 2], 1});
  blocks.push_back({"b", 1, 1});
  p.pack = ParamPack(std::move(blocks));

  Rng rng(seed);
  for (int l = 0; l < n_hidden; ++l) {
    glorot_fill(p.weight(l), dims[l], dims[l + 1], rng);
  }
  {
    auto v = p.pack.mat(2 * n_hidden);
    glorot_fill(v, dims[dims.size() - 2], 1, rng);
  }
  return p;
}

namespace {

VectorXd apply_act(Act a, const VectorXd& z) {
  if (a == Act::Tanh) return z.array().tanh();
  return z.array().max(0.0);
}

// Derivative of the activation expressed through pre-activation z and
// activation value h. relu'(0) is taken as 0.
VectorXd act_deriv(Act a, const VectorXd& z, const VectorXd& h) {
  if (a == Act::Tanh) return 1.0 - h.array().square();
  return (z.array() > 0.0).cast<double>();
}

}  // namespace

VectorXd draw_dropout_mask(Eigen::Index n, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  const double keep = 1.0 - rate;
  VectorXd m(n);
  for (Eigen::Index i = 0; i < n; ++i) m[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return m;
}

ForwardTrace ffnn_forward_masked(const FfnnParams& params, const VectorXd& x,
                                 const VectorXd& drop) {
  if (x.size() != params.input_dim()) {
    throw ShapeError("input has dim " + std::to_string(x.size()) + ", network expects " +
                     std::to_string(params.input_dim()));
  }
  if (!x.allFinite()) throw NumericError("non-finite input to ffnn_forward");

  ForwardTrace t;
  t.x = x;
  const int n_hidden = params.n_hidden();
  if (drop.size() > 0) {
    if (n_hidden == 0) throw ShapeError("dropout needs a hidden layer");
    if (drop.size() != params.dims[1]) throw ShapeError("dropout mask has wrong width");
    t.drop = drop;
  }
  t.z.resize(static_cast<std::size_t>(n_hidden));
  t.h.resize(static_cast<std::size_t>(n_hidden));
  t.out.resize(static_cast<std::size_t>(n_hidden));

  const VectorXd* cur = &x;
  for (int l = 0; l < n_hidden; ++l) {
    t.z[l] = params.bias(l) + params.weight(l) * (*cur);
    t.h[l] = apply_act(params.acts[l], t.z[l]);
    if (l == 0 && t.drop.size() > 0) {
      t.out[0] = t.h[0].cwiseProduct(t.drop);
    } else {
      t.out[l] = t.h[l];
    }
    cur = &t.out[l];
  }

  t.o = params.out_bias() + params.out_weight().dot(*cur);
  t.yhat = sigmoid(t.o);
  return t;
}

ForwardTrace ffnn_forward(const FfnnParams& params, const VectorXd& x, double dropout_rate,
                          Rng* rng) {
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
  VectorXd drop;
  if (rng != nullptr && dropout_rate > 0.0 && params.n_hidden() > 0) {
    drop = draw_dropout_mask(params.dims[1], dropout_rate, *rng);
  }
  return ffnn_forward_masked(params, x, drop);
}

double cross_entropy(double yhat, int y) {
  if (y != 0 && y != 1) throw DataError("label must be 0 or 1, got " + std::to_string(y));
  constexpr double kClamp = 1e-12;
  const double p = std::min(1.0 - kClamp, std::max(kClamp, yhat));
  return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

GradientSet ffnn_backward(const ForwardTrace& trace, int y, const FfnnParams& params) {
  if (y != 0 && y != 1) throw DataError("label must be 0 or 1");
  const int n_hidden = params.n_hidden();
  if (static_cast<int>(trace.z.size()) != n_hidden ||
      trace.x.size() != params.input_dim()) {
    throw ShapeError("trace does not match network architecture");
  }

  GradientSet g;
  g.flat = VectorXd::Zero(params.pack.size());
  const ParamPack& pk = params.pack;

  const double d_o = trace.yhat - static_cast<double>(y);
  pk.map_vec(g.flat, 2 * n_hidden).noalias() =
      d_o * (n_hidden > 0 ? trace.out[n_hidden - 1] : trace.x);
  pk.map_vec(g.flat, 2 * n_hidden + 1)[0] = d_o;

  VectorXd delta = d_o * params.out_weight();  // dL/d(out of last hidden layer)
  for (int l = n_hidden - 1; l >= 0; --l) {
    if (l == 0 && trace.drop.size() > 0) delta = delta.cwiseProduct(trace.drop);
    const VectorXd dz = delta.cwiseProduct(act_deriv(params.acts[l], trace.z[l], trace.h[l]));
    const VectorXd& below = l == 0 ? trace.x : trace.out[l - 1];
    pk.map_mat(g.flat, 2 * l).noalias() = dz * below.transpose();
    pk.map_vec(g.flat, 2 * l + 1) = dz;
    if (l > 0) delta.noalias() = params.weight(l).transpose() * dz;
  }
  return g;
}

AdamState::AdamState(Eigen::Index n, AdamHyper h) : m(VectorXd::Zero(n)), v(VectorXd::Zero(n)), hyper(h) {}

void adam_step(VectorXd& theta, const VectorXd& grad, AdamState& state) {
  if (theta.size() != grad.size() || theta.size() != state.m.size()) {
    throw ShapeError("adam_step: parameter, gradient and state sizes differ");
  }
  if (!grad.allFinite()) throw NumericError("non-finite gradient in adam_step");

  const AdamHyper& h = state.hyper;
  state.t += 1;
  state.m = h.beta1 * state.m + (1.0 - h.beta1) * grad;
  state.v = h.beta2 * state.v + (1.0 - h.beta2) * grad.cwiseProduct(grad);
  const double mc = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double vc = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  theta.array() -= h.step_size * (state.m.array() / mc) /
                   ((state.v.array() / vc).sqrt() + h.epsilon);
}

}  // namespace intent::nn
