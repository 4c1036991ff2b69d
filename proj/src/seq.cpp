#include "intent/seq.hpp"

#include <array>
#include <cmath>

#include "intent/errors.hpp"

namespace intent::seq {

namespace {

void glorot_fill(Eigen::Map<MatrixXd> w, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      w(r, c) = rng.uniform(-limit, limit);
    }
  }
}

void check_dims(int input_dim, int hidden) {
  if (input_dim <= 0 || hidden <= 0) throw ShapeError("dims must be positive");
}

}  // namespace

RnnParams init_rnn(int input_dim, int hidden, std::uint64_t seed) {
  check_dims(input_dim, hidden);
  RnnParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.pack = nn::ParamPack({{"U", hidden, input_dim},
                          {"W", hidden, hidden},
                          {"a", hidden, 1},
                          {"Ud", hidden, hidden},
                          {"ad", hidden, 1},
                          {"v", hidden, 1},
                          {"b", 1, 1}});
  Rng rng(seed);
  glorot_fill(p.U(), input_dim, hidden, rng);
  glorot_fill(p.W(), hidden, hidden, rng);
  glorot_fill(p.Ud(), hidden, hidden, rng);
  {
    auto v = p.pack.mat(5);
    glorot_fill(v, hidden, 1, rng);
  }
  return p;
}

LstmParams init_lstm(int input_dim, int hidden, std::uint64_t seed) {
  check_dims(input_dim, hidden);
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  std::vector<nn::ParamPack::Block> blocks;
  const char* gates = "fgsq";
  for (int g = 0; g < 4; ++g) {
    const std::string tag(1, gates[g]);
    blocks.push_back({"U" + tag, hidden, input_dim});
    blocks.push_back({"W" + tag, hidden, hidden});
    blocks.push_back({"a" + tag, hidden, 1});
  }
  blocks.push_back({"Ud", hidden, hidden});
  blocks.push_back({"ad", hidden, 1});
  blocks.push_back({"v", hidden, 1});
  blocks.push_back({"b", 1, 1});
  p.pack = nn::ParamPack(std::move(blocks));

  Rng rng(seed);
  for (int g = 0; g < 4; ++g) {
    glorot_fill(p.gate_U(g), input_dim, hidden, rng);
    glorot_fill(p.gate_W(g), hidden, hidden, rng);
  }
  glorot_fill(p.Ud(), hidden, hidden, rng);
  {
    auto v = p.pack.mat(14);
    glorot_fill(v, hidden, 1, rng);
  }
  return p;
}

namespace {

// Shared head: dense ReLU layer on (possibly dropped-out) h(tau), then the
// sigmoid output unit.
template <typename Params>
void run_head(const Params& p, SequenceTrace& t, const VectorXd& drop) {
  VectorXd h_tau = t.H.row(t.H.rows() - 1).transpose();
  if (drop.size() > 0) {
    if (drop.size() != h_tau.size()) throw ShapeError("dropout mask has wrong width");
    t.drop = drop;
    h_tau = h_tau.cwiseProduct(t.drop);
  }
  t.dense_z = p.ad() + p.Ud() * h_tau;
  t.dense_h = t.dense_z.array().max(0.0);
  t.o = p.b() + p.v().dot(t.dense_h);
  t.yhat = nn::sigmoid(t.o);
}

// Backward through the head; returns dL/dh(tau) and writes head gradients.
template <typename Params>
VectorXd head_backward(const Params& p, const SequenceTrace& t, int y, VectorXd& gflat,
                       int ud_block) {
  const nn::ParamPack& pk = p.pack;
  const double d_o = t.yhat - static_cast<double>(y);
  pk.map_vec(gflat, ud_block + 2).noalias() = d_o * t.dense_h;  // v
  pk.map_vec(gflat, ud_block + 3)[0] = d_o;                     // b
  VectorXd d_dense = d_o * p.v();
  const VectorXd dz = d_dense.cwiseProduct((t.dense_z.array() > 0.0).cast<double>().matrix());
  VectorXd h_tau = t.H.row(t.H.rows() - 1).transpose();
  if (t.drop.size() > 0) h_tau = h_tau.cwiseProduct(t.drop);
  pk.map_mat(gflat, ud_block).noalias() = dz * h_tau.transpose();  // Ud
  pk.map_vec(gflat, ud_block + 1) = dz;                            // ad
  VectorXd d_h = p.Ud().transpose() * dz;
  if (t.drop.size() > 0) d_h = d_h.cwiseProduct(t.drop);
  return d_h;
}

}  // namespace

SequenceTrace rnn_forward_masked(const RnnParams& params, const MatrixXd& X,
                                 const VectorXd& drop) {
  if (X.cols() != params.input_dim) {
    throw ShapeError("sequence dim " + std::to_string(X.cols()) + " != network input dim " +
                     std::to_string(params.input_dim));
  }
  if (X.rows() < 1) throw ShapeError("sequence must have at least one step");

  const Eigen::Index T = X.rows();
  const int H = params.hidden;
  SequenceTrace t;
  t.X = X;
  t.H.resize(T, H);

  VectorXd h = VectorXd::Zero(H);
  for (Eigen::Index step = 0; step < T; ++step) {
    h = (params.a() + params.W() * h + params.U() * X.row(step).transpose()).array().tanh();
    t.H.row(step) = h.transpose();
  }
  run_head(params, t, drop);
  return t;
}

SequenceTrace rnn_forward(const RnnParams& params, const MatrixXd& X, double dropout_rate,
                          Rng* rng) {
  VectorXd drop;
  if (rng != nullptr && dropout_rate > 0.0) {
    drop = nn::draw_dropout_mask(params.hidden, dropout_rate, *rng);
  }
  return rnn_forward_masked(params, X, drop);
}

nn::GradientSet rnn_bptt(const SequenceTrace& trace, int y, const RnnParams& params) {
  if (y != 0 && y != 1) throw DataError("label must be 0 or 1");
  if (trace.H.cols() != params.hidden || trace.X.cols() != params.input_dim) {
    throw ShapeError("trace does not match network");
  }
  const Eigen::Index T = trace.X.rows();
  const nn::ParamPack& pk = params.pack;

  nn::GradientSet g;
  g.flat = VectorXd::Zero(pk.size());
  auto gU = pk.map_mat(g.flat, 0);
  auto gW = pk.map_mat(g.flat, 1);
  auto ga = pk.map_vec(g.flat, 2);

  VectorXd d_h = head_backward(params, trace, y, g.flat, 3);

  // Walk backward; dz(t) = (1 - h(t)^2) * dL/dh(t) is both the bias
  // gradient term and the factor in the weight sums.
  for (Eigen::Index step = T - 1; step >= 0; --step) {
    const VectorXd h_t = trace.H.row(step).transpose();
    const VectorXd dz = d_h.cwiseProduct((1.0 - h_t.array().square()).matrix());
    ga += dz;
    if (step > 0) {
      gW.noalias() += dz * trace.H.row(step - 1);
    }  // h(-1) = 0 contributes nothing
    gU.noalias() += dz * trace.X.row(step);
    if (step > 0) d_h.noalias() = params.W().transpose() * dz;
  }
  return g;
}


namespace {

// LSTM recurrence shared by the plain sequential model and the fusion
// model; P must expose gate_U/gate_W/gate_a and hidden.
template <typename P>
void lstm_core_forward(const P& params, const MatrixXd& X, SequenceTrace& t) {
  const Eigen::Index T = X.rows();
  const int H = params.hidden;
  t.X = X;
  t.H.resize(T, H);
  t.S.resize(T, H);
  t.F.resize(T, H);
  t.G.resize(T, H);
  t.Stil.resize(T, H);
  t.Q.resize(T, H);
  t.TanhS.resize(T, H);

  VectorXd h = VectorXd::Zero(H);
  VectorXd s = VectorXd::Zero(H);
  for (Eigen::Index step = 0; step < T; ++step) {
    const VectorXd x = X.row(step).transpose();
    const VectorXd f =
        (params.gate_a(0) + params.gate_W(0) * h + params.gate_U(0) * x).unaryExpr([](double z) {
          return nn::sigmoid(z);
        });
    const VectorXd g =
        (params.gate_a(1) + params.gate_W(1) * h + params.gate_U(1) * x).unaryExpr([](double z) {
          return nn::sigmoid(z);
        });
    const VectorXd stil = (params.gate_a(2) + params.gate_W(2) * h + params.gate_U(2) * x)
                              .array()
                              .tanh()
                              .matrix();
    const VectorXd q =
        (params.gate_a(3) + params.gate_W(3) * h + params.gate_U(3) * x).unaryExpr([](double z) {
          return nn::sigmoid(z);
        });
    s = f.cwiseProduct(s) + g.cwiseProduct(stil);
    const VectorXd tanh_s = s.array().tanh();
    h = q.cwiseProduct(tanh_s);

    t.F.row(step) = f.transpose();
    t.G.row(step) = g.transpose();
    t.Stil.row(step) = stil.transpose();
    t.Q.row(step) = q.transpose();
    t.S.row(step) = s.transpose();
    t.TanhS.row(step) = tanh_s.transpose();
    t.H.row(step) = h.transpose();
  }
}

// Reverse accumulation through the recurrence, seeded with dL/dh(tau).
// Writes gate gradients into blocks 0..11 of gflat (the shared layout).
template <typename P>
void lstm_core_backward(const P& params, const SequenceTrace& trace, VectorXd d_h,
                        VectorXd& gflat) {
  const Eigen::Index T = trace.X.rows();
  const nn::ParamPack& pk = params.pack;
  VectorXd d_s = VectorXd::Zero(params.hidden);

  for (Eigen::Index step = T - 1; step >= 0; --step) {
    const VectorXd f = trace.F.row(step).transpose();
    const VectorXd gg = trace.G.row(step).transpose();
    const VectorXd stil = trace.Stil.row(step).transpose();
    const VectorXd q = trace.Q.row(step).transpose();
    const VectorXd tanh_s = trace.TanhS.row(step).transpose();
    const VectorXd s_prev =
        step > 0 ? VectorXd(trace.S.row(step - 1).transpose()) : VectorXd::Zero(params.hidden);

    const VectorXd d_q = d_h.cwiseProduct(tanh_s);
    d_s += d_h.cwiseProduct(q).cwiseProduct((1.0 - tanh_s.array().square()).matrix());

    const VectorXd d_f = d_s.cwiseProduct(s_prev);
    const VectorXd d_g = d_s.cwiseProduct(stil);
    const VectorXd d_stil = d_s.cwiseProduct(gg);

    const VectorXd dz_f = d_f.cwiseProduct(f).cwiseProduct((1.0 - f.array()).matrix());
    const VectorXd dz_g = d_g.cwiseProduct(gg).cwiseProduct((1.0 - gg.array()).matrix());
    const VectorXd dz_s = d_stil.cwiseProduct((1.0 - stil.array().square()).matrix());
    const VectorXd dz_q = d_q.cwiseProduct(q).cwiseProduct((1.0 - q.array()).matrix());

    const std::array<const VectorXd*, 4> dz = {&dz_f, &dz_g, &dz_s, &dz_q};
    for (int gate = 0; gate < 4; ++gate) {
      pk.map_mat(gflat, 3 * gate).noalias() += *dz[gate] * trace.X.row(step);
      if (step > 0) {
        pk.map_mat(gflat, 3 * gate + 1).noalias() += *dz[gate] * trace.H.row(step - 1);
      }
      pk.map_vec(gflat, 3 * gate + 2) += *dz[gate];
    }

    if (step > 0) {
      d_h = params.gate_W(0).transpose() * dz_f;
      d_h.noalias() += params.gate_W(1).transpose() * dz_g;
      d_h.noalias() += params.gate_W(2).transpose() * dz_s;
      d_h.noalias() += params.gate_W(3).transpose() * dz_q;
      d_s = d_s.cwiseProduct(f);
    }
  }
}

}  // namespace

LstmCellState lstm_cell_step(const LstmParams& p, const LstmCellState& prev, const VectorXd& x) {
  const auto gate = [&](int idx) -> VectorXd {
    return p.gate_a(idx) + p.gate_W(idx) * prev.h + p.gate_U(idx) * x;
  };
  const VectorXd f = gate(0).unaryExpr([](double z) { return nn::sigmoid(z); });
  const VectorXd gg = gate(1).unaryExpr([](double z) { return nn::sigmoid(z); });
  const VectorXd stil = gate(2).array().tanh();
  const VectorXd q = gate(3).unaryExpr([](double z) { return nn::sigmoid(z); });
  LstmCellState next;
  next.s = f.cwiseProduct(prev.s) + gg.cwiseProduct(stil);
  next.h = q.cwiseProduct(next.s.array().tanh().matrix());
  return next;
}

SequenceTrace lstm_forward_masked(const LstmParams& params, const MatrixXd& X,
                                  const VectorXd& drop) {
  if (X.cols() != params.input_dim) {
    throw ShapeError("sequence dim " + std::to_string(X.cols()) + " != network input dim " +
                     std::to_string(params.input_dim));
  }
  if (X.rows() < 1) throw ShapeError("sequence must have at least one step");

  SequenceTrace t;
  lstm_core_forward(params, X, t);
  run_head(params, t, drop);
  return t;
}

SequenceTrace lstm_forward(const LstmParams& params, const MatrixXd& X, double dropout_rate,
                           Rng* rng) {
  VectorXd drop;
  if (rng != nullptr && dropout_rate > 0.0) {
    drop = nn::draw_dropout_mask(params.hidden, dropout_rate, *rng);
  }
  return lstm_forward_masked(params, X, drop);
}

nn::GradientSet lstm_bptt(const SequenceTrace& trace, int y, const LstmParams& params) {
  if (y != 0 && y != 1) throw DataError("label must be 0 or 1");
  if (trace.H.cols() != params.hidden || trace.X.cols() != params.input_dim) {
    throw ShapeError("trace does not match network");
  }

  nn::GradientSet g;
  g.flat = VectorXd::Zero(params.pack.size());
  VectorXd d_h = head_backward(params, trace, y, g.flat, 12);
  lstm_core_backward(params, trace, std::move(d_h), g.flat);
  return g;
}

ConcatSeqParams init_concat_seq(int input_dim, int demo_dim, int hidden, std::uint64_t seed) {
  check_dims(input_dim, hidden);
  if (demo_dim <= 0) throw ShapeError("dims must be positive");
  ConcatSeqParams p;
  p.input_dim = input_dim;
  p.demo_dim = demo_dim;
  p.hidden = hidden;
  std::vector<nn::ParamPack::Block> blocks;
  const char* gates = "fgsq";
  for (int g = 0; g < 4; ++g) {
    const std::string tag(1, gates[g]);
    blocks.push_back({"U" + tag, hidden, input_dim});
    blocks.push_back({"W" + tag, hidden, hidden});
    blocks.push_back({"a" + tag, hidden, 1});
  }
  blocks.push_back({"Wdemo", hidden, demo_dim});
  blocks.push_back({"bdemo", hidden, 1});
  blocks.push_back({"Uj", hidden, 2 * hidden});
  blocks.push_back({"aj", hidden, 1});
  blocks.push_back({"v", hidden, 1});
  blocks.push_back({"b", 1, 1});
  p.pack = nn::ParamPack(std::move(blocks));

  Rng rng(seed);
  for (int g = 0; g < 4; ++g) {
    auto u = p.pack.mat(3 * g);
    glorot_fill(u, input_dim, hidden, rng);
    auto w = p.pack.mat(3 * g + 1);
    glorot_fill(w, hidden, hidden, rng);
  }
  {
    auto wd = p.pack.mat(12);
    glorot_fill(wd, demo_dim, hidden, rng);
    auto uj = p.pack.mat(14);
    glorot_fill(uj, 2 * hidden, hidden, rng);
    auto v = p.pack.mat(16);
    glorot_fill(v, hidden, 1, rng);
  }
  return p;
}

ConcatSeqTrace concat_seq_forward(const ConcatSeqParams& params, const MatrixXd& X,
                                  const VectorXd& x_demo, const VectorXd& drop) {
  if (X.cols() != params.input_dim) throw ShapeError("sequence dim != network input dim");
  if (x_demo.size() != params.demo_dim) throw ShapeError("demo dim != network demo dim");
  if (X.rows() < 1) throw ShapeError("sequence must have at least one step");

  ConcatSeqTrace t;
  t.x_demo = x_demo;
  lstm_core_forward(params, X, t.core);

  t.demo_h = (params.bdemo() + params.Wdemo() * x_demo).array().tanh();
  const int H = params.hidden;
  t.u.resize(2 * H);
  t.u.head(H) = t.core.H.row(t.core.H.rows() - 1).transpose();
  t.u.tail(H) = t.demo_h;
  if (drop.size() > 0) {
    if (drop.size() != 2 * H) throw ShapeError("dropout mask has wrong width");
    t.drop = drop;
    t.u = t.u.cwiseProduct(drop);
  }
  t.joint_z = params.aj() + params.Uj() * t.u;
  t.joint_h = t.joint_z.array().max(0.0);
  t.o = params.b() + params.v().dot(t.joint_h);
  t.yhat = nn::sigmoid(t.o);
  return t;
}

nn::GradientSet concat_seq_bptt(const ConcatSeqTrace& trace, int y,
                                const ConcatSeqParams& params) {
  if (y != 0 && y != 1) throw DataError("label must be 0 or 1");
  const nn::ParamPack& pk = params.pack;
  const int H = params.hidden;

  nn::GradientSet g;
  g.flat = VectorXd::Zero(pk.size());

  const double d_o = trace.yhat - static_cast<double>(y);
  pk.map_vec(g.flat, 16).noalias() = d_o * trace.joint_h;
  pk.map_vec(g.flat, 17)[0] = d_o;
  const VectorXd dzj = (d_o * params.v())
                           .cwiseProduct((trace.joint_z.array() > 0.0).cast<double>().matrix());
  pk.map_mat(g.flat, 14).noalias() = dzj * trace.u.transpose();
  pk.map_vec(g.flat, 15) = dzj;
  VectorXd d_u = params.Uj().transpose() * dzj;
  if (trace.drop.size() > 0) d_u = d_u.cwiseProduct(trace.drop);

  const VectorXd d_demo = d_u.tail(H).cwiseProduct((1.0 - trace.demo_h.array().square()).matrix());
  pk.map_mat(g.flat, 12).noalias() = d_demo * trace.x_demo.transpose();
  pk.map_vec(g.flat, 13) = d_demo;

  lstm_core_backward(params, trace.core, VectorXd(d_u.head(H)), g.flat);
  return g;
}

std::vector<double> power_iteration_norms(const MatrixXd& W, const VectorXd& h0, int steps) {
  if (W.rows() != W.cols()) throw ShapeError("matrix must be square");
  if (W.rows() != h0.size()) throw ShapeError("state dim does not match matrix");
  if (!W.allFinite() || !h0.allFinite()) throw NumericError("non-finite input");

  std::vector<double> norms;
  norms.reserve(static_cast<std::size_t>(steps));
  VectorXd h = h0;
  for (int t = 0; t < steps; ++t) {
    h = W * h;
    norms.push_back(h.norm());
  }
  return norms;
}

}  // namespace intent::seq
