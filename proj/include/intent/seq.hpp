#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "intent/dataset.hpp"
#include "intent/nn.hpp"
#include "intent/rng.hpp"

namespace intent::seq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Vanilla recurrent network. The recurrent layer h(t) = tanh(a + W h(t-1)
// + U x(t)) reads the whole sequence; the final state feeds a dense ReLU
// layer and then the sigmoid output unit.
struct RnnParams {
  int input_dim = 0;
  int hidden = 0;
  nn::ParamPack pack;  // U, W, a, Ud, ad, v, b

  Eigen::Map<const MatrixXd> U() const { return pack.mat(0); }
  Eigen::Map<const MatrixXd> W() const { return pack.mat(1); }
  Eigen::Map<const VectorXd> a() const { return pack.vec(2); }
  Eigen::Map<const MatrixXd> Ud() const { return pack.mat(3); }
  Eigen::Map<const VectorXd> ad() const { return pack.vec(4); }
  Eigen::Map<const VectorXd> v() const { return pack.vec(5); }
  double b() const { return pack.scalar(6); }

  Eigen::Map<MatrixXd> U() { return pack.mat(0); }
  Eigen::Map<MatrixXd> W() { return pack.mat(1); }
  Eigen::Map<VectorXd> a() { return pack.vec(2); }
  Eigen::Map<MatrixXd> Ud() { return pack.mat(3); }
  Eigen::Map<VectorXd> ad() { return pack.vec(4); }
  Eigen::Map<VectorXd> v() { return pack.vec(5); }
  double& b() { return pack.scalar(6); }
};

// LSTM cell with forget gate f, input gate g, candidate state s~, output
// gate q; state s(t) = f*s(t-1) + g*s~(t), output h(t) = q*tanh(s(t)).
// Same dense ReLU + sigmoid head as the vanilla network.
struct LstmParams {
  int input_dim = 0;
  int hidden = 0;
  nn::ParamPack pack;  // per gate {U,W,a} x {f,g,s,q}, then Ud, ad, v, b

  // gate: 0=f, 1=g, 2=s(candidate), 3=q
  Eigen::Map<const MatrixXd> gate_U(int gate) const { return pack.mat(3 * gate); }
  Eigen::Map<const MatrixXd> gate_W(int gate) const { return pack.mat(3 * gate + 1); }
  Eigen::Map<const VectorXd> gate_a(int gate) const { return pack.vec(3 * gate + 2); }
  Eigen::Map<MatrixXd> gate_U(int gate) { return pack.mat(3 * gate); }
  Eigen::Map<MatrixXd> gate_W(int gate) { return pack.mat(3 * gate + 1); }
  Eigen::Map<VectorXd> gate_a(int gate) { return pack.vec(3 * gate + 2); }

  Eigen::Map<const MatrixXd> Ud() const { return pack.mat(12); }
  Eigen::Map<const VectorXd> ad() const { return pack.vec(13); }
  Eigen::Map<const VectorXd> v() const { return pack.vec(14); }
  double b() const { return pack.scalar(15); }
  Eigen::Map<MatrixXd> Ud() { return pack.mat(12); }
  Eigen::Map<VectorXd> ad() { return pack.vec(13); }
  Eigen::Map<VectorXd> v() { return pack.vec(14); }
  double& b() { return pack.scalar(15); }
};

// Fusion of the sequential and demography models: the LSTM's final hidden
// state is concatenated with the demography branch's tanh layer output, and
// the pair feeds a joint dense ReLU + sigmoid head, trained end to end.
// Gate blocks share the LstmParams layout so the batched core is reusable.
struct ConcatSeqParams {
  int input_dim = 0;  // sequence step dim
  int demo_dim = 0;
  int hidden = 0;  // width of the LSTM, the demo branch and the joint layer
  nn::ParamPack pack;  // gates {U,W,a} x 4, Wdemo, bdemo, Uj, aj, v, b

  Eigen::Map<const MatrixXd> gate_U(int gate) const { return pack.mat(3 * gate); }
  Eigen::Map<const MatrixXd> gate_W(int gate) const { return pack.mat(3 * gate + 1); }
  Eigen::Map<const VectorXd> gate_a(int gate) const { return pack.vec(3 * gate + 2); }
  Eigen::Map<const MatrixXd> Wdemo() const { return pack.mat(12); }
  Eigen::Map<const VectorXd> bdemo() const { return pack.vec(13); }
  Eigen::Map<const MatrixXd> Uj() const { return pack.mat(14); }  // H x 2H
  Eigen::Map<const VectorXd> aj() const { return pack.vec(15); }
  Eigen::Map<const VectorXd> v() const { return pack.vec(16); }
  double b() const { return pack.scalar(17); }
};

RnnParams init_rnn(int input_dim, int hidden, std::uint64_t seed);
LstmParams init_lstm(int input_dim, int hidden, std::uint64_t seed);
ConcatSeqParams init_concat_seq(int input_dim, int demo_dim, int hidden, std::uint64_t seed);

// Everything one forward pass over a sequence records. Gate matrices are
// only filled by the LSTM. Rows are timesteps.
struct SequenceTrace {
  MatrixXd X;  // T x D, incl. zero padding rows
  MatrixXd H;  // T x H hidden states
  MatrixXd S, F, G, Stil, Q, TanhS;
  VectorXd drop;  // multiplier on h(tau) feeding the dense layer; empty if unused
  VectorXd dense_z, dense_h;
  double o = 0.0;
  double yhat = 0.5;
};

// Initial state h(-1) (and s(-1) for the LSTM) is the zero vector; the
// output is read at the final step only.
SequenceTrace rnn_forward(const RnnParams& params, const MatrixXd& X,
                          double dropout_rate = 0.0, Rng* rng = nullptr);
SequenceTrace lstm_forward(const LstmParams& params, const MatrixXd& X,
                           double dropout_rate = 0.0, Rng* rng = nullptr);

// Variants taking a precomputed dropout multiplier on h(tau) (empty = none).
SequenceTrace rnn_forward_masked(const RnnParams& params, const MatrixXd& X,
                                 const VectorXd& drop);
SequenceTrace lstm_forward_masked(const LstmParams& params, const MatrixXd& X,
                                  const VectorXd& drop);

inline SequenceTrace rnn_forward(const RnnParams& p, const EncodedSequence& s,
                                 double rate = 0.0, Rng* rng = nullptr) {
  return rnn_forward(p, s.dense(), rate, rng);
}
inline SequenceTrace lstm_forward(const LstmParams& p, const EncodedSequence& s,
                                  double rate = 0.0, Rng* rng = nullptr) {
  return lstm_forward(p, s.dense(), rate, rng);
}

// Closed-form backpropagation through time for the vanilla cell: seed
// dL/do = yhat - y, chain through the head, then per-step
// dL/dh(t) = W^T diag(1 - h(t+1)^2) dL/dh(t+1) and the parameter sums.
nn::GradientSet rnn_bptt(const SequenceTrace& trace, int y, const RnnParams& params);

// Reverse accumulation through the gate graph; validated against finite
// differences in the tests.
nn::GradientSet lstm_bptt(const SequenceTrace& trace, int y, const LstmParams& params);

// Single-example forward/backward of the fusion model; the dropout
// multiplier covers the concatenated [h(tau); demo] vector (width 2H).
struct ConcatSeqTrace {
  SequenceTrace core;
  VectorXd x_demo;
  VectorXd demo_h;   // tanh branch output
  VectorXd u;        // concatenated, after dropout
  VectorXd drop;     // empty if unused
  VectorXd joint_z, joint_h;
  double o = 0.0;
  double yhat = 0.5;
};

ConcatSeqTrace concat_seq_forward(const ConcatSeqParams& params, const MatrixXd& X,
                                  const VectorXd& x_demo, const VectorXd& drop = {});
nn::GradientSet concat_seq_bptt(const ConcatSeqTrace& trace, int y,
                                const ConcatSeqParams& params);

struct LstmCellState {
  VectorXd h;
  VectorXd s;
};

// Single cell step, exposed for unit tests of gate behaviour.
LstmCellState lstm_cell_step(const LstmParams& params, const LstmCellState& prev,
                             const VectorXd& x);

// ||W^t h0|| for t = 1..steps; demonstrates the explode/vanish regimes of a
// linear recurrence.
std::vector<double> power_iteration_norms(const MatrixXd& W, const VectorXd& h0, int steps);

}  // namespace intent::seq
