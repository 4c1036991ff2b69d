#include "intent/batch.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "intent/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace intent::batch {

namespace {

MatrixXd sigmoid_mat(const MatrixXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

VectorXd sigmoid_vec(const VectorXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

double batch_loss_sum(const VectorXd& yhat, const VectorXd& y) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < yhat.size(); ++i) {
    sum += nn::cross_entropy(yhat[i], static_cast<int>(y[i]));
  }
  return sum;
}

// Runs `block(first, count, out_grad, out_loss_sum)` over fixed-size blocks
// of the batch, in parallel, then reduces partials in block order and
// averages. The reduction order never depends on the thread count.
template <typename BlockFn>
GradResult blocked_mean(Eigen::Index pack_size, std::size_t batch, BlockFn&& block) {
  const int n_blocks = static_cast<int>((batch + kBlock - 1) / kBlock);
  std::vector<VectorXd> grads(static_cast<std::size_t>(n_blocks));
  std::vector<double> losses(static_cast<std::size_t>(n_blocks), 0.0);

#pragma omp parallel for schedule(static)
  for (int b = 0; b < n_blocks; ++b) {
    const std::size_t first = static_cast<std::size_t>(b) * kBlock;
    const std::size_t count = std::min<std::size_t>(kBlock, batch - first);
    grads[static_cast<std::size_t>(b)] = VectorXd::Zero(pack_size);
    block(first, count, grads[static_cast<std::size_t>(b)], losses[static_cast<std::size_t>(b)]);
  }

  GradResult r;
  r.grad = VectorXd::Zero(pack_size);
  for (int b = 0; b < n_blocks; ++b) {
    r.grad += grads[static_cast<std::size_t>(b)];
    r.mean_loss += losses[static_cast<std::size_t>(b)];
  }
  r.grad /= static_cast<double>(batch);
  r.mean_loss /= static_cast<double>(batch);
  return r;
}

MatrixXd gather_rows(const MatrixXd& X, std::span<const int> idx, std::size_t first,
                     std::size_t count) {
  MatrixXd out(static_cast<Eigen::Index>(count), X.cols());
  for (std::size_t i = 0; i < count; ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(idx[first + i]);
  return out;
}

VectorXd gather_labels(const VectorXd& y, std::span<const int> idx, std::size_t first,
                       std::size_t count) {
  VectorXd out(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) out[static_cast<Eigen::Index>(i)] = y[idx[first + i]];
  return out;
}

void check_drop(const MatrixXd& drop, std::size_t batch, Eigen::Index width) {
  if (drop.size() == 0) return;
  if (drop.rows() != static_cast<Eigen::Index>(batch) || drop.cols() != width) {
    throw ShapeError("dropout mask matrix has wrong shape");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// feed-forward
// ---------------------------------------------------------------------------

GradResult ffnn_grad_reference(const nn::FfnnParams& params, const MatrixXd& X,
                               const VectorXd& y, std::span<const int> idx,
                               const MatrixXd& drop) {
  check_drop(drop, idx.size(), params.n_hidden() > 0 ? params.dims[1] : 0);
  GradResult r;
  r.grad = VectorXd::Zero(params.pack.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const int row = idx[i];
    VectorXd mask;
    if (drop.size() > 0) mask = drop.row(static_cast<Eigen::Index>(i)).transpose();
    const nn::ForwardTrace t = nn::ffnn_forward_masked(params, X.row(row).transpose(), mask);
    const int label = static_cast<int>(y[row]);
    r.mean_loss += nn::cross_entropy(t.yhat, label);
    r.grad += nn::ffnn_backward(t, label, params).flat;
  }
  const double n = static_cast<double>(idx.size());
  r.grad /= n;
  r.mean_loss /= n;
  return r;
}

namespace {

// One block of the fast FFNN path: every layer evaluated for all members at
// once, gradients accumulated through the matrix products themselves.
void ffnn_block(const nn::FfnnParams& params, const MatrixXd& Xb, const VectorXd& yb,
                const MatrixXd& dropb, VectorXd& grad, double& loss_sum) {
  const int n_hidden = params.n_hidden();
  const nn::ParamPack& pk = params.pack;

  std::vector<MatrixXd> Z(static_cast<std::size_t>(n_hidden));
  std::vector<MatrixXd> A(static_cast<std::size_t>(n_hidden));  // layer outputs
  const MatrixXd* cur = &Xb;
  for (int l = 0; l < n_hidden; ++l) {
    Z[l] = ((*cur) * params.weight(l).transpose()).rowwise() + params.bias(l).transpose();
    if (params.acts[l] == nn::Act::Tanh) {
      A[l] = Z[l].array().tanh();
    } else {
      A[l] = Z[l].array().max(0.0);
    }
    if (l == 0 && dropb.size() > 0) A[0] = A[0].cwiseProduct(dropb);
    cur = &A[l];
  }

  const VectorXd o = ((*cur) * params.out_weight()).array() + params.out_bias();
  const VectorXd yhat = sigmoid_vec(o);
  loss_sum += batch_loss_sum(yhat, yb);

  const VectorXd d_o = yhat - yb;
  pk.map_vec(grad, 2 * n_hidden).noalias() += cur->transpose() * d_o;
  pk.map_vec(grad, 2 * n_hidden + 1)[0] += d_o.sum();

  MatrixXd delta = d_o * params.out_weight().transpose();  // B x H_last
  for (int l = n_hidden - 1; l >= 0; --l) {
    if (l == 0 && dropb.size() > 0) delta = delta.cwiseProduct(dropb);
    MatrixXd dz;
    if (params.acts[l] == nn::Act::Tanh) {
      // A holds post-dropout values for layer 0; recompute tanh from Z.
      dz = delta.cwiseProduct((1.0 - Z[l].array().tanh().square()).matrix());
    } else {
      dz = delta.cwiseProduct((Z[l].array() > 0.0).cast<double>().matrix());
    }
    const MatrixXd& below = l == 0 ? Xb : A[l - 1];
    pk.map_mat(grad, 2 * l).noalias() += dz.transpose() * below;
    pk.map_vec(grad, 2 * l + 1).noalias() += dz.colwise().sum().transpose();
    if (l > 0) delta.noalias() = dz * params.weight(l);
  }
}

}  // namespace

GradResult ffnn_grad(const nn::FfnnParams& params, const MatrixXd& X, const VectorXd& y,
                     std::span<const int> idx, const MatrixXd& drop) {
  check_drop(drop, idx.size(), params.n_hidden() > 0 ? params.dims[1] : 0);
  return blocked_mean(params.pack.size(), idx.size(),
                      [&](std::size_t first, std::size_t count, VectorXd& g, double& l) {
                        const MatrixXd Xb = gather_rows(X, idx, first, count);
                        const VectorXd yb = gather_labels(y, idx, first, count);
                        MatrixXd db;
                        if (drop.size() > 0) {
                          db = drop.middleRows(static_cast<Eigen::Index>(first),
                                               static_cast<Eigen::Index>(count));
                        }
                        ffnn_block(params, Xb, yb, db, g, l);
                      });
}

VectorXd ffnn_scores_reference(const nn::FfnnParams& params, const MatrixXd& X) {
  VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out[i] = nn::ffnn_forward_masked(params, X.row(i).transpose(), {}).yhat;
  }
  return out;
}

VectorXd ffnn_scores(const nn::FfnnParams& params, const MatrixXd& X) {
  const Eigen::Index n = X.rows();
  VectorXd out(n);
  const int n_blocks = static_cast<int>((n + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < n_blocks; ++b) {
    const Eigen::Index first = static_cast<Eigen::Index>(b) * kBlock;
    const Eigen::Index count = std::min<Eigen::Index>(kBlock, n - first);
    MatrixXd cur = X.middleRows(first, count);
    for (int l = 0; l < params.n_hidden(); ++l) {
      MatrixXd z = (cur * params.weight(l).transpose()).rowwise() + params.bias(l).transpose();
      if (params.acts[l] == nn::Act::Tanh) {
        cur = z.array().tanh();
      } else {
        cur = z.array().max(0.0);
      }
    }
    const VectorXd o = (cur * params.out_weight()).array() + params.out_bias();
    out.segment(first, count) = sigmoid_vec(o);
  }
  return out;
}

// ---------------------------------------------------------------------------
// sequence models
// ---------------------------------------------------------------------------

namespace {

void check_seq_data(std::span<const EncodedSequence> data, int input_dim) {
  if (data.empty()) throw ShapeError("empty sequence dataset");
  if (data.front().dim() != input_dim) {
    throw ShapeError("sequence dim " + std::to_string(data.front().dim()) +
                     " != network input dim " + std::to_string(input_dim));
  }
}

// Dense time-major slices for one block: X[t] is count x D.
std::vector<MatrixXd> build_steps(std::span<const EncodedSequence> data,
                                  std::span<const int> idx, std::size_t first,
                                  std::size_t count) {
  const int T = data[static_cast<std::size_t>(idx[first])].T;
  const int D = data[static_cast<std::size_t>(idx[first])].dim();
  std::vector<MatrixXd> X(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    X[t] = MatrixXd::Zero(static_cast<Eigen::Index>(count), D);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const EncodedSequence& s = data[static_cast<std::size_t>(idx[first + i])];
    if (s.T != T || s.dim() != D) throw ShapeError("ragged sequence dataset");
    for (int t = 0; t < T; ++t) s.fill_row(t, X[t], static_cast<Eigen::Index>(i));
  }
  return X;
}

VectorXd seq_labels(std::span<const EncodedSequence> data, std::span<const int> idx,
                    std::size_t first, std::size_t count) {
  VectorXd y(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    y[static_cast<Eigen::Index>(i)] = data[static_cast<std::size_t>(idx[first + i])].y;
  }
  return y;
}

struct HeadBack {
  MatrixXd d_h;  // B x H, gradient flowing into h(tau)
  VectorXd d_o;
};

// Forward + backward of the shared dense-ReLU/sigmoid head for a block.
// Writes head parameter gradients, returns the state gradient.
template <typename Params>
HeadBack head_block(const Params& params, const MatrixXd& Htau, const VectorXd& yb,
                    const MatrixXd& dropb, int ud_block, VectorXd& grad, double& loss_sum) {
  const nn::ParamPack& pk = params.pack;
  MatrixXd Hdrop = dropb.size() > 0 ? Htau.cwiseProduct(dropb) : Htau;
  const MatrixXd Zd = (Hdrop * params.Ud().transpose()).rowwise() + params.ad().transpose();
  const MatrixXd Hd = Zd.array().max(0.0);
  const VectorXd o = (Hd * params.v()).array() + params.b();
  const VectorXd yhat = sigmoid_vec(o);
  loss_sum += batch_loss_sum(yhat, yb);

  HeadBack hb;
  hb.d_o = yhat - yb;
  pk.map_vec(grad, ud_block + 2).noalias() += Hd.transpose() * hb.d_o;
  pk.map_vec(grad, ud_block + 3)[0] += hb.d_o.sum();
  MatrixXd dzd = (hb.d_o * params.v().transpose()).cwiseProduct((Zd.array() > 0.0).cast<double>().matrix());
  pk.map_mat(grad, ud_block).noalias() += dzd.transpose() * Hdrop;
  pk.map_vec(grad, ud_block + 1).noalias() += dzd.colwise().sum().transpose();
  hb.d_h = dzd * params.Ud();
  if (dropb.size() > 0) hb.d_h = hb.d_h.cwiseProduct(dropb);
  return hb;
}

struct CoreTapes {
  std::vector<MatrixXd> F, G, Stil, Q, S, TanhS, Hs;
};

// Batched LSTM recurrence over one block; shared by the sequential and the
// fusion model. X[t] is count x D.
template <typename P>
void lstm_core_forward_block(const P& params, const std::vector<MatrixXd>& X, CoreTapes& tp) {
  const int T = static_cast<int>(X.size());
  const int H = params.hidden;
  const Eigen::Index B = X[0].rows();
  tp.F.resize(T);
  tp.G.resize(T);
  tp.Stil.resize(T);
  tp.Q.resize(T);
  tp.S.resize(T);
  tp.TanhS.resize(T);
  tp.Hs.resize(T);

  MatrixXd h = MatrixXd::Zero(B, H);
  MatrixXd s = MatrixXd::Zero(B, H);
  for (int t = 0; t < T; ++t) {
    const auto pre = [&](int gate) {
      return ((X[t] * params.gate_U(gate).transpose() + h * params.gate_W(gate).transpose())
                  .rowwise() +
              params.gate_a(gate).transpose());
    };
    tp.F[t] = sigmoid_mat(pre(0));
    tp.G[t] = sigmoid_mat(pre(1));
    tp.Stil[t] = pre(2).array().tanh();
    tp.Q[t] = sigmoid_mat(pre(3));
    s = tp.F[t].cwiseProduct(s) + tp.G[t].cwiseProduct(tp.Stil[t]);
    tp.TanhS[t] = s.array().tanh();
    h = tp.Q[t].cwiseProduct(tp.TanhS[t]);
    tp.S[t] = s;
    tp.Hs[t] = h;
  }
}

template <typename P>
void lstm_core_backward_block(const P& params, const std::vector<MatrixXd>& X,
                              const CoreTapes& tp, MatrixXd d_h, VectorXd& grad) {
  const int T = static_cast<int>(X.size());
  const int H = params.hidden;
  const Eigen::Index B = X[0].rows();
  const nn::ParamPack& pk = params.pack;

  MatrixXd d_s = MatrixXd::Zero(B, H);
  for (int t = T - 1; t >= 0; --t) {
    const MatrixXd d_q = d_h.cwiseProduct(tp.TanhS[t]);
    d_s += d_h.cwiseProduct(tp.Q[t]).cwiseProduct((1.0 - tp.TanhS[t].array().square()).matrix());

    MatrixXd d_f;
    if (t > 0) {
      d_f = d_s.cwiseProduct(tp.S[t - 1]);
    } else {
      d_f = MatrixXd::Zero(B, H);
    }
    const MatrixXd d_g = d_s.cwiseProduct(tp.Stil[t]);
    const MatrixXd d_stil = d_s.cwiseProduct(tp.G[t]);

    const MatrixXd dz_f =
        d_f.cwiseProduct(tp.F[t]).cwiseProduct((1.0 - tp.F[t].array()).matrix());
    const MatrixXd dz_g =
        d_g.cwiseProduct(tp.G[t]).cwiseProduct((1.0 - tp.G[t].array()).matrix());
    const MatrixXd dz_s = d_stil.cwiseProduct((1.0 - tp.Stil[t].array().square()).matrix());
    const MatrixXd dz_q =
        d_q.cwiseProduct(tp.Q[t]).cwiseProduct((1.0 - tp.Q[t].array()).matrix());

    const std::array<const MatrixXd*, 4> dz = {&dz_f, &dz_g, &dz_s, &dz_q};
    for (int gate = 0; gate < 4; ++gate) {
      pk.map_mat(grad, 3 * gate).noalias() += dz[gate]->transpose() * X[t];
      if (t > 0) {
        pk.map_mat(grad, 3 * gate + 1).noalias() += dz[gate]->transpose() * tp.Hs[t - 1];
      }
      pk.map_vec(grad, 3 * gate + 2).noalias() += dz[gate]->colwise().sum().transpose();
    }

    if (t > 0) {
      d_h = dz_f * params.gate_W(0);
      d_h.noalias() += dz_g * params.gate_W(1);
      d_h.noalias() += dz_s * params.gate_W(2);
      d_h.noalias() += dz_q * params.gate_W(3);
      d_s = d_s.cwiseProduct(tp.F[t]);
    }
  }
}

void lstm_block(const seq::LstmParams& params, std::span<const EncodedSequence> data,
                std::span<const int> idx, std::size_t first, std::size_t count,
                const MatrixXd& drop, VectorXd& grad, double& loss_sum) {
  const std::vector<MatrixXd> X = build_steps(data, idx, first, count);
  CoreTapes tp;
  lstm_core_forward_block(params, X, tp);

  const VectorXd yb = seq_labels(data, idx, first, count);
  MatrixXd dropb;
  if (drop.size() > 0) {
    dropb = drop.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
  }
  HeadBack hb = head_block(params, tp.Hs.back(), yb, dropb, 12, grad, loss_sum);
  lstm_core_backward_block(params, X, tp, std::move(hb.d_h), grad);
}

// Fusion model: LSTM core plus a tanh demo branch feeding the joint
// ReLU/sigmoid head. The dropout mask covers [h(tau); demo] (width 2H).
void concat_seq_block(const seq::ConcatSeqParams& params, std::span<const EncodedSequence> data,
                      const MatrixXd& demo, std::span<const int> idx, std::size_t first,
                      std::size_t count, const MatrixXd& drop, VectorXd& grad,
                      double& loss_sum) {
  const std::vector<MatrixXd> X = build_steps(data, idx, first, count);
  CoreTapes tp;
  lstm_core_forward_block(params, X, tp);

  const Eigen::Index B = static_cast<Eigen::Index>(count);
  const int H = params.hidden;
  const nn::ParamPack& pk = params.pack;

  const MatrixXd Xd = gather_rows(demo, idx, first, count);
  const MatrixXd Zdem = (Xd * params.Wdemo().transpose()).rowwise() + params.bdemo().transpose();
  const MatrixXd Ddem = Zdem.array().tanh();

  MatrixXd U(B, 2 * H);
  U.leftCols(H) = tp.Hs.back();
  U.rightCols(H) = Ddem;
  if (drop.size() > 0) {
    U = U.cwiseProduct(
        drop.middleRows(static_cast<Eigen::Index>(first), B));
  }

  const MatrixXd Zj = (U * params.Uj().transpose()).rowwise() + params.aj().transpose();
  const MatrixXd R = Zj.array().max(0.0);
  const VectorXd o = (R * params.v()).array() + params.b();
  const VectorXd yhat = sigmoid_vec(o);
  const VectorXd yb = seq_labels(data, idx, first, count);
  loss_sum += batch_loss_sum(yhat, yb);

  const VectorXd d_o = yhat - yb;
  pk.map_vec(grad, 16).noalias() += R.transpose() * d_o;
  pk.map_vec(grad, 17)[0] += d_o.sum();
  const MatrixXd dzj =
      (d_o * params.v().transpose()).cwiseProduct((Zj.array() > 0.0).cast<double>().matrix());
  pk.map_mat(grad, 14).noalias() += dzj.transpose() * U;
  pk.map_vec(grad, 15).noalias() += dzj.colwise().sum().transpose();
  MatrixXd d_u = dzj * params.Uj();
  if (drop.size() > 0) {
    d_u = d_u.cwiseProduct(
        drop.middleRows(static_cast<Eigen::Index>(first), B));
  }

  const MatrixXd d_dem =
      d_u.rightCols(H).cwiseProduct((1.0 - Ddem.array().square()).matrix());
  pk.map_mat(grad, 12).noalias() += d_dem.transpose() * Xd;
  pk.map_vec(grad, 13).noalias() += d_dem.colwise().sum().transpose();

  lstm_core_backward_block(params, X, tp, MatrixXd(d_u.leftCols(H)), grad);
}

void rnn_block(const seq::RnnParams& params, std::span<const EncodedSequence> data,
               std::span<const int> idx, std::size_t first, std::size_t count,
               const MatrixXd& drop, VectorXd& grad, double& loss_sum) {
  const std::vector<MatrixXd> X = build_steps(data, idx, first, count);
  const int T = static_cast<int>(X.size());
  const int H = params.hidden;
  const Eigen::Index B = static_cast<Eigen::Index>(count);
  const nn::ParamPack& pk = params.pack;

  std::vector<MatrixXd> Hs(T);
  MatrixXd h = MatrixXd::Zero(B, H);
  for (int t = 0; t < T; ++t) {
    h = ((X[t] * params.U().transpose() + h * params.W().transpose()).rowwise() +
         params.a().transpose())
            .array()
            .tanh();
    Hs[t] = h;
  }

  const VectorXd yb = seq_labels(data, idx, first, count);
  MatrixXd dropb;
  if (drop.size() > 0) {
    dropb = drop.middleRows(static_cast<Eigen::Index>(first), B);
  }
  HeadBack hb = head_block(params, Hs[T - 1], yb, dropb, 3, grad, loss_sum);

  MatrixXd d_h = hb.d_h;
  for (int t = T - 1; t >= 0; --t) {
    const MatrixXd dz = d_h.cwiseProduct((1.0 - Hs[t].array().square()).matrix());
    pk.map_vec(grad, 2).noalias() += dz.colwise().sum().transpose();
    if (t > 0) {
      pk.map_mat(grad, 1).noalias() += dz.transpose() * Hs[t - 1];
    }
    pk.map_mat(grad, 0).noalias() += dz.transpose() * X[t];
    if (t > 0) d_h = dz * params.W();
  }
}

template <typename Params, typename ForwardFn>
GradResult seq_grad_reference_impl(const Params& params, std::span<const EncodedSequence> data,
                                   std::span<const int> idx, const MatrixXd& drop,
                                   ForwardFn&& forward,
                                   nn::GradientSet (*backward)(const seq::SequenceTrace&, int,
                                                               const Params&)) {
  check_seq_data(data, params.input_dim);
  check_drop(drop, idx.size(), params.hidden);
  GradResult r;
  r.grad = VectorXd::Zero(params.pack.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const EncodedSequence& s = data[static_cast<std::size_t>(idx[i])];
    VectorXd mask;
    if (drop.size() > 0) mask = drop.row(static_cast<Eigen::Index>(i)).transpose();
    const seq::SequenceTrace t = forward(params, s.dense(), mask);
    r.mean_loss += nn::cross_entropy(t.yhat, s.y);
    r.grad += backward(t, s.y, params).flat;
  }
  const double n = static_cast<double>(idx.size());
  r.grad /= n;
  r.mean_loss /= n;
  return r;
}

template <typename ScoreFn>
VectorXd seq_scores_blocked(std::span<const EncodedSequence> data, Eigen::Index pack_unused,
                            ScoreFn&& score_block) {
  (void)pack_unused;
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  VectorXd out(n);
  const int n_blocks = static_cast<int>((n + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < n_blocks; ++b) {
    const Eigen::Index first = static_cast<Eigen::Index>(b) * kBlock;
    const Eigen::Index count = std::min<Eigen::Index>(kBlock, n - first);
    score_block(first, count, out);
  }
  return out;
}

std::vector<int> iota_idx(std::size_t n) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  return idx;
}

}  // namespace

GradResult lstm_grad_reference(const seq::LstmParams& params,
                               std::span<const EncodedSequence> data, std::span<const int> idx,
                               const MatrixXd& drop) {
  return seq_grad_reference_impl(
      params, data, idx, drop,
      [](const seq::LstmParams& p, const MatrixXd& X, const VectorXd& m) {
        return seq::lstm_forward_masked(p, X, m);
      },
      &seq::lstm_bptt);
}

GradResult rnn_grad_reference(const seq::RnnParams& params, std::span<const EncodedSequence> data,
                              std::span<const int> idx, const MatrixXd& drop) {
  return seq_grad_reference_impl(
      params, data, idx, drop,
      [](const seq::RnnParams& p, const MatrixXd& X, const VectorXd& m) {
        return seq::rnn_forward_masked(p, X, m);
      },
      &seq::rnn_bptt);
}

GradResult lstm_grad(const seq::LstmParams& params, std::span<const EncodedSequence> data,
                     std::span<const int> idx, const MatrixXd& drop) {
  check_seq_data(data, params.input_dim);
  check_drop(drop, idx.size(), params.hidden);
  return blocked_mean(params.pack.size(), idx.size(),
                      [&](std::size_t first, std::size_t count, VectorXd& g, double& l) {
                        lstm_block(params, data, idx, first, count, drop, g, l);
                      });
}

GradResult rnn_grad(const seq::RnnParams& params, std::span<const EncodedSequence> data,
                    std::span<const int> idx, const MatrixXd& drop) {
  check_seq_data(data, params.input_dim);
  check_drop(drop, idx.size(), params.hidden);
  return blocked_mean(params.pack.size(), idx.size(),
                      [&](std::size_t first, std::size_t count, VectorXd& g, double& l) {
                        rnn_block(params, data, idx, first, count, drop, g, l);
                      });
}

VectorXd lstm_scores_reference(const seq::LstmParams& params,
                               std::span<const EncodedSequence> data) {
  check_seq_data(data, params.input_dim);
  VectorXd out(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = seq::lstm_forward_masked(params, data[i].dense(), {}).yhat;
  }
  return out;
}

VectorXd rnn_scores_reference(const seq::RnnParams& params,
                              std::span<const EncodedSequence> data) {
  check_seq_data(data, params.input_dim);
  VectorXd out(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = seq::rnn_forward_masked(params, data[i].dense(), {}).yhat;
  }
  return out;
}

VectorXd lstm_scores(const seq::LstmParams& params, std::span<const EncodedSequence> data) {
  check_seq_data(data, params.input_dim);
  const std::vector<int> idx = iota_idx(data.size());
  return seq_scores_blocked(data, 0, [&](Eigen::Index first, Eigen::Index count, VectorXd& out) {
    const std::vector<MatrixXd> X =
        build_steps(data, idx, static_cast<std::size_t>(first), static_cast<std::size_t>(count));
    const int H = params.hidden;
    MatrixXd h = MatrixXd::Zero(count, H);
    MatrixXd s = MatrixXd::Zero(count, H);
    for (std::size_t t = 0; t < X.size(); ++t) {
      const auto pre = [&](int gate) {
        return ((X[t] * params.gate_U(gate).transpose() + h * params.gate_W(gate).transpose())
                    .rowwise() +
                params.gate_a(gate).transpose());
      };
      const MatrixXd f = sigmoid_mat(pre(0));
      const MatrixXd g = sigmoid_mat(pre(1));
      const MatrixXd stil = pre(2).array().tanh();
      const MatrixXd q = sigmoid_mat(pre(3));
      s = f.cwiseProduct(s) + g.cwiseProduct(stil);
      h = q.cwiseProduct(s.array().tanh().matrix());
    }
    const MatrixXd zd = (h * params.Ud().transpose()).rowwise() + params.ad().transpose();
    const MatrixXd hd = zd.array().max(0.0);
    const VectorXd o = (hd * params.v()).array() + params.b();
    out.segment(first, count) = sigmoid_vec(o);
  });
}

VectorXd rnn_scores(const seq::RnnParams& params, std::span<const EncodedSequence> data) {
  check_seq_data(data, params.input_dim);
  const std::vector<int> idx = iota_idx(data.size());
  return seq_scores_blocked(data, 0, [&](Eigen::Index first, Eigen::Index count, VectorXd& out) {
    const std::vector<MatrixXd> X =
        build_steps(data, idx, static_cast<std::size_t>(first), static_cast<std::size_t>(count));
    MatrixXd h = MatrixXd::Zero(count, params.hidden);
    for (std::size_t t = 0; t < X.size(); ++t) {
      h = ((X[t] * params.U().transpose() + h * params.W().transpose()).rowwise() +
           params.a().transpose())
              .array()
              .tanh();
    }
    const MatrixXd zd = (h * params.Ud().transpose()).rowwise() + params.ad().transpose();
    const MatrixXd hd = zd.array().max(0.0);
    const VectorXd o = (hd * params.v()).array() + params.b();
    out.segment(first, count) = sigmoid_vec(o);
  });
}


GradResult concat_seq_grad_reference(const seq::ConcatSeqParams& params,
                                     std::span<const EncodedSequence> data, const MatrixXd& demo,
                                     std::span<const int> idx, const MatrixXd& drop) {
  check_seq_data(data, params.input_dim);
  check_drop(drop, idx.size(), 2 * params.hidden);
  GradResult r;
  r.grad = VectorXd::Zero(params.pack.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const EncodedSequence& s = data[static_cast<std::size_t>(idx[i])];
    VectorXd mask;
    if (drop.size() > 0) mask = drop.row(static_cast<Eigen::Index>(i)).transpose();
    const seq::ConcatSeqTrace t =
        seq::concat_seq_forward(params, s.dense(), demo.row(idx[i]).transpose(), mask);
    r.mean_loss += nn::cross_entropy(t.yhat, s.y);
    r.grad += seq::concat_seq_bptt(t, s.y, params).flat;
  }
  const double n = static_cast<double>(idx.size());
  r.grad /= n;
  r.mean_loss /= n;
  return r;
}

GradResult concat_seq_grad(const seq::ConcatSeqParams& params,
                           std::span<const EncodedSequence> data, const MatrixXd& demo,
                           std::span<const int> idx, const MatrixXd& drop) {
  check_seq_data(data, params.input_dim);
  check_drop(drop, idx.size(), 2 * params.hidden);
  if (demo.rows() != static_cast<Eigen::Index>(data.size()) || demo.cols() != params.demo_dim) {
    throw ShapeError("demographic matrix does not match dataset/model");
  }
  return blocked_mean(params.pack.size(), idx.size(),
                      [&](std::size_t first, std::size_t count, VectorXd& g, double& l) {
                        concat_seq_block(params, data, demo, idx, first, count, drop, g, l);
                      });
}

VectorXd concat_seq_scores(const seq::ConcatSeqParams& params,
                           std::span<const EncodedSequence> data, const MatrixXd& demo) {
  check_seq_data(data, params.input_dim);
  if (demo.rows() != static_cast<Eigen::Index>(data.size()) || demo.cols() != params.demo_dim) {
    throw ShapeError("demographic matrix does not match dataset/model");
  }
  const std::vector<int> idx = iota_idx(data.size());
  const int H = params.hidden;
  return seq_scores_blocked(data, 0, [&](Eigen::Index first, Eigen::Index count, VectorXd& out) {
    const std::vector<MatrixXd> X =
        build_steps(data, idx, static_cast<std::size_t>(first), static_cast<std::size_t>(count));
    CoreTapes tp;
    lstm_core_forward_block(params, X, tp);
    const MatrixXd Xd = demo.middleRows(first, count);
    const MatrixXd Ddem =
        ((Xd * params.Wdemo().transpose()).rowwise() + params.bdemo().transpose()).array().tanh();
    MatrixXd U(count, 2 * H);
    U.leftCols(H) = tp.Hs.back();
    U.rightCols(H) = Ddem;
    const MatrixXd Zj = (U * params.Uj().transpose()).rowwise() + params.aj().transpose();
    const MatrixXd R = Zj.array().max(0.0);
    const VectorXd o = (R * params.v()).array() + params.b();
    out.segment(first, count) = sigmoid_vec(o);
  });
}

}  // namespace intent::batch

