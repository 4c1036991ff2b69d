#pragma once

#include <Eigen/Dense>
#include <span>

#include "intent/dataset.hpp"
#include "intent/nn.hpp"
#include "intent/seq.hpp"

// Mini-batch kernels. Every kernel exists twice:
//
//   *_reference  - plain per-example loop over the single-example routines,
//                  gradients summed in index order. Slow, obviously correct;
//                  the tests pin the fast path against it.
//   fast path    - whole blocks of examples processed as matrix products,
//                  blocks distributed over OpenMP threads. Block partials
//                  are reduced in fixed block order, so results are
//                  bit-identical for any thread count.
//
// Dropout masks are supplied by the caller (one row of multipliers per batch
// member, 0x0 for none), so both paths consume identical randomness.
namespace intent::batch {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Members per block for the fast kernels. Fixed, not tied to thread count;
// changing it changes floating-point reduction order.
inline constexpr int kBlock = 64;

struct GradResult {
  VectorXd grad;  // mean gradient over the batch, parameter-pack layout
  double mean_loss = 0.0;
};

// --- feed-forward over a row-per-example matrix ---------------------------

GradResult ffnn_grad_reference(const nn::FfnnParams& params, const MatrixXd& X,
                               const VectorXd& y, std::span<const int> idx,
                               const MatrixXd& drop);
GradResult ffnn_grad(const nn::FfnnParams& params, const MatrixXd& X, const VectorXd& y,
                     std::span<const int> idx, const MatrixXd& drop);

VectorXd ffnn_scores_reference(const nn::FfnnParams& params, const MatrixXd& X);
VectorXd ffnn_scores(const nn::FfnnParams& params, const MatrixXd& X);

// --- sequence models over encoded sessions --------------------------------

GradResult lstm_grad_reference(const seq::LstmParams& params,
                               std::span<const EncodedSequence> data, std::span<const int> idx,
                               const MatrixXd& drop);
GradResult lstm_grad(const seq::LstmParams& params, std::span<const EncodedSequence> data,
                     std::span<const int> idx, const MatrixXd& drop);

GradResult rnn_grad_reference(const seq::RnnParams& params,
                              std::span<const EncodedSequence> data, std::span<const int> idx,
                              const MatrixXd& drop);
GradResult rnn_grad(const seq::RnnParams& params, std::span<const EncodedSequence> data,
                    std::span<const int> idx, const MatrixXd& drop);

VectorXd lstm_scores_reference(const seq::LstmParams& params,
                               std::span<const EncodedSequence> data);
VectorXd lstm_scores(const seq::LstmParams& params, std::span<const EncodedSequence> data);
VectorXd rnn_scores_reference(const seq::RnnParams& params,
                              std::span<const EncodedSequence> data);
VectorXd rnn_scores(const seq::RnnParams& params, std::span<const EncodedSequence> data);

// Fusion model: sequences plus a row-aligned demographic matrix.
GradResult concat_seq_grad_reference(const seq::ConcatSeqParams& params,
                                     std::span<const EncodedSequence> data, const MatrixXd& demo,
                                     std::span<const int> idx, const MatrixXd& drop);
GradResult concat_seq_grad(const seq::ConcatSeqParams& params,
                           std::span<const EncodedSequence> data, const MatrixXd& demo,
                           std::span<const int> idx, const MatrixXd& drop);
VectorXd concat_seq_scores(const seq::ConcatSeqParams& params,
                           std::span<const EncodedSequence> data, const MatrixXd& demo);

}  // namespace intent::batch
