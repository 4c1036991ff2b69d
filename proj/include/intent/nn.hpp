#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "intent/rng.hpp"

namespace intent::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

enum class Act { Tanh, Relu };

const char* act_name(Act a);
Act act_from_name(const std::string& name);

// Flat parameter storage with named matrix blocks. Keeping every weight of a
// model in one contiguous vector lets the optimizer, the serializer and the
// finite-difference checks all work on a single array, while the math code
// still sees properly shaped matrices through Eigen maps.
class ParamPack {
 public:
  struct Block {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
  };

  ParamPack() = default;
  explicit ParamPack(std::vector<Block> blocks);

  Eigen::Index size() const { return data_.size(); }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  const std::vector<Block>& blocks() const { return blocks_; }
  int block_index(const std::string& name) const;  // ShapeError if absent

  VectorXd& flat() { return data_; }
  const VectorXd& flat() const { return data_; }

  Eigen::Map<MatrixXd> mat(int block) { return map_mat(data_, block); }
  Eigen::Map<const MatrixXd> mat(int block) const { return map_mat(data_, block); }
  Eigen::Map<VectorXd> vec(int block) { return map_vec(data_, block); }
  Eigen::Map<const VectorXd> vec(int block) const { return map_vec(data_, block); }
  double& scalar(int block) { return data_[offsets_[static_cast<std::size_t>(block)]]; }
  double scalar(int block) const { return data_[offsets_[static_cast<std::size_t>(block)]]; }

  // Views over an external flat array laid out like this pack (gradients,
  // optimizer moments).
  Eigen::Map<MatrixXd> map_mat(VectorXd& storage, int block) const;
  Eigen::Map<const MatrixXd> map_mat(const VectorXd& storage, int block) const;
  Eigen::Map<VectorXd> map_vec(VectorXd& storage, int block) const;
  Eigen::Map<const VectorXd> map_vec(const VectorXd& storage, int block) const;

 private:
  void check_storage(const VectorXd& storage) const;

  std::vector<Block> blocks_;
  std::vector<Eigen::Index> offsets_;
  VectorXd data_;
};

// Gradient of a scalar loss w.r.t. every entry of a parameter pack, in the
// pack's layout.
struct GradientSet {
  VectorXd flat;
};

// Feed-forward network: dims = [input, hidden..., 1], one activation tag per
// hidden layer, sigmoid on the single output unit.
struct FfnnParams {
  std::vector<int> dims;
  std::vector<Act> acts;
  ParamPack pack;

  int n_hidden() const { return static_cast<int>(dims.size()) - 2; }
  int input_dim() const { return dims.front(); }
  int last_hidden_dim() const { return dims[dims.size() - 2]; }

  Eigen::Map<const MatrixXd> weight(int layer) const { return pack.mat(2 * layer); }
  Eigen::Map<MatrixXd> weight(int layer) { return pack.mat(2 * layer); }
  Eigen::Map<const VectorXd> bias(int layer) const { return pack.vec(2 * layer + 1); }
  Eigen::Map<VectorXd> bias(int layer) { return pack.vec(2 * layer + 1); }
  Eigen::Map<const VectorXd> out_weight() const { return pack.vec(2 * n_hidden()); }
  Eigen::Map<VectorXd> out_weight() { return pack.vec(2 * n_hidden()); }
  double out_bias() const { return pack.scalar(2 * n_hidden() + 1); }
  double& out_bias() { return pack.scalar(2 * n_hidden() + 1); }
};

// Glorot-uniform weights, zero biases, deterministic in the seed. The default
// activation pattern is tanh on the first hidden layer and ReLU on the rest.
FfnnParams init_ffnn(const std::vector<int>& dims, std::uint64_t seed);
FfnnParams init_ffnn(const std::vector<int>& dims, const std::vector<Act>& acts,
                     std::uint64_t seed);

// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
  VectorXd x;
  std::vector<VectorXd> z;    // per-layer pre-activations
  std::vector<VectorXd> h;    // per-layer activations, before dropout
  std::vector<VectorXd> out;  // what actually feeds the next layer
  VectorXd drop;              // multiplier 0 or 1/(1-rate) on layer 0; empty if unused
  double o = 0.0;
  double yhat = 0.5;
};

// Inference when rng is null; with rng supplied, inverted dropout is applied
// after the first hidden layer (surviving units scaled by 1/(1-rate) so the
// inference path needs no rescaling).
ForwardTrace ffnn_forward(const FfnnParams& params, const VectorXd& x,
                          double dropout_rate = 0.0, Rng* rng = nullptr);

// Same pass with a caller-supplied dropout multiplier vector (entries 0 or
// 1/(1-rate); empty means no dropout). Lets batch kernels and the training
// loop share one mask stream.
ForwardTrace ffnn_forward_masked(const FfnnParams& params, const VectorXd& x,
                                 const VectorXd& drop);

// Multiplier vector for inverted dropout.
VectorXd draw_dropout_mask(Eigen::Index n, double rate, Rng& rng);

// Binary cross-entropy with the prediction clamped to [1e-12, 1 - 1e-12].
double cross_entropy(double yhat, int y);

// Exact gradients of cross_entropy(ffnn_forward(...)) w.r.t. every parameter.
// Dropout masks recorded in the trace are honored.
GradientSet ffnn_backward(const ForwardTrace& trace, int y, const FfnnParams& params);

struct AdamHyper {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

struct AdamState {
  VectorXd m;
  VectorXd v;
  long t = 0;
  AdamHyper hyper;

  AdamState() = default;
  explicit AdamState(Eigen::Index n, AdamHyper h = {});
};

// One bias-corrected Adam update, in place. The step counter is incremented
// before use.
void adam_step(VectorXd& theta, const VectorXd& grad, AdamState& state);

}  // namespace intent::nn
