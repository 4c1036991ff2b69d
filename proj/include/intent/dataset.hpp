#pragma once

#include <Eigen/Dense>
#include <vector>

namespace intent {

// One valid timestep of an encoded session: which page category was viewed,
// which click categories fired inside the pageview's window, and the
// standardized time since the previous pageview. Stored sparsely; the dense
// per-step layout is [page one-hot | click multi-hot | time delta].
struct SeqStep {
  int page = -1;
  std::vector<int> clicks;
  double delta = 0.0;
};

// Fixed-length sequence (T rows). Real steps occupy the trailing rows; the
// leading T - steps.size() rows are zero padding with mask false, so the
// final row always holds real data. The feature-ablation study removes
// whole column groups, hence the zeroable page/click/delta dimensions.
struct EncodedSequence {
  int T = 0;
  int page_dims = 0;
  int click_dims = 0;
  bool has_delta = true;
  std::vector<SeqStep> steps;
  int y = 0;

  int dim() const { return page_dims + click_dims + (has_delta ? 1 : 0); }
  int n_valid() const { return static_cast<int>(steps.size()); }
  int pad() const { return T - n_valid(); }

  std::vector<bool> mask() const {
    std::vector<bool> m(static_cast<std::size_t>(T), false);
    for (int t = pad(); t < T; ++t) m[static_cast<std::size_t>(t)] = true;
    return m;
  }

  // Writes step t of this sequence into row `row` of X (which must already
  // be zeroed).
  void fill_row(int t, Eigen::MatrixXd& X, Eigen::Index row) const {
    if (t < pad()) return;
    const SeqStep& s = steps[static_cast<std::size_t>(t - pad())];
    if (s.page >= 0 && page_dims > 0) X(row, s.page) = 1.0;
    for (int c : s.clicks) X(row, page_dims + c) = 1.0;
    if (has_delta) X(row, page_dims + click_dims) = s.delta;
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(T, dim());
    for (int t = 0; t < T; ++t) fill_row(t, X, t);
    return X;
  }
};

}  // namespace intent
