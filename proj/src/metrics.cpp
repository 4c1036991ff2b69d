#include "intent/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "intent/errors.hpp"
#include "intent/nn.hpp"
#include "intent/rng.hpp"

namespace intent::metrics {

void ScoredSet::validate() const {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  if (scores.empty()) throw ShapeError("empty scored set");
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("non-finite score");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("label must be 0 or 1");
  }
}

namespace {

std::pair<long, long> class_sizes(const ScoredSet& s) {
  long pos = 0;
  for (int y : s.labels) pos += y;
  return {pos, static_cast<long>(s.labels.size()) - pos};
}

void require_both_classes(long n_pos, long n_neg, const char* what) {
  if (n_pos == 0) throw DataError(std::string(what) + " undefined: no positive labels");
  if (n_neg == 0) throw DataError(std::string(what) + " undefined: no negative labels");
}

}  // namespace

double select_threshold(const ScoredSet& scored, double target_rate, bool* degenerate) {
  scored.validate();
  if (target_rate <= 0.0 || target_rate >= 1.0) {
    throw ConfigError("target rate must lie in (0, 1)");
  }
  std::vector<double> sorted = scored.scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  if (degenerate != nullptr) *degenerate = sorted.front() == sorted.back();

  const long n = static_cast<long>(sorted.size());
  long k = std::lround(target_rate * static_cast<double>(n));
  k = std::clamp<long>(k, 1, n);
  return sorted[static_cast<std::size_t>(k - 1)];
}

EvalReport confusion_metrics(const ScoredSet& scored, double threshold) {
  scored.validate();
  EvalReport r;
  r.threshold = threshold;
  std::tie(r.n_pos, r.n_neg) = class_sizes(scored);
  require_both_classes(r.n_pos, r.n_neg, "balanced accuracy");

  for (std::size_t i = 0; i < scored.size(); ++i) {
    const bool predicted = scored.scores[i] >= threshold;
    if (scored.labels[i] == 1) {
      predicted ? ++r.tp : ++r.fn;
    } else {
      predicted ? ++r.fp : ++r.tn;
    }
  }
  r.balanced_accuracy = static_cast<double>(r.tp) / (2.0 * static_cast<double>(r.n_pos)) +
                        static_cast<double>(r.tn) / (2.0 * static_cast<double>(r.n_neg));
  r.precision = r.tp + r.fp == 0
                    ? 0.0
                    : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  r.recall = static_cast<double>(r.tp) / static_cast<double>(r.n_pos);
  r.predicted_positive_rate =
      static_cast<double>(r.tp + r.fp) / static_cast<double>(scored.size());
  return r;
}

AucResult roc_auc(const ScoredSet& scored) {
  scored.validate();
  const auto [n_pos, n_neg] = class_sizes(scored);
  require_both_classes(n_pos, n_neg, "AUC");

  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scored.scores[a] > scored.scores[b];
  });

  AucResult res;
  res.roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  long tp = 0, fp = 0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scored.scores[order[i]];
    // consume the whole tie group at this score
    while (i < order.size() && scored.scores[order[i]] == s) {
      scored.labels[order[i]] == 1 ? ++tp : ++fp;
      ++i;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
    const double tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
    res.auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    res.roc.push_back({s, fpr, tpr});
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  return res;
}

EvalReport evaluate(const ScoredSet& scored, double threshold) {
  EvalReport r = confusion_metrics(scored, threshold);
  AucResult a = roc_auc(scored);
  r.auc = a.auc;
  r.roc = std::move(a.roc);
  return r;
}

namespace {

// One-feature logistic regression fitted with full-batch Adam on the
// standardized feature.
std::vector<double> fit_length_model(const std::vector<double>& train_lengths,
                                     const std::vector<int>& train_labels,
                                     const std::vector<double>& test_lengths) {
  const std::size_t n = train_lengths.size();
  double mean = 0.0;
  for (double v : train_lengths) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : train_lengths) var += (v - mean) * (v - mean);
  double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 1.0;
  if (sd == 0.0) sd = 1.0;

  double w = 0.0, b = 0.0;
  nn::AdamState state(2, {.step_size = 0.05});
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
  for (int epoch = 0; epoch < 400; ++epoch) {
    double gw = 0.0, gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = (train_lengths[i] - mean) / sd;
      const double p = nn::sigmoid(theta[0] * x + theta[1]);
      const double d = p - static_cast<double>(train_labels[i]);
      gw += d * x;
      gb += d;
    }
    Eigen::VectorXd grad(2);
    grad << gw / static_cast<double>(n), gb / static_cast<double>(n);
    nn::adam_step(theta, grad, state);
  }
  w = theta[0];
  b = theta[1];

  std::vector<double> out;
  out.reserve(test_lengths.size());
  for (double v : test_lengths) {
    out.push_back(nn::sigmoid(w * (v - mean) / sd + b));
  }
  return out;
}

}  // namespace

BaselineReports run_baselines(const BaselineInputs& in) {
  if (in.train_labels.empty() || in.test_labels.empty()) {
    throw DataError("baselines need non-empty train and test labels");
  }
  if (in.train_labels.size() != in.train_lengths.size() ||
      in.test_labels.size() != in.test_lengths.size()) {
    throw ShapeError("labels and lengths differ in length");
  }

  long train_pos = 0;
  for (int y : in.train_labels) train_pos += y;
  const double prevalence =
      static_cast<double>(train_pos) / static_cast<double>(in.train_labels.size());
  const int majority = prevalence > 0.5 ? 1 : 0;

  BaselineReports out;

  // Most-frequent: a constant prediction. The scores carry no ranking, so
  // AUC degenerates to the all-ties value 1/2.
  {
    ScoredSet s;
    s.labels = in.test_labels;
    s.scores.assign(in.test_labels.size(), static_cast<double>(majority));
    out.most_frequent = confusion_metrics(s, 0.5);
    out.most_frequent.auc = 0.5;
  }

  // Stratified: predicted label drawn at the training prevalence.
  {
    Rng rng(derive_seed(in.seed, 0x5742));
    ScoredSet s;
    s.labels = in.test_labels;
    s.scores.reserve(in.test_labels.size());
    for (std::size_t i = 0; i < in.test_labels.size(); ++i) {
      s.scores.push_back(rng.bernoulli(prevalence) ? 1.0 : 0.0);
    }
    out.stratified = confusion_metrics(s, 0.5);
    out.stratified.auc = roc_auc(s).auc;
  }

  // Length model: logistic on session length, thresholded by the same
  // prior-matched rule as the real models.
  {
    ScoredSet s;
    s.labels = in.test_labels;
    s.scores = fit_length_model(in.train_lengths, in.train_labels, in.test_lengths);
    const double theta = select_threshold(s, in.target_rate);
    out.length = evaluate(s, theta);
    out.length_scores = s.scores;
  }
  return out;
}

std::string roc_csv(const std::vector<RocPoint>& roc) {
  std::ostringstream os;
  os << "threshold,fpr,tpr\n";
  os.precision(17);
  for (const RocPoint& p : roc) {
    os << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
  }
  return os.str();
}

}  // namespace intent::metrics
