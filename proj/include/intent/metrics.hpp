#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace intent::metrics {

// Parallel arrays of model scores and binary labels.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  std::size_t size() const { return scores.size(); }
  void validate() const;  // equal lengths, labels binary, finite scores
};

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct EvalReport {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  long n_pos = 0, n_neg = 0;
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double auc = 0.0;
  double predicted_positive_rate = 0.0;
  std::vector<RocPoint> roc;
};

// Threshold such that round(target_rate * N) scores are >= it (the k-th
// largest score, k clamped to [1, N]). `degenerate` is set when all scores
// are equal.
double select_threshold(const ScoredSet& scored, double target_rate,
                        bool* degenerate = nullptr);

// Confusion counts and threshold metrics; prediction rule is score >= theta.
// Balanced accuracy = TP/(2 N+) + TN/(2 N-). Throws when one class is absent.
EvalReport confusion_metrics(const ScoredSet& scored, double threshold);

struct AucResult {
  double auc = 0.0;
  std::vector<RocPoint> roc;  // one vertex per distinct score, (0,0) to (1,1)
};

// Trapezoidal area under the ROC built over all distinct score thresholds;
// ties are grouped, which makes the area equal to the Mann-Whitney statistic
// with ties counted 1/2.
AucResult roc_auc(const ScoredSet& scored);

// confusion_metrics + AUC + ROC points in one report.
EvalReport evaluate(const ScoredSet& scored, double threshold);

struct BaselineInputs {
  std::vector<int> train_labels;
  std::vector<double> train_lengths;
  std::vector<int> test_labels;
  std::vector<double> test_lengths;
  double target_rate = 0.0;  // prior-matched predicted-positive rate
  std::uint64_t seed = 0;
};

struct BaselineReports {
  EvalReport most_frequent;
  EvalReport stratified;
  EvalReport length;
  std::vector<double> length_scores;  // test scores of the length model
};

// The three reference baselines: constant most-frequent label, label drawn
// at the training prevalence, and a one-feature logistic model on session
// length.
BaselineReports run_baselines(const BaselineInputs& in);

std::string roc_csv(const std::vector<RocPoint>& roc);

}  // namespace intent::metrics
