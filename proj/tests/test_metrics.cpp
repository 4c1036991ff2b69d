#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "intent/errors.hpp"
#include "intent/metrics.hpp"
#include "intent/rng.hpp"
#include "oracles.hpp"

using namespace intent;
using metrics::ScoredSet;

namespace {

ScoredSet random_set(Rng& rng, int n, bool with_ties) {
  ScoredSet s;
  for (int i = 0; i < n; ++i) {
    double score = rng.unit();
    if (with_ties) score = std::round(score * 8.0) / 8.0;
    s.scores.push_back(score);
    s.labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
  }
  // both classes present
  s.labels[0] = 1;
  s.labels[static_cast<std::size_t>(n - 1)] = 0;
  return s;
}

}  // namespace

TEST_CASE("threshold: k-th largest score rule") {
  ScoredSet s;
  s.scores = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  s.labels = {0, 0, 0, 0, 1, 1, 1, 1};
  CHECK(metrics::select_threshold(s, 0.25) == 0.7);

  long positives = 0;
  for (double v : s.scores) positives += v >= 0.7 ? 1 : 0;
  CHECK(positives == 2);
}

TEST_CASE("threshold: tiny target rate keeps exactly one positive") {
  ScoredSet s;
  s.scores = {0.2, 0.9, 0.5};
  s.labels = {0, 1, 0};
  CHECK(metrics::select_threshold(s, 1.0 / 3.0) == 0.9);
  CHECK(metrics::select_threshold(s, 0.01) == 0.9);  // k clamps to 1
}

TEST_CASE("threshold: degenerate constant scores flagged") {
  ScoredSet s;
  s.scores = {0.4, 0.4, 0.4};
  s.labels = {1, 0, 1};
  bool degenerate = false;
  CHECK(metrics::select_threshold(s, 0.5, &degenerate) == 0.4);
  CHECK(degenerate);
}

TEST_CASE("threshold achieves the target rate within 1/N") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 20 + static_cast<int>(rng.below(400));
    ScoredSet s;
    for (int i = 0; i < n; ++i) {
      s.scores.push_back(rng.unit());  // continuous, ties almost surely absent
      s.labels.push_back(rng.bernoulli(0.2) ? 1 : 0);
    }
    s.labels[0] = 1;
    s.labels[1] = 0;
    const double rate = rng.uniform(0.05, 0.9);
    const double theta = metrics::select_threshold(s, rate);
    long pos = 0;
    for (double v : s.scores) pos += v >= theta ? 1 : 0;
    CHECK(std::abs(static_cast<double>(pos) / n - rate) <= 1.0 / n + 1e-12);
  }
}

TEST_CASE("confusion metrics: hand-counted six points") {
  ScoredSet s;
  s.labels = {1, 1, 0, 0, 0, 0};
  s.scores = {1.0, 0.0, 0.0, 0.0, 0.0, 1.0};
  const metrics::EvalReport r = metrics::confusion_metrics(s, 1.0);
  CHECK(r.tp == 1);
  CHECK(r.fn == 1);
  CHECK(r.tn == 3);
  CHECK(r.fp == 1);
  CHECK(r.balanced_accuracy == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(r.precision == doctest::Approx(0.5));
  CHECK(r.recall == doctest::Approx(0.5));
}

TEST_CASE("confusion metrics: constant predictors score balanced accuracy 1/2") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const ScoredSet s = random_set(rng, 50, false);
    const metrics::EvalReport none = metrics::confusion_metrics(s, 2.0);   // all negative
    const metrics::EvalReport all = metrics::confusion_metrics(s, -1.0);   // all positive
    CHECK(none.balanced_accuracy == 0.5);
    CHECK(all.balanced_accuracy == 0.5);
    CHECK(none.precision == 0.0);  // no predicted positives
    CHECK(none.recall == 0.0);
  }
}

TEST_CASE("confusion metrics: perfect predictions") {
  ScoredSet s;
  s.labels = {1, 0, 1, 0};
  s.scores = {0.9, 0.1, 0.8, 0.2};
  const metrics::EvalReport r = metrics::confusion_metrics(s, 0.5);
  CHECK(r.balanced_accuracy == 1.0);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
}

TEST_CASE("confusion metrics rejects single-class input") {
  ScoredSet s;
  s.labels = {1, 1};
  s.scores = {0.5, 0.6};
  CHECK_THROWS_WITH_AS(metrics::confusion_metrics(s, 0.5),
                       doctest::Contains("no negative labels"), DataError);
}

TEST_CASE("auc: four-point hand case") {
  ScoredSet s;
  s.labels = {1, 1, 0, 0};
  s.scores = {0.8, 0.35, 0.4, 0.1};
  CHECK(metrics::roc_auc(s).auc == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("auc: separated scores give 1, constant scores give 1/2") {
  ScoredSet sep;
  sep.labels = {0, 0, 1, 1};
  sep.scores = {0.1, 0.2, 0.8, 0.9};
  CHECK(metrics::roc_auc(sep).auc == 1.0);

  ScoredSet ties;
  ties.labels = {0, 1, 0, 1, 1};
  ties.scores = {0.3, 0.3, 0.3, 0.3, 0.3};
  CHECK(metrics::roc_auc(ties).auc == 0.5);
}

TEST_CASE("auc equals pairwise brute force on random sets") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + static_cast<int>(rng.below(995));
    const ScoredSet s = random_set(rng, n, trial % 2 == 0);
    const double fast = metrics::roc_auc(s).auc;
    const double slow = oracles::auc_bruteforce(s.scores, s.labels);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
  }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
  Rng rng(13);
  const ScoredSet s = random_set(rng, 200, true);
  ScoredSet t = s;
  for (double& v : t.scores) v = std::exp(3.0 * v + 1.0);
  CHECK(metrics::roc_auc(s).auc == metrics::roc_auc(t).auc);
}

TEST_CASE("roc curve is monotone from (0,0) to (1,1)") {
  Rng rng(17);
  const ScoredSet s = random_set(rng, 300, true);
  const metrics::AucResult r = metrics::roc_auc(s);
  CHECK(r.roc.front().fpr == 0.0);
  CHECK(r.roc.front().tpr == 0.0);
  CHECK(r.roc.back().fpr == 1.0);
  CHECK(r.roc.back().tpr == 1.0);
  for (std::size_t i = 1; i < r.roc.size(); ++i) {
    CHECK(r.roc[i].fpr >= r.roc[i - 1].fpr);
    CHECK(r.roc[i].tpr >= r.roc[i - 1].tpr);
  }
}

TEST_CASE("baselines: most-frequent has balanced accuracy exactly 1/2") {
  metrics::BaselineInputs in;
  Rng rng(19);
  for (int i = 0; i < 400; ++i) {
    in.train_labels.push_back(rng.bernoulli(0.13) ? 1 : 0);
    in.train_lengths.push_back(static_cast<double>(1 + rng.below(20)));
  }
  for (int i = 0; i < 200; ++i) {
    in.test_labels.push_back(rng.bernoulli(0.13) ? 1 : 0);
    in.test_lengths.push_back(static_cast<double>(1 + rng.below(20)));
  }
  in.test_labels[0] = 1;
  in.train_labels[0] = 1;
  in.target_rate = 0.13;
  in.seed = 5;

  const metrics::BaselineReports r = metrics::run_baselines(in);
  CHECK(r.most_frequent.balanced_accuracy == 0.5);
  CHECK(r.most_frequent.precision == 0.0);
  CHECK(r.most_frequent.auc == 0.5);
}

TEST_CASE("baselines: stratified predicted-positive rate tracks the prior") {
  metrics::BaselineInputs in;
  Rng rng(23);
  const double prev = 0.13;
  for (int i = 0; i < 2000; ++i) {
    in.train_labels.push_back(rng.bernoulli(prev) ? 1 : 0);
    in.train_lengths.push_back(5.0);
  }
  for (int i = 0; i < 100000; ++i) {
    in.test_labels.push_back(rng.bernoulli(prev) ? 1 : 0);
    in.test_lengths.push_back(5.0);
  }
  in.target_rate = prev;
  in.seed = 29;
  const metrics::BaselineReports r = metrics::run_baselines(in);
  const double rate = r.stratified.predicted_positive_rate;
  // binomial 3-sigma band around the training prevalence
  long train_pos = 0;
  for (int y : in.train_labels) train_pos += y;
  const double p = static_cast<double>(train_pos) / static_cast<double>(in.train_labels.size());
  const double sigma = std::sqrt(p * (1 - p) / 100000.0);
  CHECK(std::abs(rate - p) <= 3.0 * sigma);
}

TEST_CASE("baselines: length model is near chance when length carries no signal") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed * 97 + 1);
    metrics::BaselineInputs in;
    for (int i = 0; i < 1500; ++i) {
      in.train_labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
      in.train_lengths.push_back(static_cast<double>(1 + rng.below(25)));
    }
    for (int i = 0; i < 700; ++i) {
      in.test_labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
      in.test_lengths.push_back(static_cast<double>(1 + rng.below(25)));
    }
    in.test_labels[0] = 1;
    in.test_labels[1] = 0;
    in.target_rate = 0.3;
    in.seed = seed;
    total += metrics::run_baselines(in).length.auc;
  }
  CHECK(std::abs(total / 10.0 - 0.5) < 0.03);
}

TEST_CASE("scored sets validate") {
  ScoredSet bad;
  bad.scores = {0.5};
  bad.labels = {1, 0};
  CHECK_THROWS_AS(bad.validate(), ShapeError);

  ScoredSet nanset;
  nanset.scores = {std::nan("")};
  nanset.labels = {1};
  CHECK_THROWS_AS(nanset.validate(), NumericError);

  ScoredSet badlabel;
  badlabel.scores = {0.5};
  badlabel.labels = {3};
  CHECK_THROWS_AS(badlabel.validate(), DataError);
}

TEST_CASE("roc csv renders header and rows") {
  ScoredSet s;
  s.labels = {1, 0};
  s.scores = {0.8, 0.2};
  const metrics::AucResult r = metrics::roc_auc(s);
  const std::string csv = metrics::roc_csv(r.roc);
  CHECK(csv.rfind("threshold,fpr,tpr\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(r.roc.size()) + 1);
}
