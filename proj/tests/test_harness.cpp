#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "intent/errors.hpp"
#include "intent/harness.hpp"
#include "intent/simgen.hpp"

using namespace intent;

namespace {

struct Fixture {
  harness::Corpus corpus;
  harness::Prepared data;
};

Fixture build_fixture(int n_users, std::uint64_t seed) {
  gen::GenConfig gc;
  gc.n_users = n_users;
  gc.seed = seed;
  const gen::Generated out = gen::generate(gc);

  std::istringstream clicks(out.clicks_jsonl);
  std::vector<sessions::Session> sess =
      sessions::sessionize(sessions::parse_click_log(clicks).events);
  sessions::label_and_censor(sess, sessions::PurchaseMatcher::parse(gen::kPurchaseMatcherSpec));

  std::istringstream demo(out.demographics_jsonl);
  const std::vector<features::DemoRecord> records = features::parse_demo_records(demo);

  std::istringstream schema_in(
      "age = numeric demographic\n"
      "gender = categorical demographic\n"
      "income_class = ordinal demographic\n"
      "education_level = ordinal demographic\n"
      "existing_customer = categorical demographic\n"
      "month = cyclic:12 time\n"
      "weekday = cyclic:7 time\n"
      "os = categorical place\n"
      "previous_visits = numeric place\n"
      "distance_to_last_visit = numeric_max place\n");
  const features::DemoSchema schema = features::parse_demo_schema(schema_in);

  Fixture f;
  f.corpus = harness::build_corpus(std::move(sess), records, {});
  f.data = harness::prepare(f.corpus, schema);
  return f;
}

const Fixture& fx() {
  static const Fixture f = build_fixture(900, 42);
  return f;
}

harness::TrainConfig quick_config(harness::ModelKind kind, std::uint64_t seed = 3) {
  harness::TrainConfig cfg;
  cfg.kind = kind;
  cfg.hidden = 8;
  cfg.batch = 64;
  cfg.dropout = 0.2;
  cfg.max_epochs = 4;
  cfg.patience = 2;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("split: ten sessions go 8/1/1 and stay chronological") {
  std::vector<sessions::Session> sess(10);
  for (int i = 0; i < 10; ++i) {
    sess[static_cast<std::size_t>(i)].user_id = "u" + std::to_string(i);
    sess[static_cast<std::size_t>(i)].session_start = (9 - i) * 1000;  // reversed input
  }
  const auto splits = harness::split_out_of_time(sess, {});
  CHECK(splits[0].size() == 8);
  CHECK(splits[1].size() == 1);
  CHECK(splits[2].size() == 1);

  sessions::Timestamp max_train = 0;
  for (const sessions::Session& s : splits[0]) max_train = std::max(max_train, s.session_start);
  CHECK(max_train <= splits[1][0].session_start);
  CHECK(splits[1][0].session_start <= splits[2][0].session_start);

  CHECK_THROWS_AS(harness::split_out_of_time(std::vector<sessions::Session>(5), {}), DataError);
}

TEST_CASE("split: permuted input with the same timestamps gives identical splits") {
  Rng rng(5);
  std::vector<sessions::Session> sess(60);
  for (int i = 0; i < 60; ++i) {
    sess[static_cast<std::size_t>(i)].user_id = "u" + std::to_string(i);
    sess[static_cast<std::size_t>(i)].session_start = static_cast<sessions::Timestamp>(rng.below(1000000));
  }
  std::vector<sessions::Session> shuffled = sess;
  rng.shuffle(shuffled);

  const auto a = harness::split_out_of_time(sess, {});
  const auto b = harness::split_out_of_time(shuffled, {});
  for (int s = 0; s < 3; ++s) {
    REQUIRE(a[s].size() == b[s].size());
    std::multiset<sessions::Timestamp> ta, tb;
    for (const auto& x : a[s]) ta.insert(x.session_start);
    for (const auto& x : b[s]) tb.insert(x.session_start);
    CHECK(ta == tb);
  }
}

TEST_CASE("early stopper: strictly decreasing metric stops after patience epochs") {
  harness::EarlyStopper stop(5);
  bool stopped = false;
  double value = 0.9;
  int epoch = 0;
  while (!stopped && epoch < 100) {
    ++epoch;
    stopped = stop.observe(value);
    value -= 0.01;
  }
  CHECK(epoch == 6);
  CHECK(stop.best_epoch() == 1);
  CHECK(stop.best_value() == doctest::Approx(0.9));
}

TEST_CASE("early stopper: improvements reset the counter") {
  harness::EarlyStopper stop(2);
  CHECK_FALSE(stop.observe(0.5));
  CHECK_FALSE(stop.observe(0.4));  // stale 1
  CHECK_FALSE(stop.observe(0.6)); // new best
  CHECK_FALSE(stop.observe(0.6)); // ties are not improvements: stale 1
  CHECK(stop.observe(0.5));       // stale 2 -> stop
  CHECK(stop.best_epoch() == 3);
}

TEST_CASE("corpus joins demographics by user and session start") {
  const Fixture& f = fx();
  for (int s = 0; s < 3; ++s) {
    REQUIRE(f.corpus.splits[s].size() == f.corpus.demo[s].size());
    for (std::size_t i = 0; i < f.corpus.splits[s].size(); ++i) {
      CHECK(f.corpus.splits[s][i].user_id == f.corpus.demo[s][i].user_id);
      CHECK(f.corpus.splits[s][i].session_start == f.corpus.demo[s][i].session_start);
    }
  }
  // a session without a record is an error naming the user
  std::vector<sessions::Session> sess = f.corpus.splits[0];
  sess.resize(12);
  std::vector<features::DemoRecord> none;
  CHECK_THROWS_WITH_AS(harness::build_corpus(sess, none, {}),
                       doctest::Contains(sess[0].user_id.c_str()), DataError);
}

TEST_CASE("prepared data is row-aligned and regular") {
  const harness::Prepared& d = fx().data;
  for (int s = 0; s < 3; ++s) {
    const harness::DataView& v = d.split(s);
    CHECK(v.size() > 0);
    CHECK(v.engineered.rows() == static_cast<Eigen::Index>(v.size()));
    CHECK(v.demo.rows() == static_cast<Eigen::Index>(v.size()));
    CHECK(v.labels.size() == static_cast<Eigen::Index>(v.size()));
    for (const EncodedSequence& q : v.seq) {
      CHECK(q.T == 30);
      CHECK(q.dim() == d.split(0).seq.front().dim());
      CHECK(q.n_valid() >= 1);
    }
  }
  CHECK(d.target_rate > 0.05);
  CHECK(d.target_rate < 0.25);
  CHECK_FALSE(d.enc.fingerprint.empty());
}

TEST_CASE("training is deterministic given config and seed") {
  const harness::TrainConfig cfg = quick_config(harness::ModelKind::EngineeredFfnn);
  const harness::TrainOutcome a = harness::train_with_early_stopping(cfg, fx().data);
  const harness::TrainOutcome b = harness::train_with_early_stopping(cfg, fx().data);
  CHECK(a.record.train_loss == b.record.train_loss);
  CHECK(a.record.val_auc == b.record.val_auc);
  CHECK(a.record.stopped_epoch == b.record.stopped_epoch);
  CHECK(a.model->theta() == b.model->theta());
  CHECK(a.test_scores == b.test_scores);
  CHECK(a.record.test_report.auc == b.record.test_report.auc);

  // returned parameters are never from a worse-than-best validation epoch
  double best = 0.0;
  for (double v : a.record.val_auc) best = std::max(best, v);
  CHECK(a.record.val_auc[static_cast<std::size_t>(a.record.best_epoch - 1)] == best);
}

TEST_CASE("every model kind trains end to end") {
  for (harness::ModelKind kind :
       {harness::ModelKind::EngineeredFfnn, harness::ModelKind::DemographyFfnn,
        harness::ModelKind::ConcatEngineered, harness::ModelKind::SequentialLstm,
        harness::ModelKind::RnnReference, harness::ModelKind::ConcatSequential}) {
    harness::TrainConfig cfg = quick_config(kind);
    cfg.max_epochs = 2;
    const harness::TrainOutcome out = harness::train_with_early_stopping(cfg, fx().data);
    CHECK(out.record.stopped_epoch >= 1);
    CHECK(out.record.test_report.auc > 0.0);
    CHECK(out.test_scores.size() == static_cast<Eigen::Index>(fx().data.test.size()));
  }
}

TEST_CASE("fusion model wires both branches into the joint head") {
  const std::unique_ptr<harness::Model> m =
      harness::make_model(harness::ModelKind::ConcatSequential, 8, fx().data, 1);
  CHECK(m->mask_width() == 16);  // joint head reads H + H inputs
}

TEST_CASE("threshold protocol: predicted-positive rate within 1/N of target") {
  const harness::TrainConfig cfg = quick_config(harness::ModelKind::EngineeredFfnn);
  const harness::TrainOutcome out = harness::train_with_early_stopping(cfg, fx().data);
  const double n = static_cast<double>(fx().data.test.size());
  CHECK(std::abs(out.record.test_report.predicted_positive_rate - fx().data.target_rate) <=
        1.0 / n + 1e-12);
}

TEST_CASE("model JSON round trip preserves scores") {
  harness::TrainConfig cfg = quick_config(harness::ModelKind::SequentialLstm);
  cfg.max_epochs = 2;
  cfg.hidden = 6;
  const harness::TrainOutcome out = harness::train_with_early_stopping(cfg, fx().data);
  const model_io::Json j = out.model->params_json();
  const std::unique_ptr<harness::Model> reloaded = harness::model_from_json(j);
  const Eigen::VectorXd again = reloaded->score(fx().data.test);
  CHECK(again == out.test_scores);
}

TEST_CASE("encoders JSON round trip preserves the fingerprint") {
  const harness::Encoders& enc = fx().data.enc;
  model_io::Json j = harness::encoders_to_json(enc);
  j["fingerprint"] = enc.fingerprint;
  const harness::Encoders back = harness::encoders_from_json(j);
  CHECK(back.fingerprint == enc.fingerprint);
  CHECK(back.vocab.page_categories == enc.vocab.page_categories);
  CHECK(back.demo_prep.layout.dim == enc.demo_prep.layout.dim);
}

TEST_CASE("grid selection: recorded matrices pick the published winners") {
  using harness::GridCell;
  const auto table = [](const std::vector<double>& dropouts, const std::vector<double>& cells) {
    // cells row-major: units x (dropout x batch)
    const std::vector<int> units = {32, 64, 128};
    const std::vector<int> batches = {32, 64, 128};
    std::vector<GridCell> out;
    std::size_t k = 0;
    for (int u : units) {
      for (double d : dropouts) {
        for (int b : batches) out.push_back({u, b, d, cells[k++]});
      }
    }
    return out;
  };

  SUBCASE("demography matrix") {
    const std::vector<GridCell> cells = table(
        {0.2, 0.3, 0.4},
        {0.727, 0.728, 0.729, 0.729, 0.731, 0.727, 0.721, 0.720, 0.724,
         0.726, 0.726, 0.727, 0.726, 0.729, 0.721, 0.727, 0.729, 0.729,
         0.725, 0.727, 0.727, 0.721, 0.728, 0.725, 0.720, 0.729, 0.728});
    const GridCell best = harness::pick_best(cells);
    CHECK(best.hidden == 32);
    CHECK(best.batch == 64);
    CHECK(best.dropout == 0.3);
    CHECK(best.val_auc == 0.731);
  }

  SUBCASE("engineered matrix") {
    const std::vector<GridCell> cells = table(
        {0.2, 0.3, 0.4},
        {0.766, 0.770, 0.770, 0.764, 0.764, 0.766, 0.760, 0.762, 0.762,
         0.774, 0.767, 0.766, 0.763, 0.770, 0.771, 0.766, 0.770, 0.773,
         0.774, 0.774, 0.775, 0.768, 0.777, 0.772, 0.768, 0.768, 0.776});
    const GridCell best = harness::pick_best(cells);
    CHECK(best.hidden == 128);
    CHECK(best.batch == 64);
    CHECK(best.dropout == 0.3);
    CHECK(best.val_auc == 0.777);
  }

  SUBCASE("sequential matrix") {
    const std::vector<GridCell> cells = table(
        {0.3, 0.4, 0.5},
        {0.812, 0.810, 0.811, 0.811, 0.810, 0.810, 0.813, 0.811, 0.810,
         0.812, 0.811, 0.811, 0.811, 0.812, 0.814, 0.813, 0.811, 0.813,
         0.810, 0.813, 0.810, 0.811, 0.812, 0.812, 0.811, 0.812, 0.811});
    const GridCell best = harness::pick_best(cells);
    CHECK(best.hidden == 64);
    CHECK(best.batch == 128);
    CHECK(best.dropout == 0.4);
    CHECK(best.val_auc == 0.814);
  }

  SUBCASE("ties prefer fewer units, then smaller batches, then more dropout") {
    const std::vector<GridCell> cells = {
        {64, 64, 0.2, 0.8}, {32, 128, 0.2, 0.8}, {32, 64, 0.2, 0.8}, {32, 64, 0.4, 0.8}};
    const GridCell best = harness::pick_best(cells);
    CHECK(best.hidden == 32);
    CHECK(best.batch == 64);
    CHECK(best.dropout == 0.4);
  }
}

TEST_CASE("grid search: a one-cell grid returns that cell") {
  harness::TrainConfig base = quick_config(harness::ModelKind::EngineeredFfnn);
  base.max_epochs = 2;
  const harness::GridResult r = harness::grid_search(base, {8}, {64}, {0.2}, fx().data);
  REQUIRE(r.cells.size() == 1);
  CHECK(r.best.hidden == 8);
  CHECK(r.best.batch == 64);
  CHECK(r.best.dropout == 0.2);
}

TEST_CASE("temporal shuffle: single-step sequences are unchanged, multisets preserved") {
  std::vector<EncodedSequence> rows = fx().data.test.seq;
  const std::vector<EncodedSequence> before = rows;
  harness::temporal_shuffle(rows, 77);

  REQUIRE(rows.size() == before.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(rows[i].steps.size() == before[i].steps.size());
    CHECK(rows[i].y == before[i].y);
    if (before[i].steps.size() == 1) {
      CHECK(rows[i].steps[0].page == before[i].steps[0].page);
      CHECK(rows[i].steps[0].delta == before[i].steps[0].delta);
    }
    const auto key = [](const SeqStep& s) {
      return std::make_tuple(s.page, s.clicks, s.delta);
    };
    std::multiset<std::tuple<int, std::vector<int>, double>> a, b;
    for (const SeqStep& s : rows[i].steps) a.insert(key(s));
    for (const SeqStep& s : before[i].steps) b.insert(key(s));
    CHECK(a == b);
  }
}

TEST_CASE("shuffle study: engineered side is bitwise unchanged") {
  harness::TrainConfig seq_cfg = quick_config(harness::ModelKind::SequentialLstm);
  seq_cfg.max_epochs = 2;
  harness::TrainConfig eng_cfg = quick_config(harness::ModelKind::EngineeredFfnn);
  eng_cfg.max_epochs = 2;
  const harness::ShuffleOutcome out =
      harness::shuffle_study(seq_cfg, eng_cfg, fx().corpus, fx().data, 99);
  CHECK(out.engineered_input_bitwise_equal);
  CHECK(out.eng_shuffled.test_report.auc == out.eng_base.test_report.auc);
  CHECK(out.eng_shuffled.val_auc == out.eng_base.val_auc);
}

TEST_CASE("resampling: exact class balance") {
  Eigen::VectorXd labels(100);
  labels.setZero();
  for (int i = 0; i < 13; ++i) labels[i] = 1.0;

  SUBCASE("RUS keeps all minority rows and equally many majority rows") {
    const std::vector<int> idx = harness::resample_indices(labels, harness::ResampleMode::RUS, 1);
    CHECK(idx.size() == 26);
    long pos = 0;
    for (int i : idx) pos += labels[i] == 1.0 ? 1 : 0;
    CHECK(pos == 13);
    // subset: no duplicates
    std::set<int> unique(idx.begin(), idx.end());
    CHECK(unique.size() == idx.size());
    for (int i = 0; i < 13; ++i) CHECK(unique.count(i) == 1);
  }

  SUBCASE("ROS keeps every row and duplicates the minority to parity") {
    const std::vector<int> idx = harness::resample_indices(labels, harness::ResampleMode::ROS, 1);
    CHECK(idx.size() == 174);  // 87 + 87
    long pos = 0;
    for (int i : idx) pos += labels[i] == 1.0 ? 1 : 0;
    CHECK(pos == 87);
    std::set<int> unique(idx.begin(), idx.end());
    CHECK(unique.size() == 100);  // superset of the input rows
  }

  Eigen::VectorXd single = Eigen::VectorXd::Ones(5);
  CHECK_THROWS_AS(harness::resample_indices(single, harness::ResampleMode::RUS, 1), DataError);
}

TEST_CASE("select_rows keeps representations aligned") {
  const harness::DataView& v = fx().data.train;
  const std::vector<int> idx = {3, 1, 4, 1};
  const harness::DataView picked = harness::select_rows(v, idx);
  CHECK(picked.size() == 4);
  CHECK(picked.labels[1] == v.labels[1]);
  CHECK(picked.labels[3] == v.labels[1]);
  CHECK(picked.engineered.row(2) == v.engineered.row(4));
  CHECK(picked.meta[0].session_start == v.meta[3].session_start);
}

TEST_CASE("ablation: no groups reproduces the base run exactly") {
  harness::TrainConfig cfg = quick_config(harness::ModelKind::EngineeredFfnn);
  cfg.max_epochs = 2;
  const harness::AblationReport rep = harness::ablate_and_report(cfg, fx().data, {});
  const harness::TrainOutcome direct = harness::train_with_early_stopping(cfg, fx().data);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].test_report.auc == direct.record.test_report.auc);
  CHECK(rep.rows[0].test_report.tp == direct.record.test_report.tp);
}

TEST_CASE("ablation: unknown group is a config error") {
  harness::TrainConfig cfg = quick_config(harness::ModelKind::EngineeredFfnn);
  CHECK_THROWS_AS(harness::drop_group(fx().data, cfg.kind, "nonsense"), ConfigError);
}

TEST_CASE("ablation: dropped groups shrink the encoding as expected") {
  const harness::Prepared& d = fx().data;

  SUBCASE("sequential: page columns removed") {
    const harness::Prepared r = harness::drop_group(d, harness::ModelKind::SequentialLstm, "web-page");
    CHECK(r.train.seq.front().dim() ==
          d.train.seq.front().dim() - d.enc.vocab.page_count());
  }
  SUBCASE("sequential: time column removed") {
    const harness::Prepared r = harness::drop_group(d, harness::ModelKind::SequentialLstm, "time");
    CHECK(r.train.seq.front().dim() == d.train.seq.front().dim() - 1);
  }
  SUBCASE("engineered: click columns removed") {
    const harness::Prepared r = harness::drop_group(d, harness::ModelKind::EngineeredFfnn, "click");
    const int K = d.enc.vocab.click_count();
    CHECK(r.train.engineered.cols() == d.train.engineered.cols() - (2 * K + 1));
  }
  SUBCASE("demography: groups come from the schema") {
    const std::vector<std::string> groups =
        harness::ablation_groups(harness::ModelKind::DemographyFfnn, d);
    CHECK(groups == std::vector<std::string>{"demographic", "time", "place"});
    const harness::Prepared r = harness::drop_group(d, harness::ModelKind::DemographyFfnn, "time");
    CHECK(r.train.demo.cols() == d.train.demo.cols() - 4);  // two cyclic pairs
  }
}

TEST_CASE("breakdown bins partition the test set") {
  const harness::TrainConfig cfg = quick_config(harness::ModelKind::EngineeredFfnn);
  const harness::TrainOutcome out = harness::train_with_early_stopping(cfg, fx().data);

  const std::vector<harness::BreakdownRow> by_len =
      harness::auc_by_length(out.test_scores, fx().data.test);
  long total = 0;
  for (const harness::BreakdownRow& r : by_len) total += r.count;
  CHECK(total == static_cast<long>(fx().data.test.size()));
  CHECK(by_len.size() == 10);
  CHECK(by_len[0].bin == "1-3");
  CHECK(by_len[9].bin == "28-30");

  const std::vector<harness::BreakdownRow> by_os =
      harness::auc_by_os(out.test_scores, fx().data.test);
  total = 0;
  for (const harness::BreakdownRow& r : by_os) total += r.count;
  CHECK(total == static_cast<long>(fx().data.test.size()));
}

TEST_CASE("baselines run off prepared metadata") {
  const metrics::BaselineReports b = harness::baselines_for(fx().data, 11);
  CHECK(b.most_frequent.balanced_accuracy == 0.5);
  CHECK(b.length.auc > 0.4);
  CHECK(b.length_scores.size() == fx().data.test.size());
}

TEST_CASE("null demographics leave the concat model close to click-only") {
  // zeroed demographic columns carry no signal, so concatenation should not
  // move test AUC much on average; needs enough test rows for the AUC noise
  // to sit below the bound
  const Fixture big = build_fixture(3000, 7);
  harness::Prepared nulled = big.data;
  for (int s = 0; s < 3; ++s) nulled.split(s).demo.setZero();

  double delta_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    harness::TrainConfig eng = quick_config(harness::ModelKind::EngineeredFfnn, seed);
    eng.hidden = 16;
    eng.max_epochs = 12;
    eng.patience = 4;
    harness::TrainConfig cat = eng;
    cat.kind = harness::ModelKind::ConcatEngineered;

    const double auc_eng = harness::train_with_early_stopping(eng, nulled).record.test_report.auc;
    const double auc_cat = harness::train_with_early_stopping(cat, nulled).record.test_report.auc;
    delta_sum += auc_cat - auc_eng;
  }
  CHECK(std::abs(delta_sum / 5.0) < 0.02);
}

TEST_CASE("train config JSON round trip") {
  harness::TrainConfig cfg = quick_config(harness::ModelKind::ConcatSequential, 123);
  const model_io::Json j = harness::train_config_to_json(cfg);
  const harness::TrainConfig back = harness::train_config_from_json(j);
  CHECK(back.kind == cfg.kind);
  CHECK(back.hidden == cfg.hidden);
  CHECK(back.batch == cfg.batch);
  CHECK(back.dropout == cfg.dropout);
  CHECK(back.seed == cfg.seed);
}
