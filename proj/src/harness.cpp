#include "intent/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "intent/errors.hpp"
#include "intent/rng.hpp"

namespace intent::harness {

const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::EngineeredFfnn: return "engineered-ffnn";
    case ModelKind::SequentialLstm: return "sequential-lstm";
    case ModelKind::DemographyFfnn: return "demography-ffnn";
    case ModelKind::ConcatEngineered: return "concat-engineered";
    case ModelKind::ConcatSequential: return "concat-sequential";
    case ModelKind::RnnReference: return "rnn-reference";
  }
  return "engineered-ffnn";
}

ModelKind kind_from_name(const std::string& name) {
  for (ModelKind k : {ModelKind::EngineeredFfnn, ModelKind::SequentialLstm,
                      ModelKind::DemographyFfnn, ModelKind::ConcatEngineered,
                      ModelKind::ConcatSequential, ModelKind::RnnReference}) {
    if (name == kind_name(k)) return k;
  }
  throw ConfigError("unknown model kind: " + name);
}

std::array<std::vector<sessions::Session>, 3> split_out_of_time(
    const std::vector<sessions::Session>& sessions, const SplitSpec& spec) {
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  if (sessions.size() < 10) throw DataError("need at least 10 sessions to split");

  std::vector<sessions::Session> sorted = sessions;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const sessions::Session& a, const sessions::Session& b) {
                     return a.session_start < b.session_start;
                   });
  const std::size_t n = sorted.size();
  const std::size_t n_train = static_cast<std::size_t>(spec.train * static_cast<double>(n));
  const std::size_t n_val =
      static_cast<std::size_t>((spec.train + spec.val) * static_cast<double>(n)) - n_train;

  std::array<std::vector<sessions::Session>, 3> out;
  out[0].assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n_train));
  out[1].assign(sorted.begin() + static_cast<std::ptrdiff_t>(n_train),
                sorted.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out[2].assign(sorted.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), sorted.end());
  if (out[0].empty() || out[1].empty() || out[2].empty()) {
    throw DataError("a split ended up empty; provide more sessions");
  }
  return out;
}

Corpus build_corpus(std::vector<sessions::Session> labeled_sessions,
                    const std::vector<features::DemoRecord>& records, const SplitSpec& spec) {
  std::map<std::pair<std::string, sessions::Timestamp>, const features::DemoRecord*> index;
  for (const features::DemoRecord& r : records) {
    index[{r.user_id, r.session_start}] = &r;
  }

  Corpus corpus;
  corpus.splits = split_out_of_time(labeled_sessions, spec);
  for (int s = 0; s < 3; ++s) {
    corpus.demo[s].reserve(corpus.splits[s].size());
    for (sessions::Session& sess : corpus.splits[s]) {
      auto it = index.find({sess.user_id, sess.session_start});
      if (it == index.end()) {
        throw DataError("no demographic record for user " + sess.user_id + " session at " +
                        sessions::format_iso8601(sess.session_start));
      }
      const features::DemoRecord& rec = *it->second;
      auto os = rec.values.find("os");
      if (os != rec.values.end()) {
        if (const std::string* v = std::get_if<std::string>(&os->second)) sess.os_tag = *v;
      }
      corpus.demo[s].push_back(rec);
    }
  }
  return corpus;
}

DataView encode_split(const std::vector<sessions::Session>& sess,
                      const std::vector<features::DemoRecord>& records, const Encoders& enc,
                      int T) {
  if (sess.size() != records.size()) throw ShapeError("sessions and records differ in length");
  DataView view;
  const std::size_t n = sess.size();
  view.seq.reserve(n);
  view.labels.resize(static_cast<Eigen::Index>(n));
  view.meta.reserve(n);

  MatrixXd raw_eng(static_cast<Eigen::Index>(n), enc.engineered_layout.dim);
  view.demo.resize(static_cast<Eigen::Index>(n), enc.demo_prep.layout.dim);

  for (std::size_t i = 0; i < n; ++i) {
    const sessions::Session& s = sess[i];
    view.seq.push_back(sessions::encode_sequence(s, enc.vocab, enc.delta_scaler, T));
    raw_eng.row(static_cast<Eigen::Index>(i)) =
        features::engineer_features(s, enc.vocab, T).transpose();
    view.demo.row(static_cast<Eigen::Index>(i)) =
        features::encode_demographics(records[i], enc.demo_prep).transpose();
    view.labels[static_cast<Eigen::Index>(i)] = s.label;
    view.meta.push_back(
        {s.user_id, s.session_start, view.seq.back().n_valid(), s.os_tag});
  }
  view.engineered = enc.engineered_scaler.transform(raw_eng);
  return view;
}

Prepared prepare(const Corpus& corpus, const features::DemoSchema& schema, int T,
                 double min_fraction) {
  Prepared out;
  out.T = T;
  out.enc.vocab = sessions::fit_vocab(corpus.splits[0], min_fraction);
  out.enc.delta_scaler = sessions::fit_delta_scaler(corpus.splits[0]);
  out.enc.engineered_layout = features::engineered_layout(out.enc.vocab);
  out.enc.demo_prep = features::fit_demography_prep(corpus.demo[0], schema);

  // engineered scaler needs the raw training matrix
  {
    MatrixXd raw(static_cast<Eigen::Index>(corpus.splits[0].size()),
                 out.enc.engineered_layout.dim);
    for (std::size_t i = 0; i < corpus.splits[0].size(); ++i) {
      raw.row(static_cast<Eigen::Index>(i)) =
          features::engineer_features(corpus.splits[0][i], out.enc.vocab, T).transpose();
    }
    out.enc.engineered_scaler = features::fit_column_scaler(
        raw, std::vector<bool>(static_cast<std::size_t>(raw.cols()), true));
  }

  for (int s = 0; s < 3; ++s) {
    out.split(s) = encode_split(corpus.splits[s], corpus.demo[s], out.enc, T);
  }

  long pos = 0, count = 0;
  for (int s : {0, 1}) {
    pos += static_cast<long>(out.split(s).labels.sum());
    count += static_cast<long>(out.split(s).size());
  }
  out.target_rate = static_cast<double>(pos) / static_cast<double>(count);
  out.enc.fingerprint = model_io::fingerprint(encoders_to_json(out.enc));
  return out;
}

// ---------------------------------------------------------------------------
// models
// ---------------------------------------------------------------------------

namespace {

metrics::ScoredSet make_scored(const VectorXd& scores, const VectorXd& labels) {
  metrics::ScoredSet s;
  s.scores.assign(scores.data(), scores.data() + scores.size());
  s.labels.reserve(static_cast<std::size_t>(labels.size()));
  for (Eigen::Index i = 0; i < labels.size(); ++i) s.labels.push_back(static_cast<int>(labels[i]));
  return s;
}

enum class FlatSource { Engineered, Demography, ConcatFlat };

class FfnnModel final : public Model {
 public:
  FfnnModel(ModelKind kind, FlatSource src, nn::FfnnParams params)
      : kind_(kind), src_(src), params_(std::move(params)) {}

  ModelKind kind() const override { return kind_; }
  VectorXd& theta() override { return params_.pack.flat(); }
  const VectorXd& theta() const override { return params_.pack.flat(); }
  Eigen::Index mask_width() const override { return params_.dims[1]; }

  VectorXd score(const DataView& view) const override {
    if (src_ == FlatSource::ConcatFlat) {
      return batch::ffnn_scores(params_, concat(view));
    }
    return batch::ffnn_scores(params_, matrix(view));
  }

  batch::GradResult gradient(const DataView& view, std::span<const int> idx,
                             const MatrixXd& drop) const override {
    if (src_ != FlatSource::ConcatFlat) {
      return batch::ffnn_grad(params_, matrix(view), view.labels, idx, drop);
    }
    // gather the concatenated rows for this batch only
    const Eigen::Index b = static_cast<Eigen::Index>(idx.size());
    const Eigen::Index de = view.engineered.cols();
    const Eigen::Index dd = view.demo.cols();
    MatrixXd xb(b, de + dd);
    VectorXd yb(b);
    std::vector<int> iota(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      xb.row(static_cast<Eigen::Index>(i)).head(de) = view.engineered.row(idx[i]);
      xb.row(static_cast<Eigen::Index>(i)).tail(dd) = view.demo.row(idx[i]);
      yb[static_cast<Eigen::Index>(i)] = view.labels[idx[i]];
      iota[i] = static_cast<int>(i);
    }
    return batch::ffnn_grad(params_, xb, yb, iota, drop);
  }

  std::unique_ptr<Model> clone() const override { return std::make_unique<FfnnModel>(*this); }

  model_io::Json params_json() const override {
    model_io::Json j = model_io::ffnn_to_json(params_);
    j["kind"] = kind_name(kind_);
    return j;
  }

 private:
  const MatrixXd& matrix(const DataView& view) const {
    return src_ == FlatSource::Engineered ? view.engineered : view.demo;
  }
  MatrixXd concat(const DataView& view) const {
    MatrixXd x(view.engineered.rows(), view.engineered.cols() + view.demo.cols());
    x << view.engineered, view.demo;
    return x;
  }

  ModelKind kind_;
  FlatSource src_;
  nn::FfnnParams params_;
};

class LstmModel final : public Model {
 public:
  explicit LstmModel(seq::LstmParams params) : params_(std::move(params)) {}

  ModelKind kind() const override { return ModelKind::SequentialLstm; }
  VectorXd& theta() override { return params_.pack.flat(); }
  const VectorXd& theta() const override { return params_.pack.flat(); }
  Eigen::Index mask_width() const override { return params_.hidden; }

  VectorXd score(const DataView& view) const override {
    return batch::lstm_scores(params_, view.seq);
  }
  batch::GradResult gradient(const DataView& view, std::span<const int> idx,
                             const MatrixXd& drop) const override {
    return batch::lstm_grad(params_, view.seq, idx, drop);
  }
  std::unique_ptr<Model> clone() const override { return std::make_unique<LstmModel>(*this); }
  model_io::Json params_json() const override {
    model_io::Json j = model_io::lstm_to_json(params_);
    j["kind"] = kind_name(kind());
    return j;
  }

 private:
  seq::LstmParams params_;
};

class RnnModel final : public Model {
 public:
  explicit RnnModel(seq::RnnParams params) : params_(std::move(params)) {}

  ModelKind kind() const override { return ModelKind::RnnReference; }
  VectorXd& theta() override { return params_.pack.flat(); }
  const VectorXd& theta() const override { return params_.pack.flat(); }
  Eigen::Index mask_width() const override { return params_.hidden; }

  VectorXd score(const DataView& view) const override {
    return batch::rnn_scores(params_, view.seq);
  }
  batch::GradResult gradient(const DataView& view, std::span<const int> idx,
                             const MatrixXd& drop) const override {
    return batch::rnn_grad(params_, view.seq, idx, drop);
  }
  std::unique_ptr<Model> clone() const override { return std::make_unique<RnnModel>(*this); }
  model_io::Json params_json() const override {
    model_io::Json j = model_io::rnn_to_json(params_);
    j["kind"] = kind_name(kind());
    return j;
  }

 private:
  seq::RnnParams params_;
};

class ConcatSeqModel final : public Model {
 public:
  explicit ConcatSeqModel(seq::ConcatSeqParams params) : params_(std::move(params)) {}

  ModelKind kind() const override { return ModelKind::ConcatSequential; }
  VectorXd& theta() override { return params_.pack.flat(); }
  const VectorXd& theta() const override { return params_.pack.flat(); }
  Eigen::Index mask_width() const override { return 2 * params_.hidden; }

  VectorXd score(const DataView& view) const override {
    return batch::concat_seq_scores(params_, view.seq, view.demo);
  }
  batch::GradResult gradient(const DataView& view, std::span<const int> idx,
                             const MatrixXd& drop) const override {
    return batch::concat_seq_grad(params_, view.seq, view.demo, idx, drop);
  }
  std::unique_ptr<Model> clone() const override {
    return std::make_unique<ConcatSeqModel>(*this);
  }
  model_io::Json params_json() const override {
    model_io::Json j = model_io::concat_seq_to_json(params_);
    j["kind"] = kind_name(kind());
    return j;
  }

 private:
  seq::ConcatSeqParams params_;
};

}  // namespace

std::unique_ptr<Model> make_model(ModelKind kind, int hidden, const Prepared& data,
                                  std::uint64_t seed) {
  if (hidden <= 0) throw ConfigError("hidden units must be positive");
  const int de = static_cast<int>(data.train.engineered.cols());
  const int dd = static_cast<int>(data.train.demo.cols());
  const int ds = data.train.seq.empty() ? 0 : data.train.seq.front().dim();

  switch (kind) {
    case ModelKind::EngineeredFfnn:
      return std::make_unique<FfnnModel>(kind, FlatSource::Engineered,
                                         nn::init_ffnn({de, hidden, hidden, 1}, seed));
    case ModelKind::DemographyFfnn:
      return std::make_unique<FfnnModel>(kind, FlatSource::Demography,
                                         nn::init_ffnn({dd, hidden, hidden, 1}, seed));
    case ModelKind::ConcatEngineered:
      return std::make_unique<FfnnModel>(kind, FlatSource::ConcatFlat,
                                         nn::init_ffnn({de + dd, hidden, hidden, 1}, seed));
    case ModelKind::SequentialLstm:
      return std::make_unique<LstmModel>(seq::init_lstm(ds, hidden, seed));
    case ModelKind::RnnReference:
      return std::make_unique<RnnModel>(seq::init_rnn(ds, hidden, seed));
    case ModelKind::ConcatSequential:
      return std::make_unique<ConcatSeqModel>(seq::init_concat_seq(ds, dd, hidden, seed));
  }
  throw ConfigError("unknown model kind");
}

std::unique_ptr<Model> model_from_json(const model_io::Json& j) {
  const ModelKind kind = kind_from_name(j.at("kind").get<std::string>());
  switch (kind) {
    case ModelKind::EngineeredFfnn:
      return std::make_unique<FfnnModel>(kind, FlatSource::Engineered,
                                         model_io::ffnn_from_json(j));
    case ModelKind::DemographyFfnn:
      return std::make_unique<FfnnModel>(kind, FlatSource::Demography,
                                         model_io::ffnn_from_json(j));
    case ModelKind::ConcatEngineered:
      return std::make_unique<FfnnModel>(kind, FlatSource::ConcatFlat,
                                         model_io::ffnn_from_json(j));
    case ModelKind::SequentialLstm:
      return std::make_unique<LstmModel>(model_io::lstm_from_json(j));
    case ModelKind::RnnReference:
      return std::make_unique<RnnModel>(model_io::rnn_from_json(j));
    case ModelKind::ConcatSequential:
      return std::make_unique<ConcatSeqModel>(model_io::concat_seq_from_json(j));
  }
  throw ConfigError("unknown model kind in model file");
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

bool EarlyStopper::observe(double value) {
  seen_ += 1;
  if (value > best_value_) {
    best_value_ = value;
    best_epoch_ = seen_;
    stale_ = 0;
    return false;
  }
  stale_ += 1;
  return stale_ >= patience_;
}

metrics::EvalReport report_scores(const VectorXd& scores, const VectorXd& labels,
                                  double target_rate) {
  const metrics::ScoredSet set = make_scored(scores, labels);
  const double theta = metrics::select_threshold(set, target_rate);
  return metrics::evaluate(set, theta);
}

TrainOutcome train_with_early_stopping(const TrainConfig& cfg, const Prepared& data) {
  if (cfg.batch <= 0 || cfg.max_epochs <= 0 || cfg.patience <= 0) {
    throw ConfigError("batch size, epochs and patience must be positive");
  }
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  const int n = static_cast<int>(data.train.size());
  if (n == 0) throw DataError("empty training split");

  const auto t0 = std::chrono::steady_clock::now();
  std::unique_ptr<Model> model = make_model(cfg.kind, cfg.hidden, data,
                                            derive_seed(cfg.seed, 0x1217));
  VectorXd& theta = model->theta();
  nn::AdamState adam(theta.size());
  EarlyStopper stopper(cfg.patience);
  VectorXd best_theta = theta;

  RunRecord rec;
  rec.config = cfg;
  rec.target_rate = data.target_rate;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5a000000ULL + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    Rng mask_rng(derive_seed(cfg.seed, 0xd0000000ULL + static_cast<std::uint64_t>(epoch)));

    double loss_sum = 0.0;
    int batch_index = 0;
    for (int b0 = 0; b0 < n; b0 += cfg.batch, ++batch_index) {
      const int count = std::min(cfg.batch, n - b0);
      const std::span<const int> idx(order.data() + b0, static_cast<std::size_t>(count));

      MatrixXd drop;
      if (cfg.dropout > 0.0) {
        drop.resize(count, model->mask_width());
        for (int i = 0; i < count; ++i) {
          drop.row(i) =
              nn::draw_dropout_mask(model->mask_width(), cfg.dropout, mask_rng).transpose();
        }
      }

      const batch::GradResult g = model->gradient(data.train, idx, drop);
      if (!g.grad.allFinite() || !std::isfinite(g.mean_loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      nn::adam_step(theta, g.grad, adam);
      loss_sum += g.mean_loss * count;
    }
    rec.train_loss.push_back(loss_sum / n);

    const VectorXd val_scores = model->score(data.val);
    const double auc = metrics::roc_auc(make_scored(val_scores, data.val.labels)).auc;
    rec.val_auc.push_back(auc);

    const bool stop = stopper.observe(auc);
    if (stopper.best_epoch() == epoch) best_theta = theta;
    if (stop) break;
  }

  rec.stopped_epoch = stopper.epochs_seen();
  rec.best_epoch = stopper.best_epoch();
  theta = best_theta;

  TrainOutcome out;
  out.test_scores = model->score(data.test);
  rec.train_report = report_scores(model->score(data.train), data.train.labels, data.target_rate);
  rec.val_report = report_scores(model->score(data.val), data.val.labels, data.target_rate);
  rec.test_report = report_scores(out.test_scores, data.test.labels, data.target_rate);
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  out.record = std::move(rec);
  out.model = std::move(model);
  return out;
}

// ---------------------------------------------------------------------------
// grid search
// ---------------------------------------------------------------------------

GridCell pick_best(const std::vector<GridCell>& cells) {
  if (cells.empty()) throw ConfigError("empty grid");
  GridCell best = cells.front();
  for (const GridCell& c : cells) {
    if (c.val_auc > best.val_auc) {
      best = c;
    } else if (c.val_auc == best.val_auc) {
      const auto key = [](const GridCell& x) {
        return std::make_tuple(x.hidden, x.batch, -x.dropout);
      };
      if (key(c) < key(best)) best = c;
    }
  }
  return best;
}

GridResult grid_search(const TrainConfig& base, const std::vector<int>& hidden,
                       const std::vector<int>& batches, const std::vector<double>& dropouts,
                       const Prepared& data) {
  if (hidden.empty() || batches.empty() || dropouts.empty()) throw ConfigError("empty grid");
  GridResult result;
  std::uint64_t cell_index = 0;
  for (int h : hidden) {
    for (int b : batches) {
      for (double d : dropouts) {
        TrainConfig cfg = base;
        cfg.hidden = h;
        cfg.batch = b;
        cfg.dropout = d;
        cfg.seed = base.seed ^ cell_index;
        try {
          const TrainOutcome run = train_with_early_stopping(cfg, data);
          result.cells.push_back(
              {h, b, d, run.record.val_auc[static_cast<std::size_t>(run.record.best_epoch - 1)]});
        } catch (const std::exception& ex) {
          throw NumericError("grid cell (units " + std::to_string(h) + ", batch " +
                             std::to_string(b) + ", dropout " + std::to_string(d) +
                             ") failed: " + ex.what());
        }
        ++cell_index;
      }
    }
  }
  const GridCell best = pick_best(result.cells);
  result.best = base;
  result.best.hidden = best.hidden;
  result.best.batch = best.batch;
  result.best.dropout = best.dropout;
  return result;
}

// ---------------------------------------------------------------------------
// studies
// ---------------------------------------------------------------------------

void temporal_shuffle(std::vector<EncodedSequence>& rows, std::uint64_t seed) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    rng.shuffle(rows[i].steps);
  }
}

ShuffleOutcome shuffle_study(const TrainConfig& seq_cfg, const TrainConfig& eng_cfg,
                             const Corpus& corpus, const Prepared& base,
                             std::uint64_t shuffle_seed) {
  ShuffleOutcome out;
  out.seq_base = train_with_early_stopping(seq_cfg, base).record;
  out.eng_base = train_with_early_stopping(eng_cfg, base).record;

  // sequential side: permute the prepared step rows of every split
  {
    Prepared shuffled = base;
    for (int s = 0; s < 3; ++s) {
      temporal_shuffle(shuffled.split(s).seq, derive_seed(shuffle_seed, 100 + s));
    }
    out.seq_shuffled = train_with_early_stopping(seq_cfg, shuffled).record;
  }

  // engineered side: recompute features from window-shuffled sessions; the
  // aggregation is order-independent so the matrix must match bit for bit
  {
    Prepared shuffled = base;
    bool equal = true;
    for (int s = 0; s < 3; ++s) {
      const std::vector<sessions::Session>& sess = corpus.splits[s];
      MatrixXd raw(static_cast<Eigen::Index>(sess.size()), base.enc.engineered_layout.dim);
      for (std::size_t i = 0; i < sess.size(); ++i) {
        std::vector<sessions::PageWindow> windows = sessions::pageview_windows(sess[i]);
        if (static_cast<int>(windows.size()) > base.T) {
          windows.resize(static_cast<std::size_t>(base.T));
        }
        Rng rng(derive_seed(shuffle_seed, 200 + s * 1000003 + i));
        rng.shuffle(windows);
        raw.row(static_cast<Eigen::Index>(i)) =
            features::engineer_features(std::move(windows), base.enc.vocab, base.T).transpose();
      }
      const MatrixXd eng = base.enc.engineered_scaler.transform(raw);
      if (!(eng.array() == base.split(s).engineered.array()).all()) equal = false;
      shuffled.split(s).engineered = eng;
    }
    out.engineered_input_bitwise_equal = equal;
    out.eng_shuffled = train_with_early_stopping(eng_cfg, shuffled).record;
  }

  out.seq_auc_delta = out.seq_shuffled.test_report.auc - out.seq_base.test_report.auc;
  return out;
}

std::vector<int> resample_indices(const VectorXd& labels, ResampleMode mode, std::uint64_t seed) {
  std::vector<int> pos, neg;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    (labels[i] == 1.0 ? pos : neg).push_back(static_cast<int>(i));
  }
  if (pos.empty() || neg.empty()) throw DataError("resampling needs both classes present");
  std::vector<int>& minority = pos.size() <= neg.size() ? pos : neg;
  std::vector<int>& majority = pos.size() <= neg.size() ? neg : pos;

  Rng rng(derive_seed(seed, 0x5e5a));
  std::vector<int> out;
  if (mode == ResampleMode::RUS) {
    std::vector<int> pool = majority;
    rng.shuffle(pool);
    pool.resize(minority.size());
    out = minority;
    out.insert(out.end(), pool.begin(), pool.end());
  } else {
    out.reserve(2 * majority.size());
    for (Eigen::Index i = 0; i < labels.size(); ++i) out.push_back(static_cast<int>(i));
    const std::size_t deficit = majority.size() - minority.size();
    for (std::size_t k = 0; k < deficit; ++k) {
      out.push_back(minority[static_cast<std::size_t>(rng.below(minority.size()))]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

DataView select_rows(const DataView& view, std::span<const int> idx) {
  DataView out;
  const Eigen::Index b = static_cast<Eigen::Index>(idx.size());
  out.seq.reserve(idx.size());
  out.meta.reserve(idx.size());
  out.engineered.resize(b, view.engineered.cols());
  out.demo.resize(b, view.demo.cols());
  out.labels.resize(b);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const int r = idx[i];
    out.seq.push_back(view.seq[static_cast<std::size_t>(r)]);
    out.meta.push_back(view.meta[static_cast<std::size_t>(r)]);
    out.engineered.row(static_cast<Eigen::Index>(i)) = view.engineered.row(r);
    out.demo.row(static_cast<Eigen::Index>(i)) = view.demo.row(r);
    out.labels[static_cast<Eigen::Index>(i)] = view.labels[r];
  }
  return out;
}

ResampleOutcome resample_study(const TrainConfig& config, const Prepared& data,
                               std::uint64_t seed) {
  ResampleOutcome out;
  out.base = train_with_early_stopping(config, data).record;
  for (ResampleMode mode : {ResampleMode::RUS, ResampleMode::ROS}) {
    const std::vector<int> idx =
        resample_indices(data.train.labels, mode, derive_seed(seed, mode == ResampleMode::RUS ? 1 : 2));
    Prepared resampled = data;
    resampled.train = select_rows(data.train, idx);
    // the prior-matched rate follows the class distribution the model is
    // trained against, so a balanced training set raises it
    long pos = 0, count = 0;
    for (int s : {0, 1}) {
      pos += static_cast<long>(resampled.split(s).labels.sum());
      count += static_cast<long>(resampled.split(s).size());
    }
    resampled.target_rate = static_cast<double>(pos) / static_cast<double>(count);
    (mode == ResampleMode::RUS ? out.rus : out.ros) =
        train_with_early_stopping(config, resampled).record;
  }
  return out;
}

// ---------------------------------------------------------------------------
// ablation and breakdowns
// ---------------------------------------------------------------------------

std::vector<std::string> ablation_groups(ModelKind kind, const Prepared& data) {
  switch (kind) {
    case ModelKind::SequentialLstm:
    case ModelKind::RnnReference:
    case ModelKind::EngineeredFfnn:
      return {"web-page", "click", "time"};
    case ModelKind::DemographyFfnn:
      return data.enc.demo_prep.layout.groups();
    default:
      throw ConfigError("no ablation groups defined for model kind " +
                        std::string(kind_name(kind)));
  }
}

namespace {

MatrixXd drop_columns(const MatrixXd& X, const std::vector<int>& cols) {
  std::vector<bool> dropped(static_cast<std::size_t>(X.cols()), false);
  for (int c : cols) dropped[static_cast<std::size_t>(c)] = true;
  MatrixXd out(X.rows(), X.cols() - static_cast<Eigen::Index>(cols.size()));
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    if (!dropped[static_cast<std::size_t>(c)]) out.col(k++) = X.col(c);
  }
  return out;
}

features::Layout reduced_layout(const features::Layout& layout, const std::string& group) {
  features::Layout out;
  int col = 0;
  for (const features::LayoutEntry& e : layout.entries) {
    if (e.group == group) continue;
    features::LayoutEntry ne = e;
    ne.begin = col;
    ne.end = col + (e.end - e.begin);
    col = ne.end;
    out.entries.push_back(ne);
  }
  out.dim = col;
  return out;
}

}  // namespace

Prepared drop_group(const Prepared& data, ModelKind kind, const std::string& group) {
  Prepared out = data;
  if (kind == ModelKind::SequentialLstm || kind == ModelKind::RnnReference) {
    if (group != "web-page" && group != "click" && group != "time") {
      throw ConfigError("unknown feature group: " + group);
    }
    for (int s = 0; s < 3; ++s) {
      for (EncodedSequence& row : out.split(s).seq) {
        if (group == "web-page") {
          row.page_dims = 0;
          for (SeqStep& step : row.steps) step.page = -1;
        } else if (group == "click") {
          row.click_dims = 0;
          for (SeqStep& step : row.steps) step.clicks.clear();
        } else {
          row.has_delta = false;
          for (SeqStep& step : row.steps) step.delta = 0.0;
        }
      }
    }
  } else if (kind == ModelKind::EngineeredFfnn) {
    const std::vector<int> cols = data.enc.engineered_layout.columns_of_group(group);
    for (int s = 0; s < 3; ++s) {
      out.split(s).engineered = drop_columns(data.split(s).engineered, cols);
    }
    out.enc.engineered_layout = reduced_layout(data.enc.engineered_layout, group);
  } else if (kind == ModelKind::DemographyFfnn) {
    const std::vector<int> cols = data.enc.demo_prep.layout.columns_of_group(group);
    for (int s = 0; s < 3; ++s) {
      out.split(s).demo = drop_columns(data.split(s).demo, cols);
    }
    out.enc.demo_prep.layout = reduced_layout(data.enc.demo_prep.layout, group);
  } else {
    throw ConfigError("no ablation groups defined for model kind " +
                      std::string(kind_name(kind)));
  }
  return out;
}

std::vector<BreakdownRow> auc_by_length(const VectorXd& scores, const DataView& view) {
  std::vector<BreakdownRow> rows;
  for (int bin = 0; bin < 10; ++bin) {
    const int lo = 3 * bin + 1, hi = 3 * bin + 3;
    metrics::ScoredSet set;
    for (std::size_t i = 0; i < view.size(); ++i) {
      const int len = view.meta[i].length;
      if (len < lo || len > hi) continue;
      set.scores.push_back(scores[static_cast<Eigen::Index>(i)]);
      set.labels.push_back(static_cast<int>(view.labels[static_cast<Eigen::Index>(i)]));
    }
    BreakdownRow row;
    row.bin = std::to_string(lo) + "-" + std::to_string(hi);
    row.count = static_cast<long>(set.size());
    try {
      row.auc = metrics::roc_auc(set).auc;
    } catch (const std::exception&) {
      row.auc = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<BreakdownRow> auc_by_os(const VectorXd& scores, const DataView& view) {
  std::set<std::string> tags;
  for (const SessionMeta& m : view.meta) tags.insert(m.os.empty() ? "unknown" : m.os);

  std::vector<BreakdownRow> rows;
  for (const std::string& tag : tags) {
    metrics::ScoredSet set;
    for (std::size_t i = 0; i < view.size(); ++i) {
      const std::string& os = view.meta[i].os.empty() ? "unknown" : view.meta[i].os;
      if (os != tag) continue;
      set.scores.push_back(scores[static_cast<Eigen::Index>(i)]);
      set.labels.push_back(static_cast<int>(view.labels[static_cast<Eigen::Index>(i)]));
    }
    BreakdownRow row;
    row.bin = tag;
    row.count = static_cast<long>(set.size());
    try {
      row.auc = metrics::roc_auc(set).auc;
    } catch (const std::exception&) {
      row.auc = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

AblationReport ablate_and_report(const TrainConfig& config, const Prepared& data,
                                 const std::vector<std::string>& groups) {
  AblationReport report;
  const TrainOutcome base = train_with_early_stopping(config, data);
  report.rows.push_back({"", base.record.test_report});
  report.by_length = auc_by_length(base.test_scores, data.test);
  report.by_os = auc_by_os(base.test_scores, data.test);

  for (const std::string& group : groups) {
    const Prepared reduced = drop_group(data, config.kind, group);
    const TrainOutcome run = train_with_early_stopping(config, reduced);
    report.rows.push_back({group, run.record.test_report});
  }
  return report;
}

// ---------------------------------------------------------------------------
// baselines
// ---------------------------------------------------------------------------

metrics::BaselineReports baselines_for(const Prepared& data, std::uint64_t seed) {
  metrics::BaselineInputs in;
  in.seed = seed;
  in.target_rate = data.target_rate;
  in.train_labels.reserve(data.train.size());
  in.train_lengths.reserve(data.train.size());
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    in.train_labels.push_back(static_cast<int>(data.train.labels[static_cast<Eigen::Index>(i)]));
    in.train_lengths.push_back(static_cast<double>(data.train.meta[i].length));
  }
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    in.test_labels.push_back(static_cast<int>(data.test.labels[static_cast<Eigen::Index>(i)]));
    in.test_lengths.push_back(static_cast<double>(data.test.meta[i].length));
  }
  return metrics::run_baselines(in);
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

model_io::Json encoders_to_json(const Encoders& enc) {
  model_io::Json j;
  j["schema_version"] = model_io::kSchemaVersion;
  j["vocab"] = model_io::vocab_to_json(enc.vocab);
  j["delta_scaler"] = model_io::scaler_to_json(enc.delta_scaler);
  j["engineered_layout"] = model_io::layout_to_json(enc.engineered_layout);
  j["engineered_scaler"] = model_io::column_scaler_to_json(enc.engineered_scaler);
  j["demo_prep"] = model_io::demo_prep_to_json(enc.demo_prep);
  return j;
}

Encoders encoders_from_json(const model_io::Json& j) {
  Encoders enc;
  enc.vocab = model_io::vocab_from_json(j.at("vocab"));
  enc.delta_scaler = model_io::scaler_from_json(j.at("delta_scaler"));
  enc.engineered_layout = model_io::layout_from_json(j.at("engineered_layout"));
  enc.engineered_scaler = model_io::column_scaler_from_json(j.at("engineered_scaler"));
  enc.demo_prep = model_io::demo_prep_from_json(j.at("demo_prep"));
  model_io::Json canon = j;
  canon.erase("fingerprint");
  enc.fingerprint = model_io::fingerprint(canon);
  return enc;
}

model_io::Json train_config_to_json(const TrainConfig& c) {
  model_io::Json j;
  j["model"] = kind_name(c.kind);
  j["hidden_units"] = c.hidden;
  j["batch_size"] = c.batch;
  j["dropout"] = c.dropout;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from_json(const model_io::Json& j) {
  TrainConfig c;
  c.kind = kind_from_name(j.at("model").get<std::string>());
  c.hidden = j.at("hidden_units").get<int>();
  c.batch = j.at("batch_size").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

model_io::Json run_record_to_json(const RunRecord& r) {
  model_io::Json j;
  j["schema_version"] = model_io::kSchemaVersion;
  j["config"] = train_config_to_json(r.config);
  j["train_loss"] = r.train_loss;
  j["val_auc"] = r.val_auc;
  j["stopped_epoch"] = r.stopped_epoch;
  j["best_epoch"] = r.best_epoch;
  j["target_rate"] = r.target_rate;
  j["train_report"] = model_io::report_to_json(r.train_report);
  j["val_report"] = model_io::report_to_json(r.val_report);
  j["test_report"] = model_io::report_to_json(r.test_report);
  return j;
}

}  // namespace intent::harness
