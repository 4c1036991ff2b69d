#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intent/batch.hpp"
#include "intent/features.hpp"
#include "intent/metrics.hpp"
#include "intent/model_io.hpp"
#include "intent/sessions.hpp"

namespace intent::harness {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ModelKind {
  EngineeredFfnn,
  SequentialLstm,
  DemographyFfnn,
  ConcatEngineered,
  ConcatSequential,
  RnnReference,
};

const char* kind_name(ModelKind k);
ModelKind kind_from_name(const std::string& name);

struct TrainConfig {
  ModelKind kind = ModelKind::EngineeredFfnn;
  int hidden = 64;  // both hidden layers share this width
  int batch = 64;
  double dropout = 0.3;
  int max_epochs = 100;
  int patience = 5;
  std::uint64_t seed = 1;
};

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Chronological split on session_start: earliest fraction trains, latest
// fraction tests. Ties keep input order.
std::array<std::vector<sessions::Session>, 3> split_out_of_time(
    const std::vector<sessions::Session>& sessions, const SplitSpec& spec);

struct SessionMeta {
  std::string user_id;
  sessions::Timestamp session_start = 0;
  int length = 0;  // encoded pageview count
  std::string os;
};

// One split's encodings, row-aligned across representations.
struct DataView {
  std::vector<EncodedSequence> seq;
  MatrixXd engineered;
  MatrixXd demo;
  VectorXd labels;
  std::vector<SessionMeta> meta;

  std::size_t size() const { return seq.size(); }
};

struct Encoders {
  sessions::Vocab vocab;
  sessions::Scaler delta_scaler;
  features::Layout engineered_layout;
  features::ColumnScaler engineered_scaler;
  features::DemographyPrep demo_prep;
  std::string fingerprint;
};

// Split session lists plus row-aligned demographic records.
struct Corpus {
  std::array<std::vector<sessions::Session>, 3> splits;
  std::array<std::vector<features::DemoRecord>, 3> demo;
};

// Splits chronologically and joins demographic records by
// (user_id, session_start); a session without a record is a data error.
Corpus build_corpus(std::vector<sessions::Session> labeled_sessions,
                    const std::vector<features::DemoRecord>& records, const SplitSpec& spec);

struct Prepared {
  Encoders enc;
  DataView train, val, test;
  double target_rate = 0.0;  // train+val positive prevalence
  int T = 30;

  const DataView& split(int i) const { return i == 0 ? train : i == 1 ? val : test; }
  DataView& split(int i) { return i == 0 ? train : i == 1 ? val : test; }
};

// Fits every encoder on the training split and encodes all three.
Prepared prepare(const Corpus& corpus, const features::DemoSchema& schema, int T = 30,
                 double min_fraction = 0.01);

// Rebuild one split's encodings with already-fitted encoders (split purity
// checks and the shuffle study use this).
DataView encode_split(const std::vector<sessions::Session>& sessions,
                      const std::vector<features::DemoRecord>& records, const Encoders& enc,
                      int T);

// --- trainable models -------------------------------------------------------

class Model {
 public:
  virtual ~Model() = default;
  virtual ModelKind kind() const = 0;
  virtual VectorXd& theta() = 0;
  virtual const VectorXd& theta() const = 0;
  virtual Eigen::Index mask_width() const = 0;  // dropout mask columns
  virtual VectorXd score(const DataView& view) const = 0;
  virtual batch::GradResult gradient(const DataView& view, std::span<const int> idx,
                                     const MatrixXd& drop) const = 0;
  virtual std::unique_ptr<Model> clone() const = 0;
  virtual model_io::Json params_json() const = 0;
};

std::unique_ptr<Model> make_model(ModelKind kind, int hidden, const Prepared& data,
                                  std::uint64_t seed);
std::unique_ptr<Model> model_from_json(const model_io::Json& j);

// --- training ----------------------------------------------------------------

// Stop bookkeeping: strict improvements reset the stale counter; stop after
// `patience` stale epochs. Separated out so the rule is testable alone.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // Returns true when training should stop after this epoch.
  bool observe(double value);
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }
  int epochs_seen() const { return seen_; }

 private:
  int patience_;
  int seen_ = 0;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_value_ = -std::numeric_limits<double>::infinity();
};

struct RunRecord {
  TrainConfig config;
  std::vector<double> train_loss;  // per epoch, mean over examples
  std::vector<double> val_auc;     // per epoch
  int stopped_epoch = 0;
  int best_epoch = 0;
  metrics::EvalReport train_report, val_report, test_report;
  double target_rate = 0.0;
  double wall_seconds = 0.0;  // in-memory only, never serialized
};

struct TrainOutcome {
  RunRecord record;
  std::unique_ptr<Model> model;  // parameters from the best validation epoch
  VectorXd test_scores;
};

// Mini-batch Adam with per-epoch seeded shuffles, validation-AUC early
// stopping, and prior-matched-threshold reports on all three splits.
TrainOutcome train_with_early_stopping(const TrainConfig& config, const Prepared& data);

// Threshold selected on this score set at the prior-matched rate.
metrics::EvalReport report_scores(const VectorXd& scores, const VectorXd& labels,
                                  double target_rate);

// --- grid search -------------------------------------------------------------

struct GridCell {
  int hidden = 0;
  int batch = 0;
  double dropout = 0.0;
  double val_auc = 0.0;
};

// Argmax by validation AUC; ties prefer fewer units, then smaller batches,
// then stronger dropout.
GridCell pick_best(const std::vector<GridCell>& cells);

struct GridResult {
  std::vector<GridCell> cells;
  TrainConfig best;
};

GridResult grid_search(const TrainConfig& base, const std::vector<int>& hidden,
                       const std::vector<int>& batches, const std::vector<double>& dropouts,
                       const Prepared& data);

// --- studies -----------------------------------------------------------------

// Permutes the valid steps of every sequence independently; masks and labels
// unchanged.
void temporal_shuffle(std::vector<EncodedSequence>& rows, std::uint64_t seed);

struct ShuffleOutcome {
  RunRecord seq_base, seq_shuffled;
  RunRecord eng_base, eng_shuffled;
  bool engineered_input_bitwise_equal = false;
  double seq_auc_delta = 0.0;  // shuffled - base, test AUC
};

// Retrains the sequential model on step-shuffled sequences (train, val and
// test all shuffled) and the engineered model on features recomputed from
// window-shuffled sessions. Engineered features are aggregation-order
// independent, so that side must come back bit-identical.
ShuffleOutcome shuffle_study(const TrainConfig& seq_cfg, const TrainConfig& eng_cfg,
                             const Corpus& corpus, const Prepared& base,
                             std::uint64_t shuffle_seed);

enum class ResampleMode { RUS, ROS };

// Row indices of the resampled training set: RUS keeps all minority rows
// plus a uniform subset of the majority; ROS keeps everything and duplicates
// uniform minority draws. Both end exactly 50/50.
std::vector<int> resample_indices(const VectorXd& labels, ResampleMode mode, std::uint64_t seed);

DataView select_rows(const DataView& view, std::span<const int> idx);

struct ResampleOutcome {
  RunRecord base, rus, ros;
};

// The resampled runs keep the prior-matched threshold rule, with the rate
// recomputed from the class distribution the model is trained against: a
// balanced training pool raises the rate, so the threshold admits more test
// positives - recall rises while precision pays, which is the effect the
// study measures.
ResampleOutcome resample_study(const TrainConfig& config, const Prepared& data,
                               std::uint64_t seed);

// --- ablation and breakdowns --------------------------------------------------

// Named column groups for a model kind: sequential and engineered use
// {web-page, click, time}; demography uses the schema's group tags.
std::vector<std::string> ablation_groups(ModelKind kind, const Prepared& data);

// New Prepared with one feature group removed from the relevant encoding.
Prepared drop_group(const Prepared& data, ModelKind kind, const std::string& group);

struct AblationRow {
  std::string group;  // "" for the base run
  metrics::EvalReport test_report;
};

struct BreakdownRow {
  std::string bin;
  long count = 0;
  double auc = 0.0;  // NaN when a bin lacks one of the classes
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<BreakdownRow> by_length;
  std::vector<BreakdownRow> by_os;
};

AblationReport ablate_and_report(const TrainConfig& config, const Prepared& data,
                                 const std::vector<std::string>& groups);

std::vector<BreakdownRow> auc_by_length(const VectorXd& scores, const DataView& view);
std::vector<BreakdownRow> auc_by_os(const VectorXd& scores, const DataView& view);

// --- baselines ----------------------------------------------------------------

metrics::BaselineReports baselines_for(const Prepared& data, std::uint64_t seed);

// --- serialization ------------------------------------------------------------

model_io::Json encoders_to_json(const Encoders& enc);
Encoders encoders_from_json(const model_io::Json& j);
model_io::Json run_record_to_json(const RunRecord& r);
model_io::Json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const model_io::Json& j);

}  // namespace intent::harness
