// clickintent: generate -> prepare -> train -> evaluate -> analyze, one
// subcommand per stage. stdout carries result tables only; everything else
// goes to stderr. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "intent/config.hpp"
#include "intent/errors.hpp"
#include "intent/harness.hpp"
#include "intent/model_io.hpp"
#include "intent/simgen.hpp"

namespace fs = std::filesystem;
using namespace intent;
using model_io::Json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::int64_t seed_override = -1;
};

cfg::KeyValues load_config(const CommonArgs& args, bool required) {
  if (args.config_path.empty()) {
    if (required) throw ConfigError("--config is required for this command");
    return cfg::KeyValues::parse_string("");
  }
  return cfg::KeyValues::parse_file(args.config_path);
}

std::string config_hash(const CommonArgs& args) {
  if (args.config_path.empty()) return model_io::fingerprint_bytes("");
  return model_io::fingerprint_bytes(model_io::read_file(args.config_path));
}

std::uint64_t effective_seed(const cfg::KeyValues& kv, const CommonArgs& args) {
  if (args.seed_override >= 0) return static_cast<std::uint64_t>(args.seed_override);
  return kv.get_u64("seed", 1);
}

void stamp(Json& j, std::uint64_t seed, const std::string& cfg_hash) {
  j["schema_version"] = model_io::kSchemaVersion;
  j["seed"] = seed;
  j["config_hash"] = cfg_hash;
}

gen::GenConfig gen_config_from(const cfg::KeyValues& kv, std::uint64_t seed) {
  gen::GenConfig g;
  g.n_users = static_cast<int>(kv.get_int("gen_users", g.n_users));
  g.sessions_per_user_mean = kv.get_double("gen_sessions_per_user", g.sessions_per_user_mean);
  g.page_categories = static_cast<int>(kv.get_int("gen_pages", g.page_categories));
  g.click_fields = static_cast<int>(kv.get_int("gen_clicks", g.click_fields));
  g.prevalence = kv.get_double("gen_prevalence", g.prevalence);
  g.temporal_signal = kv.get_double("gen_lambda", g.temporal_signal);
  g.seed = seed;
  return g;
}

// Schema matching the generator's demographics output.
const char* kGeneratedSchema =
    "age = numeric demographic\n"
    "gender = categorical demographic\n"
    "income_class = ordinal demographic\n"
    "education_level = ordinal demographic\n"
    "existing_customer = categorical demographic\n"
    "month = cyclic:12 time\n"
    "weekday = cyclic:7 time\n"
    "os = categorical place\n"
    "previous_visits = numeric place\n"
    "distance_to_last_visit = numeric_max place\n";

harness::SplitSpec split_from(const cfg::KeyValues& kv) {
  harness::SplitSpec spec;
  spec.train = kv.get_double("split_train", 0.8);
  spec.val = kv.get_double("split_val", 0.1);
  spec.test = kv.get_double("split_test", 0.1);
  return spec;
}

harness::TrainConfig train_config_from(const cfg::KeyValues& kv, std::uint64_t seed) {
  harness::TrainConfig cfg;
  cfg.kind = harness::kind_from_name(kv.get_str("model"));
  cfg.hidden = static_cast<int>(kv.get_int("hidden_units", 64));
  cfg.batch = static_cast<int>(kv.get_int("batch_size", 64));
  cfg.dropout = kv.get_double("dropout", 0.3);
  cfg.max_epochs = static_cast<int>(kv.get_int("max_epochs", 100));
  cfg.patience = static_cast<int>(kv.get_int("patience", 5));
  cfg.seed = seed;
  return cfg;
}

// Full raw pipeline: parse, sessionize, label, split, join demographics.
harness::Corpus corpus_from_files(const cfg::KeyValues& kv, features::DemoSchema& schema_out) {
  const std::string clicks_path = kv.get_str("clicks");
  const std::string demo_path = kv.get_str("demographics");
  const std::string schema_path = kv.get_str("schema");

  std::ifstream clicks(clicks_path);
  if (!clicks) throw IoError("cannot open " + clicks_path);
  sessions::ParseResult parsed = sessions::parse_click_log(clicks);
  if (!parsed.issues.empty()) {
    std::cerr << parsed.issues.size() << " malformed click-log lines; first at line "
              << parsed.issues.front().line << ": " << parsed.issues.front().message << "\n";
  }

  std::vector<sessions::Session> sess = sessionize(std::move(parsed.events));
  const sessions::PurchaseMatcher matcher =
      sessions::PurchaseMatcher::parse(kv.get_str("purchase_matcher"));
  const sessions::CensorStats stats = sessions::label_and_censor(sess, matcher);
  if (stats.matched_sessions == 0) {
    std::cerr << "warning: purchase matcher matched no events in the corpus\n";
  }
  if (stats.dropped_sessions > 0) {
    std::cerr << stats.dropped_sessions << " sessions dropped (empty after censoring)\n";
  }

  std::ifstream schema_in(schema_path);
  if (!schema_in) throw IoError("cannot open " + schema_path);
  schema_out = features::parse_demo_schema(schema_in);

  std::ifstream demo_in(demo_path);
  if (!demo_in) throw IoError("cannot open " + demo_path);
  const std::vector<features::DemoRecord> records = features::parse_demo_records(demo_in);

  return harness::build_corpus(std::move(sess), records, split_from(kv));
}

const char* kSplitNames[3] = {"train", "val", "test"};

void write_prepared(const harness::Prepared& data, const std::string& out_dir,
                    std::uint64_t seed, const std::string& cfg_hash) {
  Json enc = harness::encoders_to_json(data.enc);
  enc["fingerprint"] = data.enc.fingerprint;
  stamp(enc, seed, cfg_hash);
  model_io::write_file_atomic(out_dir + "/encoders.json", enc.dump());

  const Json vocab_echo = model_io::vocab_to_json(data.enc.vocab);
  const Json delta_echo = model_io::scaler_to_json(data.enc.delta_scaler);
  for (int s = 0; s < 3; ++s) {
    const harness::DataView& view = data.split(s);
    const std::string suffix = std::string(kSplitNames[s]) + ".json";

    Json seq = model_io::sequences_to_json(view.seq, vocab_echo, delta_echo);
    stamp(seq, seed, cfg_hash);
    model_io::write_file_atomic(out_dir + "/sequences_" + suffix, seq.dump());

    Json eng = model_io::flat_dataset_to_json(
        view.engineered, view.labels, data.enc.engineered_layout,
        model_io::column_scaler_to_json(data.enc.engineered_scaler));
    stamp(eng, seed, cfg_hash);
    model_io::write_file_atomic(out_dir + "/engineered_" + suffix, eng.dump());

    Json demo = model_io::flat_dataset_to_json(
        view.demo, view.labels, data.enc.demo_prep.layout,
        model_io::column_scaler_to_json(data.enc.demo_prep.scaler));
    stamp(demo, seed, cfg_hash);
    model_io::write_file_atomic(out_dir + "/demographics_" + suffix, demo.dump());

    Json meta;
    stamp(meta, seed, cfg_hash);
    Json rows = Json::array();
    for (const harness::SessionMeta& m : view.meta) {
      Json r;
      r["user_id"] = m.user_id;
      r["session_start"] = sessions::format_iso8601(m.session_start);
      r["os"] = m.os;
      r["length"] = m.length;
      rows.push_back(std::move(r));
    }
    meta["rows"] = std::move(rows);
    model_io::write_file_atomic(out_dir + "/meta_" + suffix, meta.dump());
  }
}

harness::Prepared load_prepared(const std::string& dir) {
  harness::Prepared data;
  const Json enc = Json::parse(model_io::read_file(dir + "/encoders.json"));
  data.enc = harness::encoders_from_json(enc);

  for (int s = 0; s < 3; ++s) {
    harness::DataView& view = data.split(s);
    const std::string suffix = std::string(kSplitNames[s]) + ".json";

    const Json seq = Json::parse(model_io::read_file(dir + "/sequences_" + suffix));
    view.seq = model_io::sequences_from_json(seq);
    data.T = seq.at("T").get<int>();

    features::Layout layout;
    const Json eng = Json::parse(model_io::read_file(dir + "/engineered_" + suffix));
    model_io::flat_dataset_from_json(eng, view.engineered, view.labels, layout);

    Eigen::VectorXd demo_labels;
    const Json demo = Json::parse(model_io::read_file(dir + "/demographics_" + suffix));
    model_io::flat_dataset_from_json(demo, view.demo, demo_labels, layout);

    const Json meta = Json::parse(model_io::read_file(dir + "/meta_" + suffix));
    for (const auto& r : meta.at("rows")) {
      view.meta.push_back({r.at("user_id").get<std::string>(),
                           sessions::parse_iso8601(r.at("session_start").get<std::string>()),
                           r.at("length").get<int>(), r.at("os").get<std::string>()});
    }
    if (view.meta.size() != view.seq.size() ||
        view.engineered.rows() != static_cast<Eigen::Index>(view.seq.size())) {
      throw DataError("prepared dataset files disagree on row counts in split " +
                      std::string(kSplitNames[s]));
    }
  }

  long pos = 0, count = 0;
  for (int s : {0, 1}) {
    pos += static_cast<long>(data.split(s).labels.sum());
    count += static_cast<long>(data.split(s).size());
  }
  data.target_rate = static_cast<double>(pos) / static_cast<double>(count);
  return data;
}

std::string report_row_table(const std::vector<std::pair<std::string, metrics::EvalReport>>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& [name, r] : rows) {
    cells.push_back({name, cfg::format_double(r.balanced_accuracy),
                     cfg::format_double(r.precision), cfg::format_double(r.recall),
                     cfg::format_double(r.auc), cfg::format_double(r.predicted_positive_rate)});
  }
  return cfg::render_table({"model", "bal.acc", "precision", "recall", "auc", "pos.rate"}, cells);
}

metrics::EvalReport report_from_json(const Json& j) {
  metrics::EvalReport r;
  r.tp = j.at("tp").get<long>();
  r.fp = j.at("fp").get<long>();
  r.tn = j.at("tn").get<long>();
  r.fn = j.at("fn").get<long>();
  r.n_pos = j.at("n_pos").get<long>();
  r.n_neg = j.at("n_neg").get<long>();
  r.threshold = j.at("threshold").get<double>();
  r.balanced_accuracy = j.at("balanced_accuracy").get<double>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.auc = j.at("auc").get<double>();
  r.predicted_positive_rate = j.at("predicted_positive_rate").get<double>();
  return r;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_generate(const CommonArgs& args) {
  const cfg::KeyValues kv = load_config(args, false);
  const std::uint64_t seed = effective_seed(kv, args);
  const gen::GenConfig gcfg = gen_config_from(kv, seed);
  const gen::Generated out = gen::generate(gcfg);

  model_io::write_file_atomic(args.out_dir + "/clicks.jsonl", out.clicks_jsonl);
  model_io::write_file_atomic(args.out_dir + "/demographics.jsonl", out.demographics_jsonl);
  model_io::write_file_atomic(args.out_dir + "/labels.jsonl", out.labels_jsonl);
  model_io::write_file_atomic(args.out_dir + "/demo_schema.cfg", kGeneratedSchema);

  Json meta;
  stamp(meta, seed, config_hash(args));
  meta["n_sessions"] = out.n_sessions;
  meta["n_positive"] = out.n_positive;
  meta["prevalence"] =
      static_cast<double>(out.n_positive) / static_cast<double>(out.n_sessions);
  model_io::write_file_atomic(args.out_dir + "/gen_meta.json", meta.dump());

  std::cout << cfg::render_table(
      {"sessions", "positive", "prevalence"},
      {{std::to_string(out.n_sessions), std::to_string(out.n_positive),
        cfg::format_double(meta["prevalence"].get<double>())}});
  return 0;
}

int cmd_prepare(const CommonArgs& args) {
  const cfg::KeyValues kv = load_config(args, true);
  const std::uint64_t seed = effective_seed(kv, args);
  features::DemoSchema schema;
  const harness::Corpus corpus = corpus_from_files(kv, schema);
  const harness::Prepared data =
      harness::prepare(corpus, schema, static_cast<int>(kv.get_int("T", 30)),
                       kv.get_double("min_fraction", 0.01));
  write_prepared(data, args.out_dir, seed, config_hash(args));

  std::vector<std::vector<std::string>> rows;
  for (int s = 0; s < 3; ++s) {
    const harness::DataView& v = data.split(s);
    rows.push_back({kSplitNames[s], std::to_string(v.size()),
                    cfg::format_double(v.labels.mean()),
                    std::to_string(v.seq.empty() ? 0 : v.seq.front().dim()),
                    std::to_string(v.engineered.cols()), std::to_string(v.demo.cols())});
  }
  std::cout << cfg::render_table({"split", "rows", "prevalence", "seq dim", "eng dim", "demo dim"},
                                 rows);
  std::cerr << "target positive rate (train+val prevalence): " << data.target_rate << "\n"
            << "encoder fingerprint: " << data.enc.fingerprint << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const cfg::KeyValues kv = load_config(args, true);
  const std::uint64_t seed = effective_seed(kv, args);
  const harness::Prepared data = load_prepared(kv.get_str("data_dir"));
  const harness::TrainConfig cfg = train_config_from(kv, seed);

  const harness::TrainOutcome out = harness::train_with_early_stopping(cfg, data);
  std::cerr << "stopped after epoch " << out.record.stopped_epoch << ", best epoch "
            << out.record.best_epoch << " (val auc "
            << out.record.val_auc[static_cast<std::size_t>(out.record.best_epoch - 1)] << "), "
            << out.record.wall_seconds << " s\n";

  Json model = out.model->params_json();
  stamp(model, seed, config_hash(args));
  model["train_config"] = harness::train_config_to_json(cfg);
  model["encoder_fingerprint"] = data.enc.fingerprint;
  model_io::write_file_atomic(args.out_dir + "/model.json", model.dump());

  Json record = harness::run_record_to_json(out.record);
  stamp(record, seed, config_hash(args));
  record["encoder_fingerprint"] = data.enc.fingerprint;
  model_io::write_file_atomic(args.out_dir + "/runrecord.json", record.dump());

  std::cout << report_row_table({{std::string(harness::kind_name(cfg.kind)) + " (train)",
                                  out.record.train_report},
                                 {std::string(harness::kind_name(cfg.kind)) + " (val)",
                                  out.record.val_report},
                                 {std::string(harness::kind_name(cfg.kind)) + " (test)",
                                  out.record.test_report}});
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& model_path) {
  const cfg::KeyValues kv = load_config(args, true);
  const harness::Prepared data = load_prepared(kv.get_str("data_dir"));
  const std::string path = model_path.empty() ? kv.get_str("model_path") : model_path;
  const Json mj = Json::parse(model_io::read_file(path));

  const std::string fp = mj.at("encoder_fingerprint").get<std::string>();
  if (fp != data.enc.fingerprint) {
    throw DataError("encoder fingerprint mismatch: model built with " + fp +
                    ", data directory has " + data.enc.fingerprint);
  }
  const std::unique_ptr<harness::Model> model = harness::model_from_json(mj);

  const Eigen::VectorXd scores = model->score(data.test);
  const metrics::EvalReport report =
      harness::report_scores(scores, data.test.labels, data.target_rate);

  Json rj = model_io::report_to_json(report, true);
  stamp(rj, mj.at("seed").get<std::uint64_t>(), config_hash(args));
  model_io::write_file_atomic(args.out_dir + "/evalreport.json", rj.dump());
  model_io::write_file_atomic(args.out_dir + "/roc.csv", metrics::roc_csv(report.roc));

  std::cout << report_row_table({{harness::kind_name(model->kind()), report}});
  return 0;
}

int cmd_gridsearch(const CommonArgs& args) {
  const cfg::KeyValues kv = load_config(args, true);
  const std::uint64_t seed = effective_seed(kv, args);
  const harness::Prepared data = load_prepared(kv.get_str("data_dir"));
  harness::TrainConfig base = train_config_from(kv, seed);

  std::vector<int> hidden, batches;
  for (long v : kv.get_int_list("grid_hidden")) hidden.push_back(static_cast<int>(v));
  for (long v : kv.get_int_list("grid_batch")) batches.push_back(static_cast<int>(v));
  const std::vector<double> dropouts = kv.get_double_list("grid_dropout");

  const harness::GridResult result = harness::grid_search(base, hidden, batches, dropouts, data);

  Json j;
  stamp(j, seed, config_hash(args));
  Json cells = Json::array();
  for (const harness::GridCell& c : result.cells) {
    Json cj;
    cj["hidden_units"] = c.hidden;
    cj["batch_size"] = c.batch;
    cj["dropout"] = c.dropout;
    cj["val_auc"] = c.val_auc;
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  j["best"] = harness::train_config_to_json(result.best);
  model_io::write_file_atomic(args.out_dir + "/grid.json", j.dump());

  std::vector<std::vector<std::string>> rows;
  for (const harness::GridCell& c : result.cells) {
    rows.push_back({std::to_string(c.hidden), std::to_string(c.batch),
                    cfg::format_double(c.dropout, 1), cfg::format_double(c.val_auc)});
  }
  std::cout << cfg::render_table({"units", "batch", "dropout", "val auc"}, rows);
  std::cerr << "best cell: units " << result.best.hidden << ", batch " << result.best.batch
            << ", dropout " << result.best.dropout << "\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  const cfg::KeyValues kv = load_config(args, true);
  const std::uint64_t seed = effective_seed(kv, args);
  const harness::Prepared data = load_prepared(kv.get_str("data_dir"));
  const harness::TrainConfig cfg = train_config_from(kv, seed);

  std::vector<std::string> groups;
  if (kv.has("ablate_groups")) {
    std::istringstream is(kv.get_str("ablate_groups"));
    std::string token;
    while (std::getline(is, token, ',')) {
      if (!token.empty()) groups.push_back(token);
    }
  } else {
    groups = harness::ablation_groups(cfg.kind, data);
  }

  const harness::AblationReport report = harness::ablate_and_report(cfg, data, groups);

  Json j;
  stamp(j, seed, config_hash(args));
  Json rows = Json::array();
  const double base_auc = report.rows.front().test_report.auc;
  for (const harness::AblationRow& r : report.rows) {
    Json rj;
    rj["group"] = r.group.empty() ? "all features" : "no " + r.group;
    rj["report"] = model_io::report_to_json(r.test_report);
    rj["relative_auc_change"] =
        r.group.empty() ? 0.0 : (r.test_report.auc - base_auc) / base_auc;
    rows.push_back(std::move(rj));
  }
  j["rows"] = std::move(rows);
  const auto breakdown_json = [](const std::vector<harness::BreakdownRow>& rows_in) {
    Json arr = Json::array();
    for (const harness::BreakdownRow& b : rows_in) {
      Json bj;
      bj["bin"] = b.bin;
      bj["count"] = b.count;
      if (std::isnan(b.auc)) {
        bj["auc"] = nullptr;
      } else {
        bj["auc"] = b.auc;
      }
      arr.push_back(std::move(bj));
    }
    return arr;
  };
  j["auc_by_length"] = breakdown_json(report.by_length);
  j["auc_by_os"] = breakdown_json(report.by_os);
  model_io::write_file_atomic(args.out_dir + "/ablation.json", j.dump());

  std::vector<std::pair<std::string, metrics::EvalReport>> table;
  for (const harness::AblationRow& r : report.rows) {
    table.push_back({r.group.empty() ? "all features" : "no " + r.group, r.test_report});
  }
  std::cout << report_row_table(table);
  std::vector<std::vector<std::string>> lb;
  for (const harness::BreakdownRow& b : report.by_length) {
    lb.push_back({b.bin, std::to_string(b.count), cfg::format_double(b.auc)});
  }
  std::cout << "\n" << cfg::render_table({"session length", "n", "auc"}, lb);
  std::vector<std::vector<std::string>> ob;
  for (const harness::BreakdownRow& b : report.by_os) {
    ob.push_back({b.bin, std::to_string(b.count), cfg::format_double(b.auc)});
  }
  std::cout << "\n" << cfg::render_table({"os", "n", "auc"}, ob);
  return 0;
}

int cmd_shuffle_test(const CommonArgs& args) {
  const cfg::KeyValues kv = load_config(args, true);
  const std::uint64_t seed = effective_seed(kv, args);
  features::DemoSchema schema;
  const harness::Corpus corpus = corpus_from_files(kv, schema);
  const harness::Prepared data =
      harness::prepare(corpus, schema, static_cast<int>(kv.get_int("T", 30)),
                       kv.get_double("min_fraction", 0.01));

  harness::TrainConfig seq_cfg;
  seq_cfg.kind = harness::ModelKind::SequentialLstm;
  seq_cfg.hidden = static_cast<int>(kv.get_int("hidden_units", 64));
  seq_cfg.batch = static_cast<int>(kv.get_int("batch_size", 128));
  seq_cfg.dropout = kv.get_double("dropout", 0.4);
  seq_cfg.max_epochs = static_cast<int>(kv.get_int("max_epochs", 100));
  seq_cfg.patience = static_cast<int>(kv.get_int("patience", 5));
  seq_cfg.seed = seed;
  harness::TrainConfig eng_cfg = seq_cfg;
  eng_cfg.kind = harness::ModelKind::EngineeredFfnn;
  eng_cfg.hidden = static_cast<int>(kv.get_int("eng_hidden_units", 128));
  eng_cfg.batch = static_cast<int>(kv.get_int("eng_batch_size", 64));
  eng_cfg.dropout = kv.get_double("eng_dropout", 0.3);

  const harness::ShuffleOutcome out =
      harness::shuffle_study(seq_cfg, eng_cfg, corpus, data, derive_seed(seed, 0x51f));

  Json j;
  stamp(j, seed, config_hash(args));
  j["sequential_base"] = harness::run_record_to_json(out.seq_base);
  j["sequential_shuffled"] = harness::run_record_to_json(out.seq_shuffled);
  j["engineered_base"] = harness::run_record_to_json(out.eng_base);
  j["engineered_shuffled"] = harness::run_record_to_json(out.eng_shuffled);
  j["engineered_input_bitwise_equal"] = out.engineered_input_bitwise_equal;
  j["sequential_auc_delta"] = out.seq_auc_delta;
  model_io::write_file_atomic(args.out_dir + "/shuffle.json", j.dump());

  std::cout << report_row_table({{"sequential (original)", out.seq_base.test_report},
                                 {"sequential (shuffled)", out.seq_shuffled.test_report},
                                 {"engineered (original)", out.eng_base.test_report},
                                 {"engineered (shuffled)", out.eng_shuffled.test_report}});
  std::cerr << "sequential test-AUC change after shuffle: " << out.seq_auc_delta << "\n"
            << "engineered inputs bitwise unchanged: "
            << (out.engineered_input_bitwise_equal ? "yes" : "no") << "\n";
  return 0;
}

int cmd_resample_test(const CommonArgs& args) {
  const cfg::KeyValues kv = load_config(args, true);
  const std::uint64_t seed = effective_seed(kv, args);
  const harness::Prepared data = load_prepared(kv.get_str("data_dir"));
  const harness::TrainConfig cfg = train_config_from(kv, seed);

  const harness::ResampleOutcome out = harness::resample_study(cfg, data, seed);

  Json j;
  stamp(j, seed, config_hash(args));
  j["imbalanced"] = harness::run_record_to_json(out.base);
  j["rus"] = harness::run_record_to_json(out.rus);
  j["ros"] = harness::run_record_to_json(out.ros);
  model_io::write_file_atomic(args.out_dir + "/resample.json", j.dump());

  std::cout << report_row_table({{"imbalanced", out.base.test_report},
                                 {"rus", out.rus.test_report},
                                 {"ros", out.ros.test_report}});
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw ConfigError("report needs at least one JSON artifact");
  for (const std::string& path : inputs) {
    const Json j = Json::parse(model_io::read_file(path));
    std::cout << path << "\n";
    if (j.contains("rows") && j.contains("auc_by_length")) {  // ablation
      std::vector<std::pair<std::string, metrics::EvalReport>> table;
      for (const auto& r : j.at("rows")) {
        table.push_back({r.at("group").get<std::string>(), report_from_json(r.at("report"))});
      }
      std::cout << report_row_table(table);
    } else if (j.contains("test_report")) {  // run record
      std::cout << report_row_table({{"train", report_from_json(j.at("train_report"))},
                                     {"val", report_from_json(j.at("val_report"))},
                                     {"test", report_from_json(j.at("test_report"))}});
    } else if (j.contains("sequential_base")) {  // shuffle study
      std::cout << report_row_table(
          {{"sequential (original)", report_from_json(j.at("sequential_base").at("test_report"))},
           {"sequential (shuffled)",
            report_from_json(j.at("sequential_shuffled").at("test_report"))},
           {"engineered (original)", report_from_json(j.at("engineered_base").at("test_report"))},
           {"engineered (shuffled)",
            report_from_json(j.at("engineered_shuffled").at("test_report"))}});
    } else if (j.contains("imbalanced")) {  // resample study
      std::cout << report_row_table(
          {{"imbalanced", report_from_json(j.at("imbalanced").at("test_report"))},
           {"rus", report_from_json(j.at("rus").at("test_report"))},
           {"ros", report_from_json(j.at("ros").at("test_report"))}});
    } else if (j.contains("cells")) {  // grid
      std::vector<std::vector<std::string>> rows;
      for (const auto& c : j.at("cells")) {
        rows.push_back({std::to_string(c.at("hidden_units").get<int>()),
                        std::to_string(c.at("batch_size").get<int>()),
                        cfg::format_double(c.at("dropout").get<double>(), 1),
                        cfg::format_double(c.at("val_auc").get<double>())});
      }
      std::cout << cfg::render_table({"units", "batch", "dropout", "val auc"}, rows);
    } else if (j.contains("balanced_accuracy")) {  // bare eval report
      std::cout << report_row_table({{"model", report_from_json(j)}});
    } else {
      throw DataError("unrecognized artifact: " + path);
    }
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"purchase-intent modelling pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string model_path;
  std::vector<std::string> report_inputs;

  const auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", args.config_path, "key = value config file");
    if (needs_config) opt->required();
    sub->add_option("--seed", args.seed_override, "override the config seed");
    sub->add_option("--out", args.out_dir, "output directory");
  };

  add_common(app.add_subcommand("generate", "emit a synthetic click corpus"), false);
  add_common(app.add_subcommand("prepare", "sessionize, fit encoders, encode splits"), true);
  add_common(app.add_subcommand("train", "train one model with early stopping"), true);
  auto* eval = app.add_subcommand("evaluate", "score a saved model on the test split");
  add_common(eval, true);
  eval->add_option("--model", model_path, "model.json path (else config model_path)");
  add_common(app.add_subcommand("gridsearch", "train every grid cell, pick the best"), true);
  add_common(app.add_subcommand("ablate", "retrain with feature groups removed"), true);
  add_common(app.add_subcommand("shuffle-test", "temporal-order shuffle study"), true);
  add_common(app.add_subcommand("resample-test", "RUS/ROS class-balance study"), true);
  auto* rep = app.add_subcommand("report", "render JSON artifacts as tables");
  rep->add_option("inputs", report_inputs, "artifact JSON files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand("generate")) return cmd_generate(args);
    if (app.got_subcommand("prepare")) return cmd_prepare(args);
    if (app.got_subcommand("train")) return cmd_train(args);
    if (app.got_subcommand("evaluate")) return cmd_evaluate(args, model_path);
    if (app.got_subcommand("gridsearch")) return cmd_gridsearch(args);
    if (app.got_subcommand("ablate")) return cmd_ablate(args);
    if (app.got_subcommand("shuffle-test")) return cmd_shuffle_test(args);
    if (app.got_subcommand("resample-test")) return cmd_resample_test(args);
    if (app.got_subcommand("report")) return cmd_report(report_inputs);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const StateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
