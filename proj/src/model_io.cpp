#include "intent/model_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "intent/errors.hpp"

namespace intent::model_io {

namespace {

std::vector<double> row_major(const nn::ParamPack& pack, int block) {
  auto m = pack.mat(block);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from(const Json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

Json pack_to_json(const nn::ParamPack& pack) {
  Json j = Json::object();
  for (int b = 0; b < pack.block_count(); ++b) {
    j[pack.blocks()[static_cast<std::size_t>(b)].name] = row_major(pack, b);
  }
  return j;
}

void pack_from_json(const Json& j, nn::ParamPack& pack) {
  for (int b = 0; b < pack.block_count(); ++b) {
    const auto& spec = pack.blocks()[static_cast<std::size_t>(b)];
    if (!j.contains(spec.name)) throw DataError("model is missing parameter block " + spec.name);
    const Json& arr = j[spec.name];
    if (static_cast<Eigen::Index>(arr.size()) != spec.rows * spec.cols) {
      throw ShapeError("parameter block " + spec.name + " has wrong size");
    }
    auto m = pack.mat(b);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < spec.rows; ++r) {
      for (Eigen::Index c = 0; c < spec.cols; ++c) m(r, c) = arr[k++].get<double>();
    }
  }
}

Json ffnn_to_json(const nn::FfnnParams& p) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["cell"] = "ffnn";
  j["dims"] = p.dims;
  Json acts = Json::array();
  for (nn::Act a : p.acts) acts.push_back(nn::act_name(a));
  j["activations"] = acts;
  j["params"] = pack_to_json(p.pack);
  return j;
}

nn::FfnnParams ffnn_from_json(const Json& j) {
  const std::vector<int> dims = j.at("dims").get<std::vector<int>>();
  std::vector<nn::Act> acts;
  for (const auto& a : j.at("activations")) acts.push_back(nn::act_from_name(a.get<std::string>()));
  nn::FfnnParams p = nn::init_ffnn(dims, acts, 0);
  pack_from_json(j.at("params"), p.pack);
  return p;
}

Json rnn_to_json(const seq::RnnParams& p) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["cell"] = "rnn";
  j["input_dim"] = p.input_dim;
  j["hidden"] = p.hidden;
  j["params"] = pack_to_json(p.pack);
  return j;
}

seq::RnnParams rnn_from_json(const Json& j) {
  seq::RnnParams p = seq::init_rnn(j.at("input_dim").get<int>(), j.at("hidden").get<int>(), 0);
  pack_from_json(j.at("params"), p.pack);
  return p;
}

Json lstm_to_json(const seq::LstmParams& p) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["cell"] = "lstm";
  j["input_dim"] = p.input_dim;
  j["hidden"] = p.hidden;
  j["params"] = pack_to_json(p.pack);
  return j;
}

seq::LstmParams lstm_from_json(const Json& j) {
  seq::LstmParams p = seq::init_lstm(j.at("input_dim").get<int>(), j.at("hidden").get<int>(), 0);
  pack_from_json(j.at("params"), p.pack);
  return p;
}

Json concat_seq_to_json(const seq::ConcatSeqParams& p) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["cell"] = "concat-lstm";
  j["input_dim"] = p.input_dim;
  j["demo_dim"] = p.demo_dim;
  j["hidden"] = p.hidden;
  j["params"] = pack_to_json(p.pack);
  return j;
}

seq::ConcatSeqParams concat_seq_from_json(const Json& j) {
  seq::ConcatSeqParams p = seq::init_concat_seq(
      j.at("input_dim").get<int>(), j.at("demo_dim").get<int>(), j.at("hidden").get<int>(), 0);
  pack_from_json(j.at("params"), p.pack);
  return p;
}

Json vocab_to_json(const sessions::Vocab& v) {
  Json j;
  j["page_categories"] = v.page_categories;
  Json pm = Json::object();
  // std::unordered_map iteration order is not stable; emit sorted
  std::vector<std::pair<std::string, int>> pairs(v.page_map.begin(), v.page_map.end());
  std::sort(pairs.begin(), pairs.end());
  for (const auto& [url, cat] : pairs) pm[url] = cat;
  j["page_map"] = pm;
  j["click_categories"] = v.click_categories;
  Json cm = Json::object();
  pairs.assign(v.click_map.begin(), v.click_map.end());
  std::sort(pairs.begin(), pairs.end());
  for (const auto& [click, cat] : pairs) cm[click] = cat;
  j["click_map"] = cm;
  j["min_fraction"] = v.min_fraction;
  j["click_pages"] = v.click_pages;
  return j;
}

sessions::Vocab vocab_from_json(const Json& j) {
  sessions::Vocab v;
  v.page_categories = j.at("page_categories").get<std::vector<std::string>>();
  for (const auto& [url, cat] : j.at("page_map").items()) v.page_map[url] = cat.get<int>();
  v.click_categories = j.at("click_categories").get<std::vector<std::string>>();
  for (const auto& [click, cat] : j.at("click_map").items()) v.click_map[click] = cat.get<int>();
  v.min_fraction = j.at("min_fraction").get<double>();
  v.click_pages = j.at("click_pages").get<std::vector<std::vector<int>>>();
  return v;
}

Json scaler_to_json(const sessions::Scaler& s) {
  Json j;
  j["mean"] = s.mean;
  j["sd"] = s.sd;
  j["degenerate"] = s.degenerate;
  return j;
}

sessions::Scaler scaler_from_json(const Json& j) {
  sessions::Scaler s;
  s.mean = j.at("mean").get<double>();
  s.sd = j.at("sd").get<double>();
  s.degenerate = j.at("degenerate").get<bool>();
  s.fitted = true;
  return s;
}

Json column_scaler_to_json(const features::ColumnScaler& s) {
  Json j;
  j["mean"] = vector_json(s.mean);
  j["sd"] = vector_json(s.sd);
  j["scale_col"] = s.scale_col;
  return j;
}

features::ColumnScaler column_scaler_from_json(const Json& j) {
  features::ColumnScaler s;
  s.mean = vector_from(j.at("mean"));
  s.sd = vector_from(j.at("sd"));
  s.scale_col = j.at("scale_col").get<std::vector<bool>>();
  s.fitted = true;
  return s;
}

Json layout_to_json(const features::Layout& l) {
  Json entries = Json::array();
  for (const auto& e : l.entries) {
    Json je;
    je["name"] = e.name;
    je["group"] = e.group;
    je["begin"] = e.begin;
    je["end"] = e.end;
    entries.push_back(je);
  }
  Json j;
  j["dim"] = l.dim;
  j["entries"] = entries;
  return j;
}

features::Layout layout_from_json(const Json& j) {
  features::Layout l;
  l.dim = j.at("dim").get<int>();
  for (const auto& je : j.at("entries")) {
    l.entries.push_back({je.at("name").get<std::string>(), je.at("group").get<std::string>(),
                         je.at("begin").get<int>(), je.at("end").get<int>()});
  }
  return l;
}

namespace {

const char* kind_name(features::FeatKind k) {
  switch (k) {
    case features::FeatKind::Numeric: return "numeric";
    case features::FeatKind::NumericMaxImpute: return "numeric_max";
    case features::FeatKind::Ordinal: return "ordinal";
    case features::FeatKind::Categorical: return "categorical";
    case features::FeatKind::Cyclic: return "cyclic";
  }
  return "numeric";
}

features::FeatKind kind_from(const std::string& s) {
  if (s == "numeric") return features::FeatKind::Numeric;
  if (s == "numeric_max") return features::FeatKind::NumericMaxImpute;
  if (s == "ordinal") return features::FeatKind::Ordinal;
  if (s == "categorical") return features::FeatKind::Categorical;
  if (s == "cyclic") return features::FeatKind::Cyclic;
  throw DataError("unknown feature kind: " + s);
}

}  // namespace

Json demo_prep_to_json(const features::DemographyPrep& p) {
  Json schema = Json::array();
  for (const auto& spec : p.schema) {
    Json js;
    js["name"] = spec.name;
    js["kind"] = kind_name(spec.kind);
    js["period"] = spec.period;
    js["group"] = spec.group;
    schema.push_back(js);
  }
  Json j;
  j["schema"] = schema;
  j["numeric_impute"] = p.numeric_impute;
  j["categorical_impute"] = p.categorical_impute;
  j["levels"] = p.levels;
  j["layout"] = layout_to_json(p.layout);
  j["scaler"] = column_scaler_to_json(p.scaler);
  return j;
}

features::DemographyPrep demo_prep_from_json(const Json& j) {
  features::DemographyPrep p;
  for (const auto& js : j.at("schema")) {
    p.schema.push_back({js.at("name").get<std::string>(), kind_from(js.at("kind").get<std::string>()),
                        js.at("period").get<int>(), js.at("group").get<std::string>()});
  }
  p.numeric_impute = j.at("numeric_impute").get<std::map<std::string, double>>();
  p.categorical_impute = j.at("categorical_impute").get<std::map<std::string, std::string>>();
  p.levels = j.at("levels").get<std::map<std::string, std::vector<std::string>>>();
  p.layout = layout_from_json(j.at("layout"));
  p.scaler = column_scaler_from_json(j.at("scaler"));
  p.fitted = true;
  return p;
}

Json report_to_json(const metrics::EvalReport& r, bool include_roc) {
  Json j;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["tn"] = r.tn;
  j["fn"] = r.fn;
  j["n_pos"] = r.n_pos;
  j["n_neg"] = r.n_neg;
  j["threshold"] = r.threshold;
  j["balanced_accuracy"] = r.balanced_accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["auc"] = r.auc;
  j["predicted_positive_rate"] = r.predicted_positive_rate;
  if (include_roc) {
    Json roc = Json::array();
    for (const auto& p : r.roc) {
      roc.push_back(Json::array({p.threshold, p.fpr, p.tpr}));
    }
    j["roc"] = roc;
  }
  return j;
}

std::string fingerprint_bytes(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fingerprint(const Json& j) { return fingerprint_bytes(j.dump()); }

Json sequences_to_json(const std::vector<EncodedSequence>& rows, const Json& vocab_echo,
                       const Json& scaler_echo) {
  if (rows.empty()) throw DataError("refusing to serialize an empty dataset");
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["T"] = rows.front().T;
  j["D"] = rows.front().dim();
  j["page_dims"] = rows.front().page_dims;
  j["click_dims"] = rows.front().click_dims;
  j["has_delta"] = rows.front().has_delta;
  j["vocab"] = vocab_echo;
  j["scaler"] = scaler_echo;
  Json out_rows = Json::array();
  for (const EncodedSequence& s : rows) {
    Json row;
    Json mask = Json::array();
    for (bool m : s.mask()) mask.push_back(m ? 1 : 0);
    row["mask"] = mask;
    const Eigen::MatrixXd X = s.dense();
    Json flat = Json::array();
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      for (Eigen::Index c = 0; c < X.cols(); ++c) flat.push_back(X(r, c));
    }
    row["X"] = flat;
    row["y"] = s.y;
    out_rows.push_back(std::move(row));
  }
  j["rows"] = std::move(out_rows);
  return j;
}

std::vector<EncodedSequence> sequences_from_json(const Json& j) {
  const int T = j.at("T").get<int>();
  const int D = j.at("D").get<int>();
  const int page_dims = j.at("page_dims").get<int>();
  const int click_dims = j.at("click_dims").get<int>();
  const bool has_delta = j.at("has_delta").get<bool>();
  if (D != page_dims + click_dims + (has_delta ? 1 : 0)) {
    throw DataError("inconsistent dataset dims");
  }
  std::vector<EncodedSequence> rows;
  for (const auto& row : j.at("rows")) {
    EncodedSequence s;
    s.T = T;
    s.page_dims = page_dims;
    s.click_dims = click_dims;
    s.has_delta = has_delta;
    s.y = row.at("y").get<int>();
    const auto& mask = row.at("mask");
    const auto& flat = row.at("X");
    if (static_cast<int>(mask.size()) != T || static_cast<int>(flat.size()) != T * D) {
      throw DataError("dataset row has wrong size");
    }
    for (int t = 0; t < T; ++t) {
      if (mask[static_cast<std::size_t>(t)].get<int>() == 0) continue;
      SeqStep step;
      const auto at = [&](int c) { return flat[static_cast<std::size_t>(t * D + c)].get<double>(); };
      step.page = -1;
      for (int c = 0; c < page_dims; ++c) {
        if (at(c) == 1.0) {
          step.page = c;
          break;
        }
      }
      for (int c = 0; c < click_dims; ++c) {
        if (at(page_dims + c) == 1.0) step.clicks.push_back(c);
      }
      if (has_delta) step.delta = at(page_dims + click_dims);
      s.steps.push_back(std::move(step));
    }
    rows.push_back(std::move(s));
  }
  return rows;
}

Json flat_dataset_to_json(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const features::Layout& layout, const Json& scaler_echo) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["D"] = static_cast<int>(X.cols());
  j["layout"] = layout_to_json(layout);
  j["scaler"] = scaler_echo;
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    Json row;
    Json x = Json::array();
    for (Eigen::Index c = 0; c < X.cols(); ++c) x.push_back(X(r, c));
    row["x"] = std::move(x);
    row["y"] = static_cast<int>(y[r]);
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

void flat_dataset_from_json(const Json& j, Eigen::MatrixXd& X, Eigen::VectorXd& y,
                            features::Layout& layout) {
  const int D = j.at("D").get<int>();
  layout = layout_from_json(j.at("layout"));
  const auto& rows = j.at("rows");
  X.resize(static_cast<Eigen::Index>(rows.size()), D);
  y.resize(static_cast<Eigen::Index>(rows.size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    const auto& x = row.at("x");
    if (static_cast<int>(x.size()) != D) throw DataError("dataset row has wrong width");
    for (int c = 0; c < D; ++c) X(r, c) = x[static_cast<std::size_t>(c)].get<double>();
    y[r] = row.at("y").get<int>();
    ++r;
  }
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("read failure on " + path);
  return os.str();
}

}  // namespace intent::model_io
