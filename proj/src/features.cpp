#include "intent/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <set>
#include <sstream>

#include "intent/errors.hpp"
#include "json.hpp"

namespace intent::features {

using nlohmann::json;

std::vector<int> Layout::columns_of_group(const std::string& group) const {
  std::vector<int> cols;
  for (const LayoutEntry& e : entries) {
    if (e.group != group) continue;
    for (int c = e.begin; c < e.end; ++c) cols.push_back(c);
  }
  if (cols.empty()) throw ConfigError("unknown feature group: " + group);
  return cols;
}

std::vector<std::string> Layout::groups() const {
  std::vector<std::string> out;
  for (const LayoutEntry& e : entries) {
    if (std::find(out.begin(), out.end(), e.group) == out.end()) out.push_back(e.group);
  }
  return out;
}

VectorXd ColumnScaler::transform(const VectorXd& x) const {
  if (!fitted) throw StateError("column scaler is not fitted");
  if (x.size() != mean.size()) throw ShapeError("vector does not match scaler width");
  VectorXd out = x;
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    if (scale_col[static_cast<std::size_t>(c)]) out[c] = (x[c] - mean[c]) / sd[c];
  }
  return out;
}

MatrixXd ColumnScaler::transform(const MatrixXd& X) const {
  if (!fitted) throw StateError("column scaler is not fitted");
  if (X.cols() != mean.size()) throw ShapeError("matrix does not match scaler width");
  MatrixXd out = X;
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    if (scale_col[static_cast<std::size_t>(c)]) {
      out.col(c) = (X.col(c).array() - mean[c]) / sd[c];
    }
  }
  return out;
}

ColumnScaler fit_column_scaler(const MatrixXd& train, const std::vector<bool>& scale_col) {
  if (train.rows() == 0) throw DataError("cannot fit scaler on empty data");
  if (static_cast<Eigen::Index>(scale_col.size()) != train.cols()) {
    throw ShapeError("scale flags do not match matrix width");
  }
  ColumnScaler sc;
  sc.fitted = true;
  sc.scale_col = scale_col;
  sc.mean = train.colwise().mean();
  sc.sd = VectorXd::Ones(train.cols());
  const double denom = train.rows() > 1 ? static_cast<double>(train.rows() - 1) : 1.0;
  for (Eigen::Index c = 0; c < train.cols(); ++c) {
    if (!scale_col[static_cast<std::size_t>(c)]) continue;
    const double var = (train.col(c).array() - sc.mean[c]).square().sum() / denom;
    sc.sd[c] = var > 0.0 ? std::sqrt(var) : 1.0;  // constant columns pass through centered
  }
  return sc;
}

// ---------------------------------------------------------------------------
// engineered click features
// ---------------------------------------------------------------------------

Layout engineered_layout(const sessions::Vocab& vocab) {
  const int P = vocab.page_count();
  const int K = vocab.click_count();
  Layout l;
  l.entries = {
      {"time_per_page", "time", 0, P},
      {"page_ratio", "web-page", P, 2 * P},
      {"click_count", "click", 2 * P, 2 * P + K},
      {"click_rate", "click", 2 * P + K, 2 * P + 2 * K},
      {"pages_total", "web-page", 2 * P + 2 * K, 2 * P + 2 * K + 1},
      {"avg_clicks", "click", 2 * P + 2 * K + 1, 2 * P + 2 * K + 2},
  };
  l.dim = 2 * P + 2 * K + 2;
  return l;
}

namespace {

// Sum in ascending value order: bitwise independent of input order.
double ordered_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

}  // namespace

VectorXd engineer_features(std::vector<sessions::PageWindow> windows,
                           const sessions::Vocab& vocab, int max_windows) {
  if (!vocab.fitted()) throw StateError("vocab is not fitted");
  if (static_cast<int>(windows.size()) > max_windows) {
    windows.resize(static_cast<std::size_t>(max_windows));
  }
  const int P = vocab.page_count();
  const int K = vocab.click_count();
  VectorXd x = VectorXd::Zero(2 * P + 2 * K + 2);
  if (windows.empty()) return x;

  std::vector<std::vector<double>> dwell(static_cast<std::size_t>(P));
  std::vector<long> visits(static_cast<std::size_t>(P), 0);
  std::vector<long> click_count(static_cast<std::size_t>(K), 0);
  std::vector<long> click_steps(static_cast<std::size_t>(K), 0);      // windows with a click
  std::vector<long> click_appearances(static_cast<std::size_t>(K), 0);
  long total_clicks = 0;

  for (const sessions::PageWindow& w : windows) {
    const int page = vocab.page_category(w.url);
    dwell[static_cast<std::size_t>(page)].push_back(w.dwell);
    visits[static_cast<std::size_t>(page)] += 1;
    std::set<int> here;
    for (const std::string& c : w.clicks) {
      const int cc = vocab.click_category(c);
      if (cc < 0) continue;
      click_count[static_cast<std::size_t>(cc)] += 1;
      total_clicks += 1;
      here.insert(cc);
    }
    for (int cc : here) click_steps[static_cast<std::size_t>(cc)] += 1;
    for (int cc = 0; cc < K; ++cc) {
      const auto& pages = vocab.click_pages[static_cast<std::size_t>(cc)];
      const bool on_page = std::binary_search(pages.begin(), pages.end(), page);
      if (on_page || here.count(cc) > 0) {
        click_appearances[static_cast<std::size_t>(cc)] += 1;
      }
    }
  }

  const double n_pages = static_cast<double>(windows.size());
  for (int p = 0; p < P; ++p) {
    x[p] = ordered_sum(dwell[static_cast<std::size_t>(p)]);
    x[P + p] = static_cast<double>(visits[static_cast<std::size_t>(p)]) / n_pages;
  }
  for (int c = 0; c < K; ++c) {
    x[2 * P + c] = static_cast<double>(click_count[static_cast<std::size_t>(c)]);
    const long appear = click_appearances[static_cast<std::size_t>(c)];
    x[2 * P + K + c] =
        appear == 0 ? 0.0
                    : static_cast<double>(click_steps[static_cast<std::size_t>(c)]) /
                          static_cast<double>(appear);
  }
  x[2 * P + 2 * K] = n_pages;
  x[2 * P + 2 * K + 1] = static_cast<double>(total_clicks) / n_pages;
  return x;
}

VectorXd engineer_features(const sessions::Session& s, const sessions::Vocab& vocab,
                           int max_windows) {
  return engineer_features(sessions::pageview_windows(s), vocab, max_windows);
}

// ---------------------------------------------------------------------------
// demographics
// ---------------------------------------------------------------------------

DemoSchema parse_demo_schema(std::istream& in) {
  DemoSchema schema;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream is(line);
    std::string name, eq, kind, group;
    if (!(is >> name)) continue;  // blank
    if (!(is >> eq >> kind >> group) || eq != "=") {
      throw ConfigError("schema line " + std::to_string(line_no) +
                        ": expected '<name> = <kind> <group>'");
    }
    FeatureSpec spec;
    spec.name = name;
    spec.group = group;
    if (kind == "numeric") {
      spec.kind = FeatKind::Numeric;
    } else if (kind == "numeric_max") {
      spec.kind = FeatKind::NumericMaxImpute;
    } else if (kind == "ordinal") {
      spec.kind = FeatKind::Ordinal;
    } else if (kind == "categorical") {
      spec.kind = FeatKind::Categorical;
    } else if (kind.rfind("cyclic:", 0) == 0) {
      spec.kind = FeatKind::Cyclic;
      spec.period = std::stoi(kind.substr(7));
      if (spec.period <= 0) throw ConfigError("cyclic period must be positive: " + name);
    } else {
      throw ConfigError("unknown feature kind '" + kind + "' for " + name);
    }
    schema.push_back(std::move(spec));
  }
  if (schema.empty()) throw ConfigError("empty demographic schema");
  return schema;
}

std::vector<DemoRecord> parse_demo_records(std::istream& in) {
  if (!in.good()) throw IoError("cannot read demographics stream");
  std::vector<DemoRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& ex) {
      throw DataError("demographics line " + std::to_string(line_no) + ": " + ex.what());
    }
    DemoRecord r;
    r.user_id = j.at("user_id").get<std::string>();
    if (j.contains("session_start")) {
      r.session_start = sessions::parse_iso8601(j["session_start"].get<std::string>());
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "user_id" || it.key() == "session_start") continue;
      if (it->is_null()) {
        r.values[it.key()] = std::monostate{};
      } else if (it->is_number()) {
        r.values[it.key()] = it->get<double>();
      } else if (it->is_string()) {
        r.values[it.key()] = it->get<std::string>();
      } else {
        throw DataError("demographics line " + std::to_string(line_no) +
                        ": unsupported value for " + it.key());
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

bool is_missing(const DemoRecord& r, const std::string& name) {
  auto it = r.values.find(name);
  return it == r.values.end() || std::holds_alternative<std::monostate>(it->second);
}

double numeric_value(const DemoRecord& r, const std::string& name) {
  const DemoValue& v = r.values.at(name);
  if (const double* d = std::get_if<double>(&v)) return *d;
  throw DataError("feature " + name + " must be numeric");
}

std::string string_value(const DemoRecord& r, const std::string& name) {
  const DemoValue& v = r.values.at(name);
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  if (const double* d = std::get_if<double>(&v)) {
    std::ostringstream os;
    os << *d;
    return os.str();
  }
  throw DataError("feature " + name + " has no value");
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

DemographyPrep fit_demography_prep(const std::vector<DemoRecord>& train,
                                   const DemoSchema& schema) {
  if (train.empty()) throw DataError("cannot fit demography prep on an empty training split");
  if (schema.empty()) throw ConfigError("empty demographic schema");

  DemographyPrep prep;
  prep.schema = schema;

  for (const FeatureSpec& spec : schema) {
    if (spec.kind == FeatKind::Categorical) {
      std::map<std::string, long> counts;
      for (const DemoRecord& r : train) {
        if (!is_missing(r, spec.name)) counts[string_value(r, spec.name)] += 1;
      }
      if (counts.empty()) throw DataError("feature " + spec.name + " is missing in every row");
      std::string mode = counts.begin()->first;
      long best = counts.begin()->second;
      for (const auto& [level, count] : counts) {
        if (count > best) {
          mode = level;
          best = count;
        }
      }
      prep.categorical_impute[spec.name] = mode;
      std::vector<std::string> levels;
      for (const auto& [level, _] : counts) levels.push_back(level);
      prep.levels[spec.name] = std::move(levels);  // map iteration is sorted
    } else {
      std::vector<double> observed;
      for (const DemoRecord& r : train) {
        if (!is_missing(r, spec.name)) observed.push_back(numeric_value(r, spec.name));
      }
      if (observed.empty()) throw DataError("feature " + spec.name + " is missing in every row");
      double value = 0.0;
      switch (spec.kind) {
        case FeatKind::Numeric: {
          double s = 0.0;
          for (double v : observed) s += v;
          value = s / static_cast<double>(observed.size());
          break;
        }
        case FeatKind::NumericMaxImpute:
          value = *std::max_element(observed.begin(), observed.end());
          break;
        case FeatKind::Ordinal:
        case FeatKind::Cyclic:
          value = median_of(std::move(observed));
          break;
        case FeatKind::Categorical:
          break;
      }
      prep.numeric_impute[spec.name] = value;
    }
  }

  // layout
  int col = 0;
  for (const FeatureSpec& spec : schema) {
    LayoutEntry e;
    e.name = spec.name;
    e.group = spec.group;
    e.begin = col;
    switch (spec.kind) {
      case FeatKind::Numeric:
      case FeatKind::NumericMaxImpute:
      case FeatKind::Ordinal:
        col += 1;
        break;
      case FeatKind::Cyclic:
        col += 2;
        break;
      case FeatKind::Categorical:
        col += static_cast<int>(prep.levels[spec.name].size());
        break;
    }
    e.end = col;
    prep.layout.entries.push_back(std::move(e));
  }
  prep.layout.dim = col;

  // standardize everything except the one-hot indicator columns
  std::vector<bool> scale(static_cast<std::size_t>(col), true);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].kind == FeatKind::Categorical) {
      for (int c = prep.layout.entries[i].begin; c < prep.layout.entries[i].end; ++c) {
        scale[static_cast<std::size_t>(c)] = false;
      }
    }
  }
  prep.fitted = true;  // encode_demographics below needs the flag

  MatrixXd raw(static_cast<Eigen::Index>(train.size()), col);
  DemographyPrep unscaled = prep;
  unscaled.scaler.fitted = true;  // identity transform while fitting
  unscaled.scaler.mean = VectorXd::Zero(col);
  unscaled.scaler.sd = VectorXd::Ones(col);
  unscaled.scaler.scale_col.assign(static_cast<std::size_t>(col), false);
  for (std::size_t i = 0; i < train.size(); ++i) {
    raw.row(static_cast<Eigen::Index>(i)) = encode_demographics(train[i], unscaled).transpose();
  }
  prep.scaler = fit_column_scaler(raw, scale);
  return prep;
}

VectorXd encode_demographics(const DemoRecord& rec, const DemographyPrep& prep,
                             std::size_t* unknown_levels) {
  if (!prep.fitted) throw StateError("demography prep is not fitted");
  VectorXd x = VectorXd::Zero(prep.layout.dim);

  for (std::size_t i = 0; i < prep.schema.size(); ++i) {
    const FeatureSpec& spec = prep.schema[i];
    const LayoutEntry& at = prep.layout.entries[i];
    const bool missing = is_missing(rec, spec.name);
    switch (spec.kind) {
      case FeatKind::Numeric:
      case FeatKind::NumericMaxImpute:
      case FeatKind::Ordinal: {
        x[at.begin] = missing ? prep.numeric_impute.at(spec.name) : numeric_value(rec, spec.name);
        break;
      }
      case FeatKind::Cyclic: {
        const double code =
            missing ? prep.numeric_impute.at(spec.name) : numeric_value(rec, spec.name);
        const double angle = 2.0 * M_PI * code / static_cast<double>(spec.period);
        x[at.begin] = std::sin(angle);
        x[at.begin + 1] = std::cos(angle);
        break;
      }
      case FeatKind::Categorical: {
        const std::string level =
            missing ? prep.categorical_impute.at(spec.name) : string_value(rec, spec.name);
        const std::vector<std::string>& levels = prep.levels.at(spec.name);
        const auto it = std::lower_bound(levels.begin(), levels.end(), level);
        if (it != levels.end() && *it == level) {
          x[at.begin + static_cast<int>(it - levels.begin())] = 1.0;
        } else if (unknown_levels != nullptr) {
          *unknown_levels += 1;  // all-zero one-hot row
        }
        break;
      }
    }
  }
  return prep.scaler.transform(x);
}

}  // namespace intent::features
