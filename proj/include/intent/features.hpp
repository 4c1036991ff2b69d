#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "intent/sessions.hpp"

namespace intent::features {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Named column ranges of a feature vector; drives serialization and the
// ablation study's group-wise column removal.
struct LayoutEntry {
  std::string name;
  std::string group;  // ablation group tag
  int begin = 0;
  int end = 0;  // exclusive
};

struct Layout {
  std::vector<LayoutEntry> entries;
  int dim = 0;

  std::vector<int> columns_of_group(const std::string& group) const;
  std::vector<std::string> groups() const;
};

// Column-wise standardization fitted on the training matrix. Columns listed
// in `skip` (one-hot indicators) pass through unscaled.
struct ColumnScaler {
  VectorXd mean;
  VectorXd sd;
  std::vector<bool> scale_col;
  bool fitted = false;

  VectorXd transform(const VectorXd& x) const;
  MatrixXd transform(const MatrixXd& X) const;
};

ColumnScaler fit_column_scaler(const MatrixXd& train, const std::vector<bool>& scale_col);

// --- engineered click features ---------------------------------------------

// Layout: dwell seconds per page category | visit ratio per page category |
// click counts | click rates | total pageviews | average clicks per page.
Layout engineered_layout(const sessions::Vocab& vocab);

// Raw (pre-standardization) aggregate vector for one session. Sums are
// accumulated in value order, so the result is bit-identical under any
// permutation of the session's pageview windows.
VectorXd engineer_features(std::vector<sessions::PageWindow> windows,
                           const sessions::Vocab& vocab, int max_windows = 30);
VectorXd engineer_features(const sessions::Session& s, const sessions::Vocab& vocab,
                           int max_windows = 30);

// --- demographic features ---------------------------------------------------

enum class FeatKind { Numeric, NumericMaxImpute, Ordinal, Categorical, Cyclic };

struct FeatureSpec {
  std::string name;
  FeatKind kind = FeatKind::Numeric;
  int period = 0;       // cyclic only
  std::string group;    // demographic | time | place
};

using DemoSchema = std::vector<FeatureSpec>;

// "age = numeric demographic" / "month = cyclic:12 time" lines.
DemoSchema parse_demo_schema(std::istream& in);

using DemoValue = std::variant<std::monostate, double, std::string>;

struct DemoRecord {
  std::string user_id;
  sessions::Timestamp session_start = 0;
  std::map<std::string, DemoValue> values;
};

std::vector<DemoRecord> parse_demo_records(std::istream& in);

struct DemographyPrep {
  DemoSchema schema;
  std::map<std::string, double> numeric_impute;       // mean / median / max by kind
  std::map<std::string, std::string> categorical_impute;
  std::map<std::string, std::vector<std::string>> levels;  // sorted one-hot levels
  Layout layout;
  ColumnScaler scaler;
  bool fitted = false;
};

// Imputation values, category inventories, cyclic periods and the column
// scaler, all from training rows only.
DemographyPrep fit_demography_prep(const std::vector<DemoRecord>& train,
                                   const DemoSchema& schema);

// Impute -> encode (ordinal integers, categorical one-hot, cyclic sin/cos
// with codes 0..P-1 over period P) -> standardize the non-indicator columns.
// Unknown categorical levels become all-zero rows of the one-hot block and
// bump *unknown_levels.
VectorXd encode_demographics(const DemoRecord& rec, const DemographyPrep& prep,
                             std::size_t* unknown_levels = nullptr);

}  // namespace intent::features
