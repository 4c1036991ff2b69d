#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "intent/dataset.hpp"
#include "intent/features.hpp"
#include "intent/metrics.hpp"
#include "intent/nn.hpp"
#include "intent/seq.hpp"
#include "intent/sessions.hpp"

// JSON forms of every persisted artifact. All writers use ordered_json so a
// given value always serializes to the same bytes.
namespace intent::model_io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// parameter packs: one flat row-major array per named block
Json pack_to_json(const nn::ParamPack& pack);
void pack_from_json(const Json& j, nn::ParamPack& pack);  // shapes must match

Json ffnn_to_json(const nn::FfnnParams& p);
nn::FfnnParams ffnn_from_json(const Json& j);
Json rnn_to_json(const seq::RnnParams& p);
seq::RnnParams rnn_from_json(const Json& j);
Json lstm_to_json(const seq::LstmParams& p);
seq::LstmParams lstm_from_json(const Json& j);
Json concat_seq_to_json(const seq::ConcatSeqParams& p);
seq::ConcatSeqParams concat_seq_from_json(const Json& j);

Json vocab_to_json(const sessions::Vocab& v);
sessions::Vocab vocab_from_json(const Json& j);
Json scaler_to_json(const sessions::Scaler& s);
sessions::Scaler scaler_from_json(const Json& j);
Json column_scaler_to_json(const features::ColumnScaler& s);
features::ColumnScaler column_scaler_from_json(const Json& j);
Json layout_to_json(const features::Layout& l);
features::Layout layout_from_json(const Json& j);
Json demo_prep_to_json(const features::DemographyPrep& p);
features::DemographyPrep demo_prep_from_json(const Json& j);

Json report_to_json(const metrics::EvalReport& r, bool include_roc = false);

// FNV-1a over the serialized bytes; fingerprints travel with models so
// evaluation can refuse mismatched encoders.
std::string fingerprint(const Json& j);
std::string fingerprint_bytes(const std::string& bytes);

// dataset containers
Json sequences_to_json(const std::vector<EncodedSequence>& rows, const Json& vocab_echo,
                       const Json& scaler_echo);
std::vector<EncodedSequence> sequences_from_json(const Json& j);

Json flat_dataset_to_json(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const features::Layout& layout, const Json& scaler_echo);
void flat_dataset_from_json(const Json& j, Eigen::MatrixXd& X, Eigen::VectorXd& y,
                            features::Layout& layout);

// Atomically replace `path`: write to a temp file in the same directory and
// rename, so failures never leave partial artifacts behind.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace intent::model_io
