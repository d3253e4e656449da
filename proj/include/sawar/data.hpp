#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sawar/nn.hpp"

namespace sawar {

struct RawRow {
    std::string id;
    double time = 0.0;
    int event = 0;
    std::vector<std::optional<double>> num;       // aligned with RawDataset::num_names
    std::vector<std::optional<std::string>> fac;  // aligned with RawDataset::fac_names
};

/// Rows of a SurvSet-style CSV: `time`, `event`, `num_*`, `fac_*`.
struct RawDataset {
    std::string name;
    std::vector<std::string> num_names;
    std::vector<std::string> fac_names;
    std::vector<RawRow> rows;
    std::size_t dropped_nonpositive_time = 0;
    std::size_t missing_values = 0;
    std::vector<std::string> warnings;
};

RawDataset load_csv(const std::string& path);
RawDataset parse_csv(const std::string& text, const std::string& name);

struct NumericColumn {
    std::string name;
    double median = 0.0;  // imputation value for missing entries
    double mean = 0.0;
    double stddev = 1.0;
};

struct FactorColumn {
    std::string name;
    std::vector<std::string> levels;  // sorted; one output column each
    std::vector<double> mean;         // per level, only used when normalize_all
    std::vector<double> stddev;
};

inline const std::string kMissingLevel = "missing";

/// Train-split encoding: imputed, standardized numerics followed by one-hot
/// blocks for each factor. Columns that are constant on the train rows are dropped.
struct FeatureCodec {
    std::vector<std::string> source_numeric;  // every num_* column of the fitted dataset
    std::vector<std::string> source_factors;
    std::vector<NumericColumn> numeric;
    std::vector<FactorColumn> factors;
    bool normalize_all = false;  // also standardize the one-hot columns
    std::vector<std::string> dropped;

    int dim() const;
    std::vector<std::string> column_names() const;
};

struct CodecOptions {
    bool normalize_all = false;
};

FeatureCodec fit_codec(const RawDataset& raw, const std::vector<std::size_t>& train_rows,
                       const CodecOptions& opts = {});

struct SurvivalDataset {
    RowMatrix X;
    Vector t;
    std::vector<int> e;
    std::vector<std::size_t> rows;  // indices into RawDataset::rows

    Eigen::Index size() const { return X.rows(); }
};

SurvivalDataset apply_codec(const FeatureCodec& codec, const RawDataset& raw, const std::vector<std::size_t>& rows);
SurvivalDataset apply_codec(const FeatureCodec& codec, const RawDataset& raw);

struct SplitDataset {
    SurvivalDataset train;
    SurvivalDataset validation;
    SurvivalDataset test;
    FeatureCodec codec;
    std::uint64_t seed = 0;
    bool stratified = true;
    std::vector<std::string> warnings;
};

/// Event-stratified 60/20/20 split; the codec is fitted on the train rows only.
SplitDataset stratified_split(const RawDataset& raw, std::uint64_t seed, const CodecOptions& opts = {});

// The three index sets stratified_split uses, each sorted ascending.
struct SplitIndices {
    std::vector<std::size_t> train, validation, test;
    bool stratified = true;
};
SplitIndices split_indices(const std::vector<int>& events, std::uint64_t seed);

nlohmann::json codec_to_json(const FeatureCodec& codec);
FeatureCodec codec_from_json(const nlohmann::json& j);

}  // namespace sawar
