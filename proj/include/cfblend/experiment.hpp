#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfblend/presets.hpp"
#include "cfblend/ratings.hpp"

namespace cfblend {

inline constexpr double kDefaultSplitFraction = 0.9;

struct ExperimentConfig {
    std::filesystem::path data;
    std::string preset = "global-mean";
    PresetOverrides overrides;
    double split = kDefaultSplitFraction;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> out_metrics;
    std::optional<std::filesystem::path> out_submission;
    std::optional<std::filesystem::path> queries;    // pairs to predict for the submission
    std::optional<std::filesystem::path> out_model;  // svd, als and funksvd only
    bool timing = true;  // false writes 0 seconds, making metrics files byte-stable
};

struct MetricsRow {
    std::string model;
    std::size_t rank = 0;
    std::uint64_t seed = 0;
    double train_rmse = 0.0;
    double val_rmse = 0.0;
    double seconds = 0.0;
};

// Checks paths: `data` and `queries` must exist, output directories must
// exist. Throws ConfigError.
void validate(const ExperimentConfig& cfg);

// Splits, trains the preset on the train part and scores both parts with
// predictions clipped to [1,5]. When a submission is requested the preset is
// refit on all of `data` and applied to the query pairs.
MetricsRow run_experiment(const ExperimentConfig& cfg, const RatingMatrix& data);
MetricsRow run_experiment(const ExperimentConfig& cfg);

inline const std::vector<std::string> kSweepModels = {"svd", "als", "funksvd", "bfm-r-ui"};

// One row per (model, rank), models outer. Throws ConfigError on an empty
// rank list.
std::vector<MetricsRow> sweep_rank(const ExperimentConfig& cfg, const RatingMatrix& data,
                                   std::span<const std::size_t> ranks,
                                   std::span<const std::string> models = kSweepModels);

// `model,rank,seed,train_rmse,val_rmse,seconds`, shortest round-trip doubles.
void write_metrics_header(std::ostream& out);
void write_metrics_row(const MetricsRow& row, std::ostream& out);
void write_metrics(std::span<const MetricsRow> rows, std::ostream& out);
void write_metrics(std::span<const MetricsRow> rows, const std::filesystem::path& path);

// Reads `Id,Prediction` pairs; values are ignored.
std::vector<UserItem> load_query_pairs(const std::filesystem::path& path);

}  // namespace cfblend
