#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfblend/ratings.hpp"

namespace cfblend {

// Held-out base-model predictions as regression features: column j holds
// model j's raw (unclipped) predictions.
struct BlendDataset {
    Eigen::MatrixXd features;  // N x M
    Eigen::VectorXd targets;   // N
    std::vector<std::string> model_names;
    std::vector<UserItem> pairs;  // row order
    std::uint64_t split_seed = 0;

    std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
    std::size_t models() const { return static_cast<std::size_t>(features.cols()); }
};

enum class BlendMethod { ols, ridge, lasso };

inline constexpr double kRidgeAlpha = 0.01;
inline constexpr double kLassoAlpha = 0.001;
inline constexpr double kLassoTolerance = 1e-8;
inline constexpr std::size_t kLassoMaxSweeps = 10000;

struct BlendModel {
    double intercept = 0.0;
    Eigen::VectorXd weights;
    BlendMethod method = BlendMethod::ols;
    double alpha = 0.0;
    std::vector<std::string> model_names;
};

// A named base model: trains on the given matrix and returns one raw
// prediction per query pair.
struct BaseModel {
    std::string name;
    std::function<std::vector<double>(const RatingMatrix&, std::span<const UserItem>)> fit_predict;
};

inline constexpr double kBlendSplitFraction = 0.8;

// Splits `m`, trains every base model on the train part and stacks their
// predictions on the held-out part. Failures are rethrown with the model name.
BlendDataset make_blend_dataset(const RatingMatrix& m, std::span<const BaseModel> models,
                                double fraction = kBlendSplitFraction, std::uint64_t seed = 0);

// Same, with an explicit split already made.
BlendDataset make_blend_dataset(const DataSplit& split, std::span<const BaseModel> models);

// Intercept is never penalized.
//   ols:   least squares, NumericError when [1 X] is rank-deficient
//   ridge: |y - b - Xw|^2 + alpha |w|^2
//   lasso: 1/(2N) |y - b - Xw|^2 + alpha |w|_1, cyclic coordinate descent
BlendModel fit_blender(const BlendDataset& data, BlendMethod method, double alpha = 0.0);

// Throws ShapeError when the prediction vector length differs from the
// number of blended models.
double blend_predict(const BlendModel& model, std::span<const double> model_predictions);
std::vector<double> blend_predict(const BlendModel& model, const Eigen::MatrixXd& features);

// Header: model names then `target`; one row per validation entry.
void write_blend_dataset(const BlendDataset& data, std::ostream& out);
void write_blend_dataset(const BlendDataset& data, const std::filesystem::path& path);

BlendMethod parse_blend_method(const std::string& name);
std::string to_string(BlendMethod method);

}  // namespace cfblend
