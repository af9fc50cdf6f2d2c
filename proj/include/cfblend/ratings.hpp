#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace cfblend {

inline constexpr double kMinRating = 1.0;
inline constexpr double kMaxRating = 5.0;

struct Rating {
    std::size_t user;
    std::size_t item;
    double value;
};

struct UserItem {
    std::size_t user;
    std::size_t item;

    friend bool operator==(const UserItem&, const UserItem&) = default;
};

// One observed value as seen from a profile: `index` is the counterpart
// (item index inside a user profile, user index inside an item profile).
struct Cell {
    std::size_t index;
    double value;
};

enum class RatingBounds {
    strict,     // every value must lie in [kMinRating, kMaxRating]
    unbounded,  // normalized data, prediction files
};

// Sparse user x item matrix of observed values with per-user and per-item
// profiles sorted by counterpart index. Immutable after construction.
class RatingMatrix {
public:
    RatingMatrix() = default;

    // Throws DuplicateError on a repeated (user, item) pair, RangeError on a
    // value outside [1,5] (strict bounds) or an index outside the dimensions.
    RatingMatrix(std::size_t n_users, std::size_t n_items, std::vector<Rating> entries,
                 RatingBounds bounds = RatingBounds::strict);

    std::size_t n_users() const { return n_users_; }
    std::size_t n_items() const { return n_items_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    RatingBounds bounds() const { return bounds_; }

    std::span<const Rating> entries() const { return entries_; }
    std::span<const Cell> user_profile(std::size_t user) const { return by_user_.at(user); }
    std::span<const Cell> item_profile(std::size_t item) const { return by_item_.at(item); }

    std::optional<double> find(std::size_t user, std::size_t item) const;
    // Throws KeyError when the pair is not observed.
    double at(std::size_t user, std::size_t item) const;

    double global_mean() const { return global_mean_; }
    // Mean over the entity's observed values; the global mean when it has none.
    double user_mean(std::size_t user) const { return user_means_.at(user); }
    double item_mean(std::size_t item) const { return item_means_.at(item); }

    std::vector<UserItem> pairs() const;
    std::vector<double> values() const;

private:
    std::size_t n_users_ = 0;
    std::size_t n_items_ = 0;
    RatingBounds bounds_ = RatingBounds::strict;
    std::vector<Rating> entries_;
    std::vector<std::vector<Cell>> by_user_;
    std::vector<std::vector<Cell>> by_item_;
    std::vector<double> user_means_;
    std::vector<double> item_means_;
    double global_mean_ = 0.0;
};

struct LoadOptions {
    std::optional<std::size_t> n_users;
    std::optional<std::size_t> n_items;
    RatingBounds bounds = RatingBounds::strict;
};

// Reads `Id,Prediction` CSV: a header line, then `r<row>_c<col>,<value>` with
// 1-based indices. Entry order follows the file.
RatingMatrix load_ratings(std::istream& in, const LoadOptions& options = {});
RatingMatrix load_ratings(const std::filesystem::path& path, const LoadOptions& options = {});

struct DataSplit {
    RatingMatrix train;
    RatingMatrix validation;
    std::uint64_t seed = 0;
    double train_fraction = 0.0;
};

// Uniform random partition: round(fraction * N) entries go to train. Both
// parts keep the source dimensions and the source entry order.
DataSplit split_ratings(const RatingMatrix& m, double fraction, std::uint64_t seed);

enum class NormalizationMode { column, none };

inline constexpr double kMinColumnStd = 1e-6;

struct NormalizationState {
    NormalizationMode mode = NormalizationMode::none;
    std::vector<double> column_means;
    std::vector<double> column_stds;
    double global_mean = 0.0;

    double normalize(std::size_t item, double rating) const {
        return (rating - column_means[item]) / column_stds[item];
    }
    double denormalize(std::size_t item, double value) const {
        return value * column_stds[item] + column_means[item];
    }

    static NormalizationState identity(std::size_t n_items);
};

struct NormalizedRatings {
    RatingMatrix matrix;
    NormalizationState state;
};

// Column-level z-scoring with population std floored at kMinColumnStd.
// Columns without observations get the global mean and std 1.
NormalizedRatings normalize(const RatingMatrix& m, NormalizationMode mode = NormalizationMode::column);

struct Prediction {
    std::size_t user;
    std::size_t item;
    double value;
};

// Final predictions. Values are clipped to [1,5] on insertion.
class PredictionSet {
public:
    PredictionSet() = default;
    PredictionSet(std::span<const UserItem> pairs, std::span<const double> values);

    void add(std::size_t user, std::size_t item, double value);

    std::span<const Prediction> entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

private:
    std::vector<Prediction> entries_;
};

// Throws KeyError when a predicted pair is absent from `truth`.
double rmse(const PredictionSet& predictions, const RatingMatrix& truth);
// Plain RMSE between two equally sized vectors, no clipping.
double rmse(std::span<const double> predicted, std::span<const double> truth);

void write_submission(const PredictionSet& predictions, std::ostream& out);
void write_submission(const PredictionSet& predictions, const std::filesystem::path& path);

}  // namespace cfblend
