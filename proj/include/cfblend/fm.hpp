#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfblend/ratings.hpp"

namespace cfblend {

// Feature blocks of an FM design row, always laid out in the order
// (user one-hot, item one-hot, implicit user, implicit item).
//   implicit_user: n_items slots, the items rated by the row's user
//   implicit_item: n_users slots, the users who rated the row's item
struct FeatureSchema {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    bool implicit_user = false;
    bool implicit_item = false;

    enum class Block : std::uint8_t { user, item, implicit_user, implicit_item };

    std::size_t user_offset() const { return 0; }
    std::size_t item_offset() const { return n_users; }
    std::size_t implicit_user_offset() const { return n_users + n_items; }
    std::size_t implicit_item_offset() const {
        return implicit_user_offset() + (implicit_user ? n_items : 0);
    }
    std::size_t n_features() const {
        return implicit_item_offset() + (implicit_item ? n_users : 0);
    }
    std::size_t n_blocks() const { return 2 + (implicit_user ? 1 : 0) + (implicit_item ? 1 : 0); }
    // Dense block id in [0, n_blocks) for a feature index.
    std::size_t block_of(std::size_t feature) const;

    // "ui", "uiiu", "uiii" or "uiiuii".
    std::string label() const;
};

struct Feature {
    std::size_t index;
    double value;
};

// Sparse design matrix in row-compressed form with one target per row.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    explicit FeatureMatrix(FeatureSchema schema) : schema_(schema) { row_ptr_.push_back(0); }

    // `row` must be sorted by index; throws KeyError for an index outside
    // the schema's feature space.
    void add_row(std::span<const Feature> row, double target);

    std::size_t rows() const { return targets_.size(); }
    std::size_t nnz() const { return features_.size(); }
    const FeatureSchema& schema() const { return schema_; }
    std::span<const Feature> row(std::size_t r) const {
        return std::span<const Feature>(features_).subspan(row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]);
    }
    std::span<const double> targets() const { return targets_; }

private:
    FeatureSchema schema_;
    std::vector<std::size_t> row_ptr_;
    std::vector<Feature> features_;
    std::vector<double> targets_;
};

// One row per observed rating of `m`, in entry order, target = raw rating.
// Implicit blocks are taken from `m` itself.
FeatureMatrix build_features(const RatingMatrix& m, const FeatureSchema& schema);

// Rows for arbitrary (user, item) queries with implicit blocks taken from
// `implicit_source` (normally the training matrix). Targets are 0.
FeatureMatrix build_query_features(const RatingMatrix& implicit_source,
                                   std::span<const UserItem> pairs, const FeatureSchema& schema);

// Degree-2 FM parameters; V has one k-dimensional row per feature.
struct FMModel {
    double w0 = 0.0;
    Eigen::VectorXd w;
    Eigen::MatrixXd V;

    std::size_t n_features() const { return static_cast<std::size_t>(w.size()); }
    std::size_t rank() const { return static_cast<std::size_t>(V.cols()); }
};

// w0 + sum_i w_i x_i + 1/2 sum_f [(sum_i v_if x_i)^2 - sum_i v_if^2 x_i^2]
double fm_predict(const FMModel& model, std::span<const Feature> row);

// Hyperprior constants follow the usual BFM defaults (Gamma(1,1) on
// precisions, Normal(0, 1/(gamma0 lambda)) on group means).
struct BfmConfig {
    std::size_t rank = 50;
    std::size_t iterations = 500;
    std::optional<std::size_t> burn_in;  // default: 20% of iterations
    std::uint64_t seed = 0;
    double init_stdev = 0.1;
    double alpha0 = 1.0;        // Gamma shape prior, noise precision
    double beta0 = 1.0;         // Gamma rate prior, noise precision
    double alpha_lambda = 1.0;  // Gamma shape prior, group precisions
    double beta_lambda = 1.0;   // Gamma rate prior, group precisions
    double gamma0 = 1.0;
    double mu0 = 0.0;
    double w0_precision = 0.0;        // prior precision of the global bias (0 = flat)
    double cutpoint_step = 0.05;      // Metropolis proposal scale (ordered probit)
    double cutpoint_prior_sd = 10.0;  // Normal prior on first cutpoint and log gaps

    std::size_t effective_burn_in() const { return burn_in.value_or(iterations / 5); }
};

using Cutpoints = std::array<double, 4>;

struct BfmResult {
    std::vector<double> query_predictions;  // posterior predictive mean
    std::vector<double> train_predictions;  // same, for the training rows
    std::vector<Cutpoints> cutpoint_samples;  // ordered probit only, one per retained sweep
    std::size_t retained_samples = 0;
    double cutpoint_acceptance = 0.0;
    FMModel last_sample;
};

BfmResult bfm_fit_regression(const FeatureMatrix& train, const BfmConfig& cfg,
                             const FeatureMatrix& query);

// Targets must be integers 1..5. Predictions are expected categories, so
// they always lie in [1,5].
BfmResult bfm_fit_ordered_probit(const FeatureMatrix& train, const BfmConfig& cfg,
                                 const FeatureMatrix& query);

// P(category c | latent score) under unit-variance probit with the given
// strictly increasing cutpoints.
std::array<double, 5> ordinal_probabilities(double score, const Cutpoints& cutpoints);
double ordinal_expectation(std::span<const double, 5> probabilities);

}  // namespace cfblend
