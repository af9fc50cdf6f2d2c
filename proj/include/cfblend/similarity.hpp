#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cfblend/ratings.hpp"

namespace cfblend {

enum class SimilarityAxis { user, item, both };
enum class SimilarityMeasure { cosine, pcc, sigra };
enum class SimilarityWeighting { none, normal, significance, sigmoid };

inline constexpr std::size_t kAllNeighbors = std::numeric_limits<std::size_t>::max();

inline constexpr std::size_t kUserSignificanceBeta = 7;
inline constexpr std::size_t kItemSignificanceBeta = 70;
inline constexpr std::size_t kBothSignificanceBeta = 20;

struct SimilarityConfig {
    SimilarityAxis axis = SimilarityAxis::item;
    SimilarityMeasure measure = SimilarityMeasure::pcc;
    SimilarityWeighting weighting = SimilarityWeighting::normal;
    std::size_t beta = kItemSignificanceBeta;
    std::size_t k_neighbors = kAllNeighbors;
    double user_weight = 0.5;  // axis == both only

    // Throws ConfigError: beta < 1, sigra with a weighting, user_weight
    // outside [0,1].
    void validate() const;
};

// Dense symmetric similarity over users or items. Pairs without co-ratings
// hold 0; the diagonal is 1 for every entity with at least one rating.
struct SimilarityMatrix {
    SimilarityAxis axis = SimilarityAxis::item;
    SimilarityMeasure measure = SimilarityMeasure::pcc;
    Eigen::MatrixXd values;
    Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic> overlap;  // |I_a ∩ I_b|
    std::vector<std::size_t> profile_sizes;                                 // |I_a|
    // Reinforced matrices carry similarity between entities that never
    // co-rated; with this set, kNN admits every pair instead of requiring
    // a nonzero overlap.
    bool dense_support = false;

    std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
    double operator()(std::size_t a, std::size_t b) const {
        return values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
};

// cfg.axis must be user or item.
SimilarityMatrix compute_similarity(const RatingMatrix& m, const SimilarityConfig& cfg);

// Pairwise measures over two co-rated value lists, exposed for testing.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double pcc_similarity(std::span<const double> a, std::span<const double> b, double mean_a, double mean_b);
double sigra_similarity(std::span<const double> a, std::span<const double> b, std::size_t size_a,
                        std::size_t size_b);

// Multiplier in [0,1] for a pair with the given overlap and profile sizes.
double similarity_weight(SimilarityWeighting weighting, std::size_t overlap, std::size_t size_a,
                         std::size_t size_b, std::size_t beta);

// Off-diagonal S[a,b] *= w(a,b); the diagonal is left at 1.
SimilarityMatrix apply_weighting(SimilarityMatrix s, const SimilarityConfig& cfg);

// mean_a + sum_{b in N_k} s(a,b) (r_b - mean_b) / sum |s(a,b)| over the k most
// similar entities (ties by lower index) that rated the counterpart. A user
// axis matrix predicts along users, an item axis matrix along items.
double predict_knn(const RatingMatrix& m, const SimilarityMatrix& s, std::size_t user, std::size_t item,
                   std::size_t k);

double predict_combined(const RatingMatrix& m, const SimilarityMatrix& user_sim,
                        const SimilarityMatrix& item_sim, std::size_t user, std::size_t item,
                        std::size_t k, double user_weight);

}  // namespace cfblend
