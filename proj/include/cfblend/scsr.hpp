#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "cfblend/ratings.hpp"

namespace cfblend {

struct ScsrConfig {
    double alpha = 0.5;        // damping
    std::size_t max_iter = 15;
    double epsilon = 1e-4;     // Frobenius change threshold for both matrices
    std::size_t sigma = 15;    // profile sample size per side
    std::uint64_t seed = 0;
};

struct ReinforcedSimilarities {
    Eigen::MatrixXd user_sim;
    Eigen::MatrixXd item_sim;
    std::size_t iterations_run = 0;
    bool converged = false;
};

// Ratings 1..5 mapped to [0,1].
inline double unit_rating(double rating) { return (rating - 1.0) / 4.0; }

// 1 - 2|r1 - r2| for unit-scaled ratings; lies in [-1, 1].
double pair_weight(double r1, double r2);

struct SimilarityPair {
    Eigen::MatrixXd user_sim;
    Eigen::MatrixXd item_sim;
};

// One full reinforcement step over complete profiles. Both halves read only
// the previous matrices; pairs whose weights sum to 0 in absolute value
// keep their old value; the diagonal is untouched.
SimilarityPair csr_update_reference(const RatingMatrix& ratings, const Eigen::MatrixXd& user_prev,
                                    const Eigen::MatrixXd& item_prev, double alpha);

// Stochastic variant: every pair update uses at most `sigma` sampled entries
// from each profile (all of them when the profile is smaller), drawn without
// replacement from a stream keyed on (seed, iteration, half, a, b).
ReinforcedSimilarities scsr_train(const RatingMatrix& ratings, const Eigen::MatrixXd& user_init,
                                  const Eigen::MatrixXd& item_init, const ScsrConfig& cfg);

}  // namespace cfblend
