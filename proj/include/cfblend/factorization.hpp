#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cfblend/ratings.hpp"

namespace cfblend {

// Latent factors shared by the SVD baseline, ALS and FunkSVD. Factors live in
// normalized rating space; predictions are mapped back through `norm`.
struct FactorModel {
    Eigen::MatrixXd user_factors;  // n_users x k
    Eigen::MatrixXd item_factors;  // k x n_items
    NormalizationState norm;

    std::size_t rank() const { return static_cast<std::size_t>(user_factors.cols()); }
    std::size_t n_users() const { return static_cast<std::size_t>(user_factors.rows()); }
    std::size_t n_items() const { return static_cast<std::size_t>(item_factors.cols()); }
};

struct AlsConfig {
    std::size_t rank = 3;
    double lambda = 0.1;
    std::size_t iterations = 20;
};

struct FunkConfig {
    std::size_t rank = 3;
    double eta = 1e-3;
    double alpha = 5e-3;  // L2 weight on user rows
    double beta = 5e-3;   // L2 weight on item columns
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    double init_scale = 0.1;
};

inline constexpr std::size_t kDefaultSvdRank = 5;

// Column-normalizes, imputes unobserved cells with 0 and keeps the top-k
// singular triplets; sqrt(sigma) is folded into both factor matrices.
FactorModel svd_baseline(const RatingMatrix& m, std::size_t k = kDefaultSvdRank);

// Objective value per half-step: entry 0 is the SVD initialization, then one
// value after each user solve and one after each item solve.
struct AlsTrace {
    std::vector<double> objective;
};

FactorModel als_train(const RatingMatrix& m, const AlsConfig& cfg, AlsTrace* trace = nullptr);

// Masked ALS objective on normalized values:
//   sum_obs (a_ui - U_u . V_i)^2 + lambda (|U|_F^2 + |V|_F^2)
double als_objective(const RatingMatrix& normalized, const FactorModel& model, double lambda);

// Training RMSE in rating scale after each epoch (index 0 = initialization).
struct FunkTrace {
    std::vector<double> train_rmse;
};

FactorModel funksvd_train(const RatingMatrix& m, const FunkConfig& cfg, FunkTrace* trace = nullptr);

// Per-entry FunkSVD loss 1/2 e^2 + alpha/2 |u|^2 + beta/2 |v|^2 with
// e = target - u.v, and its gradients. One SGD step moves u and v by -eta
// times these gradients.
double funk_entry_loss(std::span<const double> u, std::span<const double> v, double target,
                       double alpha, double beta);
void funk_entry_gradient(std::span<const double> u, std::span<const double> v, double target,
                         double alpha, double beta, std::span<double> grad_u,
                         std::span<double> grad_v);

// Denormalized dot product, unclipped. Throws KeyError for bad indices.
double predict_rating(const FactorModel& model, std::size_t user, std::size_t item);
std::vector<double> predict_ratings(const FactorModel& model, std::span<const UserItem> pairs);

// Versioned binary dump; round-trips bit-exactly.
void save_factor_model(const FactorModel& model, std::ostream& out);
FactorModel load_factor_model(std::istream& in);
void save_factor_model(const FactorModel& model, const std::filesystem::path& path);
FactorModel load_factor_model(const std::filesystem::path& path);

}  // namespace cfblend
