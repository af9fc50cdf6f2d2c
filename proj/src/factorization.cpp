#include "cfblend/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "cfblend/errors.hpp"

namespace cfblend {

namespace {

constexpr double kSingularRcond = 1e-12;

Eigen::MatrixXd dense_imputed(const RatingMatrix& normalized) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(normalized.n_users()),
                                              static_cast<Eigen::Index>(normalized.n_items()));
    for (const auto& e : normalized.entries()) {
        a(static_cast<Eigen::Index>(e.user), static_cast<Eigen::Index>(e.item)) = e.value;
    }
    return a;
}

FactorModel truncated_factors(const RatingMatrix& normalized, NormalizationState state, std::size_t k) {
    const Eigen::MatrixXd a = dense_imputed(normalized);
    const Eigen::Index rows = a.rows();
    const Eigen::Index cols = a.cols();
    const auto kk = static_cast<Eigen::Index>(k);
    const bool item_gram = cols <= rows;

    // Eigendecomposition of the smaller Gram matrix.
    const Eigen::MatrixXd gram = item_gram ? Eigen::MatrixXd(a.transpose() * a)
                                           : Eigen::MatrixXd(a * a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) {
        throw NumericError("SVD: eigendecomposition of the Gram matrix did not converge");
    }
    const Eigen::VectorXd& evals = eig.eigenvalues();  // ascending
    const Eigen::MatrixXd& evecs = eig.eigenvectors();
    const Eigen::Index n = evals.size();
    const double sigma_max = std::sqrt(std::max(evals(n - 1), 0.0));

    FactorModel model;
    model.norm = std::move(state);
    model.user_factors = Eigen::MatrixXd::Zero(rows, kk);
    model.item_factors = Eigen::MatrixXd::Zero(kk, cols);
    for (Eigen::Index f = 0; f < kk; ++f) {
        const Eigen::Index j = n - 1 - f;
        const double sigma = std::sqrt(std::max(evals(j), 0.0));
        if (sigma <= kSingularRcond * sigma_max || sigma == 0.0) continue;
        const double root = std::sqrt(sigma);
        if (item_gram) {
            const Eigen::VectorXd v = evecs.col(j);
            model.user_factors.col(f) = a * v / root;
            model.item_factors.row(f) = root * v.transpose();
        } else {
            const Eigen::VectorXd u = evecs.col(j);
            model.user_factors.col(f) = root * u;
            model.item_factors.row(f) = (a.transpose() * u / root).transpose();
        }
    }
    return model;
}

void check_rank(const RatingMatrix& m, std::size_t k) {
    const std::size_t limit = std::min(m.n_users(), m.n_items());
    if (k < 1 || k > limit) {
        throw ConfigError("rank " + std::to_string(k) + " outside [1, " + std::to_string(limit) + "]");
    }
}

// Ridge solve for one row of the alternating scheme. `factors` holds the fixed
// side as columns (k x n_other).
template <typename Fixed>
void ridge_solve(const Fixed& factors, std::span<const Cell> profile, double lambda,
                 Eigen::Ref<Eigen::VectorXd> out, const char* what, std::size_t index) {
    const Eigen::Index k = factors.rows();
    Eigen::MatrixXd gram = lambda * Eigen::MatrixXd::Identity(k, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (const auto& c : profile) {
        const auto col = factors.col(static_cast<Eigen::Index>(c.index));
        gram.selfadjointView<Eigen::Lower>().rankUpdate(col);
        rhs += c.value * col;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success || llt.rcond() < kSingularRcond) {
        throw NumericError(std::string("ALS: singular normal equations for ") + what + " " +
                           std::to_string(index) + " (lambda=" + std::to_string(lambda) +
                           "); use lambda > 0");
    }
    out = llt.solve(rhs);
}

double train_rmse_rating_scale(const RatingMatrix& m, const Eigen::MatrixXd& users_t,
                               const Eigen::MatrixXd& items, const NormalizationState& norm) {
    double ss = 0.0;
    for (const auto& e : m.entries()) {
        const auto u = static_cast<Eigen::Index>(e.user);
        const auto i = static_cast<Eigen::Index>(e.item);
        const double pred = norm.denormalize(e.item, users_t.col(u).dot(items.col(i)));
        ss += (pred - e.value) * (pred - e.value);
    }
    return m.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(m.size()));
}

}  // namespace

FactorModel svd_baseline(const RatingMatrix& m, std::size_t k) {
    check_rank(m, k);
    auto normalized = normalize(m, NormalizationMode::column);
    return truncated_factors(normalized.matrix, std::move(normalized.state), k);
}

double als_objective(const RatingMatrix& normalized, const FactorModel& model, double lambda) {
    double data = 0.0;
    for (const auto& e : normalized.entries()) {
        const double pred = model.user_factors.row(static_cast<Eigen::Index>(e.user))
                                .dot(model.item_factors.col(static_cast<Eigen::Index>(e.item)));
        data += (e.value - pred) * (e.value - pred);
    }
    return data + lambda * (model.user_factors.squaredNorm() + model.item_factors.squaredNorm());
}

FactorModel als_train(const RatingMatrix& m, const AlsConfig& cfg, AlsTrace* trace) {
    if (cfg.rank < 1) throw ConfigError("ALS: rank must be >= 1");
    if (!(cfg.lambda >= 0.0)) throw ConfigError("ALS: lambda must be >= 0");
    check_rank(m, cfg.rank);

    auto normalized = normalize(m, NormalizationMode::column);
    const RatingMatrix& a = normalized.matrix;
    FactorModel model = truncated_factors(a, std::move(normalized.state), cfg.rank);

    if (trace) {
        trace->objective.clear();
        trace->objective.push_back(als_objective(a, model, cfg.lambda));
    }

    Eigen::MatrixXd users_t = model.user_factors.transpose();  // k x n_users
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        for (std::size_t u = 0; u < a.n_users(); ++u) {
            ridge_solve(model.item_factors, a.user_profile(u), cfg.lambda,
                        users_t.col(static_cast<Eigen::Index>(u)), "user row", u);
        }
        model.user_factors = users_t.transpose();
        if (trace) trace->objective.push_back(als_objective(a, model, cfg.lambda));

        for (std::size_t i = 0; i < a.n_items(); ++i) {
            ridge_solve(users_t, a.item_profile(i), cfg.lambda,
                        model.item_factors.col(static_cast<Eigen::Index>(i)), "item column", i);
        }
        if (trace) trace->objective.push_back(als_objective(a, model, cfg.lambda));
    }
    return model;
}

double funk_entry_loss(std::span<const double> u, std::span<const double> v, double target,
                       double alpha, double beta) {
    double dot = 0.0;
    double uu = 0.0;
    double vv = 0.0;
    for (std::size_t f = 0; f < u.size(); ++f) {
        dot += u[f] * v[f];
        uu += u[f] * u[f];
        vv += v[f] * v[f];
    }
    const double err = target - dot;
    return 0.5 * err * err + 0.5 * alpha * uu + 0.5 * beta * vv;
}

void funk_entry_gradient(std::span<const double> u, std::span<const double> v, double target,
                         double alpha, double beta, std::span<double> grad_u,
                         std::span<double> grad_v) {
    double dot = 0.0;
    for (std::size_t f = 0; f < u.size(); ++f) dot += u[f] * v[f];
    const double err = target - dot;
    for (std::size_t f = 0; f < u.size(); ++f) {
        grad_u[f] = -err * v[f] + alpha * u[f];
        grad_v[f] = -err * u[f] + beta * v[f];
    }
}

FactorModel funksvd_train(const RatingMatrix& m, const FunkConfig& cfg, FunkTrace* trace) {
    if (cfg.rank < 1) throw ConfigError("FunkSVD: rank must be >= 1");
    if (!(cfg.eta > 0.0)) throw ConfigError("FunkSVD: eta must be > 0");
    if (!(cfg.alpha >= 0.0) || !(cfg.beta >= 0.0)) {
        throw ConfigError("FunkSVD: alpha and beta must be >= 0");
    }

    auto normalized = normalize(m, NormalizationMode::column);
    const RatingMatrix& a = normalized.matrix;
    const auto k = static_cast<Eigen::Index>(cfg.rank);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> init(0.0, cfg.init_scale);
    // Column-per-entity storage keeps each factor vector contiguous.
    Eigen::MatrixXd users_t(k, static_cast<Eigen::Index>(a.n_users()));
    Eigen::MatrixXd items(k, static_cast<Eigen::Index>(a.n_items()));
    for (Eigen::Index c = 0; c < users_t.cols(); ++c)
        for (Eigen::Index f = 0; f < k; ++f) users_t(f, c) = init(rng);
    for (Eigen::Index c = 0; c < items.cols(); ++c)
        for (Eigen::Index f = 0; f < k; ++f) items(f, c) = init(rng);

    if (trace) {
        trace->train_rmse.clear();
        trace->train_rmse.push_back(train_rmse_rating_scale(m, users_t, items, normalized.state));
    }

    const auto entries = a.entries();
    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad_u(cfg.rank);
    std::vector<double> grad_v(cfg.rank);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t idx : order) {
            const auto& e = entries[idx];
            double* u = users_t.col(static_cast<Eigen::Index>(e.user)).data();
            double* v = items.col(static_cast<Eigen::Index>(e.item)).data();
            std::span<double> us(u, cfg.rank);
            std::span<double> vs(v, cfg.rank);
            funk_entry_gradient(us, vs, e.value, cfg.alpha, cfg.beta, grad_u, grad_v);
            for (std::size_t f = 0; f < cfg.rank; ++f) {
                us[f] -= cfg.eta * grad_u[f];
                vs[f] -= cfg.eta * grad_v[f];
            }
        }
        const double epoch_rmse = train_rmse_rating_scale(m, users_t, items, normalized.state);
        if (!std::isfinite(epoch_rmse)) {
            throw NumericError("FunkSVD diverged at epoch " + std::to_string(epoch + 1) +
                               "; try a smaller eta");
        }
        if (trace) trace->train_rmse.push_back(epoch_rmse);
    }

    FactorModel model;
    model.user_factors = users_t.transpose();
    model.item_factors = std::move(items);
    model.norm = std::move(normalized.state);
    return model;
}

double predict_rating(const FactorModel& model, std::size_t user, std::size_t item) {
    if (user >= model.n_users() || item >= model.n_items()) {
        throw KeyError("prediction index (" + std::to_string(user) + ", " + std::to_string(item) +
                       ") out of range");
    }
    const double z = model.user_factors.row(static_cast<Eigen::Index>(user))
                         .dot(model.item_factors.col(static_cast<Eigen::Index>(item)));
    return model.norm.denormalize(item, z);
}

std::vector<double> predict_ratings(const FactorModel& model, std::span<const UserItem> pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(predict_rating(model, p.user, p.item));
    return out;
}

}  // namespace cfblend
