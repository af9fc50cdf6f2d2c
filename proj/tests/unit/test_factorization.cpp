#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cfblend/errors.hpp"
#include "cfblend/factorization.hpp"
#include "oracle_setups.hpp"
#include "synthetic.hpp"

using namespace cfblend;

namespace {

// Frozen from tests/calibration (seeds 1..5): worst case x2.
constexpr double kAlsRank2Bound = 0.3734;
constexpr double kFunkRank1GapBound = 0.0732;

Eigen::MatrixXd random_dense(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(1.0, 5.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = unif(rng);
    return m;
}

double reconstruction_rmse(const FactorModel& model, const RatingMatrix& m) {
    return rmse(predict_ratings(model, m.pairs()), m.values());
}

// Column z-scored dense matrix, the space in which factors live.
Eigen::MatrixXd zscore_columns(const Eigen::MatrixXd& a) {
    Eigen::MatrixXd z = a;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double mean = a.col(j).mean();
        const double sd = std::max(std::sqrt((a.col(j).array() - mean).square().mean()), kMinColumnStd);
        z.col(j) = (a.col(j).array() - mean) / sd;
    }
    return z;
}

}  // namespace

TEST_CASE("svd reconstructs rank-1 and full-rank matrices") {
    Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(12, 0.5, 2.0);
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(9, 1.0, 2.5);
    const auto rank1 = testdata::dense(u * v.transpose());
    CHECK(reconstruction_rmse(svd_baseline(rank1, 1), rank1) < 1e-8);

    const auto full = testdata::dense(random_dense(20, 15, 4));
    CHECK(reconstruction_rmse(svd_baseline(full, 15), full) < 1e-6);
    CHECK(kDefaultSvdRank == 5);
}

TEST_CASE("svd matches a truncated singular value decomposition") {
    const Eigen::MatrixXd a = random_dense(14, 9, 11);
    const auto m = testdata::dense(a);
    const Eigen::MatrixXd z = zscore_columns(a);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    for (Eigen::Index k : {1, 3, 6}) {
        const Eigen::MatrixXd best = svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal() *
                                     svd.matrixV().leftCols(k).transpose();
        const auto model = svd_baseline(m, static_cast<std::size_t>(k));
        const Eigen::MatrixXd got = model.user_factors * model.item_factors;
        CHECK((got - best).cwiseAbs().maxCoeff() < 1e-9);
        // sqrt(sigma) split: both factor sides carry the same column norms.
        for (Eigen::Index f = 0; f < k; ++f) {
            CHECK(model.user_factors.col(f).norm() == doctest::Approx(model.item_factors.row(f).norm()).epsilon(1e-9));
        }
    }
}

TEST_CASE("svd reconstruction error is non-increasing in k") {
    testdata::LowRankSpec spec;
    spec.users = 30;
    spec.items = 25;
    spec.density = 0.4;
    spec.noise = 0.5;
    const auto m = testdata::low_rank(spec);
    // Error on the imputed normalized matrix, which the truncation minimizes.
    const auto norm = normalize(m);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(30, 25);
    for (const auto& e : norm.matrix.entries()) a(static_cast<Eigen::Index>(e.user), static_cast<Eigen::Index>(e.item)) = e.value;
    double previous = INFINITY;
    for (std::size_t k = 1; k <= 25; ++k) {
        const auto model = svd_baseline(m, k);
        const double err = (a - model.user_factors * model.item_factors).norm();
        CHECK(err <= previous + 1e-9);
        previous = err;
    }
    CHECK_THROWS_AS(svd_baseline(m, 0), ConfigError);
    CHECK_THROWS_AS(svd_baseline(m, 26), ConfigError);
}

TEST_CASE("als objective is non-increasing per half-step") {
    testdata::LowRankSpec spec;
    spec.noise = 0.3;
    const auto m = testdata::low_rank(spec);
    AlsTrace trace;
    const auto model = als_train(m, {3, 0.1, 20}, &trace);
    REQUIRE(trace.objective.size() == 41);
    for (std::size_t s = 1; s < trace.objective.size(); ++s) {
        CHECK(trace.objective[s] <= trace.objective[s - 1] * (1.0 + 1e-9));
    }
    const auto norm = normalize(m);
    CHECK(als_objective(norm.matrix, model, 0.1) == doctest::Approx(trace.objective.back()).epsilon(1e-12));
}

TEST_CASE("als objective matches a direct evaluation") {
    const RatingMatrix a(2, 2, {{0, 0, 1.0}, {1, 1, -1.0}}, RatingBounds::unbounded);
    FactorModel model;
    model.user_factors = Eigen::MatrixXd::Ones(2, 1);
    model.item_factors = Eigen::MatrixXd::Constant(1, 2, 0.5);
    // residuals 0.5 and -1.5; norms 2 and 0.5
    CHECK(als_objective(a, model, 0.1) == doctest::Approx(0.25 + 2.25 + 0.1 * 2.5));
}

TEST_CASE("unregularized full-rank als fits a fully observed matrix") {
    const auto m = testdata::dense(random_dense(20, 15, 9));
    const auto model = als_train(m, {15, 0.0, 20});
    CHECK(reconstruction_rmse(model, m) < 1e-6);
}

TEST_CASE("unregularized als reports singular systems") {
    // User 2 has a single rating, too few for rank 2 without regularization.
    const RatingMatrix m(3, 3, {{0, 0, 1.0}, {0, 1, 2.0}, {0, 2, 3.0}, {1, 0, 5.0}, {1, 1, 3.0}, {1, 2, 4.0},
                                {2, 0, 2.0}});
    CHECK_THROWS_AS(als_train(m, {2, 0.0, 5}), NumericError);
    CHECK_NOTHROW(als_train(m, {2, 0.1, 5}));
    CHECK_THROWS_AS(als_train(m, {2, -1.0, 5}), ConfigError);
}

TEST_CASE("als recovers noise-free rank-2 data") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(seed);
        CHECK(setups::als_rank2_recovery(seed) < kAlsRank2Bound);
    }
}

TEST_CASE("funksvd gradient matches finite differences") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int probe = 0; probe < 50; ++probe) {
        std::vector<double> u(4);
        std::vector<double> v(4);
        for (auto& x : u) x = gauss(rng);
        for (auto& x : v) x = gauss(rng);
        const double target = gauss(rng);
        const double alpha = probe % 2 == 0 ? 0.0 : 0.3;
        const double beta = probe % 2 == 0 ? 0.0 : 0.7;
        std::vector<double> gu(4);
        std::vector<double> gv(4);
        funk_entry_gradient(u, v, target, alpha, beta, gu, gv);
        const double h = 1e-6;
        for (std::size_t f = 0; f < 4; ++f) {
            auto up = u;
            auto down = u;
            up[f] += h;
            down[f] -= h;
            const double num_u = (funk_entry_loss(up, v, target, alpha, beta) - funk_entry_loss(down, v, target, alpha, beta)) / (2 * h);
            CHECK(gu[f] == doctest::Approx(num_u).epsilon(1e-5).scale(1.0));
            auto vp = v;
            auto vm = v;
            vp[f] += h;
            vm[f] -= h;
            const double num_v = (funk_entry_loss(u, vp, target, alpha, beta) - funk_entry_loss(u, vm, target, alpha, beta)) / (2 * h);
            CHECK(gv[f] == doctest::Approx(num_v).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("funksvd descends monotonically towards the rank-1 optimum") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(seed);
        const auto trace = setups::funk_rank1_trace(seed);
        for (std::size_t e = 10; e < trace.size(); e += 10) CHECK(trace[e] <= trace[e - 10]);
        CHECK(trace.back() - setups::rank1_floor(seed) < kFunkRank1GapBound);
    }
}

TEST_CASE("funksvd with zero epochs keeps its seeded initialization") {
    const auto m = testdata::low_rank({});
    FunkConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 3;
    FunkTrace trace;
    const auto a = funksvd_train(m, cfg, &trace);
    const auto b = funksvd_train(m, cfg);
    CHECK(trace.train_rmse.size() == 1);
    CHECK(a.user_factors == b.user_factors);
    CHECK(a.item_factors == b.item_factors);
    CHECK(a.user_factors.cwiseAbs().maxCoeff() < 10 * cfg.init_scale);

    cfg.seed = 4;
    CHECK(funksvd_train(m, cfg).user_factors != a.user_factors);

    cfg.epochs = 5;
    cfg.eta = 0.0;
    CHECK_THROWS_AS(funksvd_train(m, cfg), ConfigError);
}

TEST_CASE("funksvd divergence is reported") {
    const auto m = testdata::low_rank({});
    FunkConfig cfg;
    cfg.eta = 50.0;
    cfg.epochs = 50;
    CHECK_THROWS_AS(funksvd_train(m, cfg), NumericError);
}

TEST_CASE("trainers are deterministic") {
    testdata::LowRankSpec spec;
    spec.noise = 0.4;
    const auto m = testdata::low_rank(spec);
    CHECK(als_train(m, {3, 0.1, 5}).user_factors == als_train(m, {3, 0.1, 5}).user_factors);
    FunkConfig cfg;
    cfg.epochs = 5;
    CHECK(funksvd_train(m, cfg).item_factors == funksvd_train(m, cfg).item_factors);
}

TEST_CASE("prediction denormalizes the factor dot product") {
    FactorModel model;
    model.user_factors = Eigen::MatrixXd::Constant(1, 1, 2.0);
    model.item_factors = Eigen::MatrixXd::Constant(1, 1, 0.5);
    model.norm = NormalizationState::identity(1);
    CHECK(predict_rating(model, 0, 0) == 1.0);

    model.user_factors = Eigen::MatrixXd::Zero(2, 3);
    model.item_factors = Eigen::MatrixXd::Random(3, 2);
    model.norm.mode = NormalizationMode::column;
    model.norm.column_means = {3.25, 4.0};
    model.norm.column_stds = {0.5, 2.0};
    CHECK(predict_rating(model, 1, 0) == 3.25);
    CHECK(predict_rating(model, 0, 1) == 4.0);
    CHECK_THROWS_AS(predict_rating(model, 2, 0), KeyError);

    model.user_factors = Eigen::MatrixXd::Random(2, 3);
    for (std::size_t u = 0; u < 2; ++u) {
        for (std::size_t i = 0; i < 2; ++i) {
            double dot = 0.0;
            for (Eigen::Index f = 0; f < 3; ++f) dot += model.user_factors(static_cast<Eigen::Index>(u), f) * model.item_factors(f, static_cast<Eigen::Index>(i));
            CHECK(predict_rating(model, u, i) ==
                  doctest::Approx(dot * model.norm.column_stds[i] + model.norm.column_means[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("factor models round-trip bit-exactly") {
    testdata::LowRankSpec spec;
    spec.noise = 0.2;
    const auto m = testdata::low_rank(spec);
    const auto model = als_train(m, {4, 0.1, 3});
    std::stringstream buf;
    save_factor_model(model, buf);
    const auto back = load_factor_model(buf);
    CHECK(back.user_factors == model.user_factors);
    CHECK(back.item_factors == model.item_factors);
    CHECK(back.norm.column_means == model.norm.column_means);
    CHECK(back.norm.column_stds == model.norm.column_stds);
    CHECK(back.norm.global_mean == model.norm.global_mean);
    CHECK(back.norm.mode == model.norm.mode);

    std::stringstream bad("not a model");
    CHECK_THROWS_AS(load_factor_model(bad), IoError);

    std::string bytes;
    {
        std::stringstream again;
        save_factor_model(model, again);
        bytes = again.str();
    }
    std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_factor_model(truncated), IoError);
}
