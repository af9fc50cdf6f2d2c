#include <doctest.h>

#include <random>
#include <sstream>
#include <vector>

#include "cfblend/blending.hpp"
#include "cfblend/errors.hpp"
#include "synthetic.hpp"

using namespace cfblend;

namespace {

BlendDataset random_dataset(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    BlendDataset d;
    d.features.resize(n, m);
    d.targets.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        double y = 3.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            d.features(r, j) = 3.0 + gauss(rng);
            y += 0.3 * static_cast<double>(j + 1) * (d.features(r, j) - 3.0);
        }
        d.targets(r) = y + 0.2 * gauss(rng);
    }
    for (Eigen::Index j = 0; j < m; ++j) d.model_names.push_back("m" + std::to_string(j));
    return d;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd a(x.rows(), x.cols() + 1);
    a.col(0).setOnes();
    a.rightCols(x.cols()) = x;
    return a;
}

Eigen::VectorXd fitted(const BlendModel& b, const Eigen::MatrixXd& x) {
    return (x * b.weights).array() + b.intercept;
}

double in_sample_rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
    return std::sqrt((pred - y).squaredNorm() / static_cast<double>(y.size()));
}

}  // namespace

TEST_CASE("ols matches the normal equations") {
    const auto d = random_dataset(200, 4, 3);
    const auto b = fit_blender(d, BlendMethod::ols);
    const Eigen::MatrixXd a = with_intercept(d.features);
    const Eigen::VectorXd beta = (a.transpose() * a).ldlt().solve(a.transpose() * d.targets);
    CHECK(std::abs(b.intercept - beta(0)) <= 1e-8);
    CHECK((b.weights - beta.tail(4)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((fitted(b, d.features) - a * beta).cwiseAbs().maxCoeff() <= 1e-8);

    // Every individual column lies in the model's span.
    const double blended = in_sample_rmse(fitted(b, d.features), d.targets);
    for (Eigen::Index j = 0; j < 4; ++j) {
        CHECK(blended <= in_sample_rmse(d.features.col(j), d.targets) + 1e-12);
    }
}

TEST_CASE("single column equal to the targets") {
    BlendDataset d;
    d.features.resize(6, 1);
    d.features << 1, 2, 3, 4, 5, 2.5;
    d.targets = d.features.col(0);
    d.model_names = {"x"};
    const auto b = fit_blender(d, BlendMethod::ols);
    CHECK(std::abs(b.intercept) <= 1e-8);
    CHECK(std::abs(b.weights(0) - 1.0) <= 1e-8);
    CHECK(in_sample_rmse(fitted(b, d.features), d.targets) <= 1e-8);
}

TEST_CASE("ridge matches its closed form with an unpenalized intercept") {
    const auto d = random_dataset(150, 3, 5);
    for (double alpha : {0.0, 0.01, 1.0, 100.0}) {
        const auto b = fit_blender(d, BlendMethod::ridge, alpha);
        // Penalize every coefficient but the intercept in the augmented system.
        const Eigen::MatrixXd a = with_intercept(d.features);
        Eigen::MatrixXd gram = a.transpose() * a;
        gram.diagonal().tail(3).array() += alpha;
        const Eigen::VectorXd beta = gram.ldlt().solve(a.transpose() * d.targets);
        CHECK(std::abs(b.intercept - beta(0)) <= 1e-8);
        CHECK((b.weights - beta.tail(3)).cwiseAbs().maxCoeff() <= 1e-8);
    }
    double previous = std::numeric_limits<double>::infinity();
    for (double alpha : {0.0, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
        const double norm = fit_blender(d, BlendMethod::ridge, alpha).weights.norm();
        CHECK(norm <= previous);
        previous = norm;
    }
}

TEST_CASE("lasso satisfies its optimality conditions") {
    const auto d = random_dataset(300, 5, 8);
    const double n = 300.0;
    for (double alpha : {0.001, 0.05, 0.3}) {
        const auto b = fit_blender(d, BlendMethod::lasso, alpha);
        const Eigen::VectorXd residual = d.targets - fitted(b, d.features);
        CHECK(std::abs(residual.mean()) <= 1e-9);
        for (Eigen::Index j = 0; j < 5; ++j) {
            const double g = d.features.col(j).dot(residual) / n;
            if (b.weights(j) != 0.0) {
                CHECK(std::abs(g - alpha * (b.weights(j) > 0 ? 1.0 : -1.0)) <= 1e-6);
            } else {
                CHECK(std::abs(g) <= alpha + 1e-6);
            }
        }
    }
    const auto zeroed = fit_blender(d, BlendMethod::lasso, 1e6);
    CHECK(zeroed.weights.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zeroed.intercept == doctest::Approx(d.targets.mean()).epsilon(1e-12));
}

TEST_CASE("rank-deficient ols is rejected") {
    auto d = random_dataset(50, 2, 1);
    d.features.col(1) = 2.0 * d.features.col(0);
    CHECK_THROWS_AS(fit_blender(d, BlendMethod::ols), NumericError);
    CHECK_NOTHROW(fit_blender(d, BlendMethod::ridge, kRidgeAlpha));

    auto constant = random_dataset(50, 1, 1);
    constant.features.setConstant(3.0);
    CHECK_THROWS_AS(fit_blender(constant, BlendMethod::ols), NumericError);
}

TEST_CASE("shape and config errors") {
    auto d = random_dataset(3, 3, 1);
    CHECK_THROWS_AS(fit_blender(d, BlendMethod::ols), ShapeError);
    d = random_dataset(20, 2, 1);
    d.targets.resize(10);
    CHECK_THROWS_AS(fit_blender(d, BlendMethod::ols), ShapeError);
    d = random_dataset(20, 2, 1);
    CHECK_THROWS_AS(fit_blender(d, BlendMethod::ridge, -1.0), ConfigError);

    BlendModel b;
    b.weights = Eigen::VectorXd::Constant(2, 0.5);
    const std::vector<double> three{1, 2, 3};
    CHECK_THROWS_AS(blend_predict(b, three), ShapeError);
    CHECK_THROWS_AS(blend_predict(b, Eigen::MatrixXd::Zero(4, 3)), ShapeError);
}

TEST_CASE("blend prediction examples") {
    BlendModel b;
    b.weights = Eigen::VectorXd::Constant(2, 0.5);
    CHECK(blend_predict(b, std::vector<double>{3, 4}) == 3.5);

    BlendModel one;
    one.weights = Eigen::VectorXd::Ones(1);
    for (double x : {-2.0, 1.0, 4.25, 7.0}) CHECK(blend_predict(one, std::vector<double>{x}) == x);

    BlendModel flat;
    flat.intercept = 3.2;
    flat.weights = Eigen::VectorXd::Zero(3);
    CHECK(blend_predict(flat, std::vector<double>{1, 5, 9}) == 3.2);

    // No clipping at this stage.
    CHECK(blend_predict(one, std::vector<double>{6.5}) == 6.5);
}

TEST_CASE("fit then predict reproduces fitted values") {
    const auto d = random_dataset(120, 3, 2);
    for (auto method : {BlendMethod::ols, BlendMethod::ridge}) {
        const auto b = fit_blender(d, method, method == BlendMethod::ridge ? kRidgeAlpha : 0.0);
        const auto rows = blend_predict(b, d.features);
        const Eigen::VectorXd expected = fitted(b, d.features);
        for (Eigen::Index r = 0; r < d.features.rows(); ++r) {
            std::vector<double> one_row(3);
            for (Eigen::Index j = 0; j < 3; ++j) one_row[static_cast<std::size_t>(j)] = d.features(r, j);
            CHECK(std::abs(blend_predict(b, one_row) - expected(r)) <= 1e-8);
            CHECK(std::abs(rows[static_cast<std::size_t>(r)] - expected(r)) <= 1e-8);
        }
    }
}

TEST_CASE("blend dataset assembly") {
    const auto m = testdata::random_integer(40, 30, 0.4, 6);
    const std::vector<BaseModel> models{
        {"three", [](const RatingMatrix&, std::span<const UserItem> q) { return std::vector<double>(q.size(), 3.0); }},
        {"item-index",
         [](const RatingMatrix&, std::span<const UserItem> q) {
             std::vector<double> out;
             for (const auto& p : q) out.push_back(1.0 + static_cast<double>(p.item) / 10.0);
             return out;
         }},
        {"train-size",
         [](const RatingMatrix& train, std::span<const UserItem> q) {
             return std::vector<double>(q.size(), static_cast<double>(train.size()));
         }},
    };
    const auto a = make_blend_dataset(m, models, kBlendSplitFraction, 11);
    const auto b = make_blend_dataset(m, models, kBlendSplitFraction, 11);
    CHECK(a.models() == 3);
    CHECK(a.model_names == std::vector<std::string>{"three", "item-index", "train-size"});
    CHECK(a.features == b.features);
    CHECK(a.targets == b.targets);
    CHECK(a.pairs == b.pairs);

    const auto split = split_ratings(m, 0.8, 11);
    CHECK(a.rows() == split.validation.size());
    CHECK(a.features(0, 2) == static_cast<double>(split.train.size()));
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto& p = a.pairs[r];
        CHECK(a.features(static_cast<Eigen::Index>(r), 1) == 1.0 + static_cast<double>(p.item) / 10.0);
        CHECK(a.targets(static_cast<Eigen::Index>(r)) == split.validation.at(p.user, p.item));
    }

    const auto c = make_blend_dataset(m, models, kBlendSplitFraction, 12);
    CHECK(c.pairs != a.pairs);

    CHECK(kBlendSplitFraction == 0.8);
    CHECK(kRidgeAlpha == 0.01);
    CHECK(kLassoAlpha == 0.001);
}

TEST_CASE("blend dataset errors carry the model name") {
    const auto m = testdata::random_integer(10, 8, 0.5, 1);
    const std::vector<BaseModel> models{
        {"broken", [](const RatingMatrix&, std::span<const UserItem>) -> std::vector<double> {
             throw NumericError("diverged");
         }}};
    try {
        make_blend_dataset(m, models);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("broken") != std::string::npos);
        CHECK(std::string(e.what()).find("diverged") != std::string::npos);
    }
    CHECK_THROWS_AS(make_blend_dataset(m, std::vector<BaseModel>{}), ConfigError);
}

TEST_CASE("blend dataset csv") {
    BlendDataset d;
    d.features.resize(2, 2);
    d.features << 3.5, 4, 1, 2.25;
    d.targets.resize(2);
    d.targets << 4, 1;
    d.model_names = {"a", "b"};
    std::ostringstream out;
    write_blend_dataset(d, out);
    CHECK(out.str() == "a,b,target\n3.5,4,4\n1,2.25,1\n");
}

TEST_CASE("method names") {
    CHECK(parse_blend_method("ols") == BlendMethod::ols);
    CHECK(parse_blend_method("ridge") == BlendMethod::ridge);
    CHECK(parse_blend_method("lasso") == BlendMethod::lasso);
    CHECK_THROWS_AS(parse_blend_method("xgboost"), ConfigError);
    CHECK(to_string(BlendMethod::lasso) == "lasso");
}
