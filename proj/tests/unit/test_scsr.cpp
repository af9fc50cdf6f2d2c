#include <doctest.h>

#include <cmath>
#include <random>

#include "cfblend/errors.hpp"
#include "cfblend/scsr.hpp"
#include "cfblend/similarity.hpp"
#include "synthetic.hpp"

using namespace cfblend;

namespace {

// Dense, loop-for-loop reading of one reinforcement step over full profiles.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> brute_force_step(const RatingMatrix& m, const Eigen::MatrixXd& U,
                                                             const Eigen::MatrixXd& V, double alpha) {
    const auto nu = static_cast<Eigen::Index>(m.n_users());
    const auto ni = static_cast<Eigen::Index>(m.n_items());
    Eigen::MatrixXd r = Eigen::MatrixXd::Constant(nu, ni, -1.0);
    for (const auto& e : m.entries()) r(static_cast<Eigen::Index>(e.user), static_cast<Eigen::Index>(e.item)) = (e.value - 1.0) / 4.0;

    Eigen::MatrixXd U2 = U;
    for (Eigen::Index a = 0; a < nu; ++a) {
        for (Eigen::Index b = a + 1; b < nu; ++b) {
            double num = 0.0;
            double den = 0.0;
            for (Eigen::Index p = 0; p < ni; ++p) {
                if (r(a, p) < 0) continue;
                for (Eigen::Index q = 0; q < ni; ++q) {
                    if (r(b, q) < 0) continue;
                    const double w = 1.0 - 2.0 * std::abs(r(a, p) - r(b, q));
                    num += w * V(p, q);
                    den += std::abs(w);
                }
            }
            if (den > 0) U2(a, b) = U2(b, a) = (1 - alpha) * U(a, b) + alpha * num / den;
        }
    }
    Eigen::MatrixXd V2 = V;
    for (Eigen::Index k = 0; k < ni; ++k) {
        for (Eigen::Index l = k + 1; l < ni; ++l) {
            double num = 0.0;
            double den = 0.0;
            for (Eigen::Index c = 0; c < nu; ++c) {
                if (r(c, k) < 0) continue;
                for (Eigen::Index d = 0; d < nu; ++d) {
                    if (r(d, l) < 0) continue;
                    const double w = 1.0 - 2.0 * std::abs(r(c, k) - r(d, l));
                    num += w * U(c, d);
                    den += std::abs(w);
                }
            }
            if (den > 0) V2(k, l) = V2(l, k) = (1 - alpha) * V(k, l) + alpha * num / den;
        }
    }
    return {U2, V2};
}

Eigen::MatrixXd random_similarity(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::MatrixXd s(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        s(a, a) = 1.0;
        for (Eigen::Index b = a + 1; b < n; ++b) s(a, b) = s(b, a) = unif(rng);
    }
    return s;
}

std::size_t max_profile(const RatingMatrix& m) {
    std::size_t out = 0;
    for (std::size_t u = 0; u < m.n_users(); ++u) out = std::max(out, m.user_profile(u).size());
    for (std::size_t i = 0; i < m.n_items(); ++i) out = std::max(out, m.item_profile(i).size());
    return out;
}

}  // namespace

TEST_CASE("pair weight") {
    CHECK(pair_weight(0.25, 0.25) == 1.0);
    CHECK(pair_weight(0.0, 0.5) == 0.0);
    CHECK(pair_weight(0.0, 1.0) == -1.0);
    CHECK(unit_rating(1.0) == 0.0);
    CHECK(unit_rating(5.0) == 1.0);
    CHECK(unit_rating(3.0) == 0.5);
}

TEST_CASE("reference step equals a brute-force re-implementation") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto m = testdata::random_integer(8, 6, 0.5, seed);
        const auto U = random_similarity(8, seed + 10);
        const auto V = random_similarity(6, seed + 20);
        for (double alpha : {0.0, 0.3, 1.0}) {
            const auto got = csr_update_reference(m, U, V, alpha);
            const auto [U2, V2] = brute_force_step(m, U, V, alpha);
            CHECK((got.user_sim - U2).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK((got.item_sim - V2).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("reference step on a single common pair") {
    // Both users rated only item 0, with equal ratings: w = 1, counterpart V[0,0] = 1.
    const RatingMatrix m(2, 2, {{0, 0, 4.0}, {1, 0, 4.0}});
    Eigen::MatrixXd U = Eigen::MatrixXd::Identity(2, 2);
    U(0, 1) = U(1, 0) = 0.2;
    const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(2, 2);
    const auto out = csr_update_reference(m, U, V, 0.5);
    CHECK(out.user_sim(0, 1) == doctest::Approx(0.5 * 0.2 + 0.5));
    CHECK(out.user_sim(1, 0) == out.user_sim(0, 1));
    // Item 1 has no raters: the pair keeps its old value.
    CHECK(out.item_sim(0, 1) == 0.0);
    CHECK(out.user_sim(0, 0) == 1.0);
}

TEST_CASE("zero damping converges immediately") {
    const auto m = testdata::random_integer(10, 7, 0.5, 4);
    const auto U = random_similarity(10, 1);
    const auto V = random_similarity(7, 2);
    ScsrConfig cfg;
    cfg.alpha = 0.0;
    const auto out = scsr_train(m, U, V, cfg);
    CHECK(out.iterations_run == 1);
    CHECK(out.converged);
    CHECK(out.user_sim == U);
    CHECK(out.item_sim == V);
}

TEST_CASE("full-coverage sampling reproduces the reference iterate for iterate") {
    const auto m = testdata::random_integer(8, 6, 0.5, 9);
    const auto U0 = random_similarity(8, 3);
    const auto V0 = random_similarity(6, 4);
    Eigen::MatrixXd U = U0;
    Eigen::MatrixXd V = V0;
    for (std::size_t it = 1; it <= 6; ++it) {
        const auto ref = csr_update_reference(m, U, V, 0.5);
        U = ref.user_sim;
        V = ref.item_sim;
        ScsrConfig cfg;
        cfg.sigma = max_profile(m);
        cfg.max_iter = it;
        cfg.epsilon = 1e-300;
        cfg.seed = 99;
        const auto out = scsr_train(m, U0, V0, cfg);
        CHECK(out.iterations_run == it);
        CHECK((out.user_sim - U).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((out.item_sim - V).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("sampled updates are deterministic, symmetric and bounded") {
    const auto m = testdata::random_integer(30, 25, 0.6, 5);
    SimilarityConfig sc;
    sc.axis = SimilarityAxis::user;
    const auto U0 = apply_weighting(compute_similarity(m, sc), sc).values;
    sc.axis = SimilarityAxis::item;
    sc.beta = kItemSignificanceBeta;
    const auto V0 = apply_weighting(compute_similarity(m, sc), sc).values;
    ScsrConfig cfg;
    cfg.sigma = 4;
    cfg.max_iter = 3;
    cfg.seed = 17;
    const auto a = scsr_train(m, U0, V0, cfg);
    const auto b = scsr_train(m, U0, V0, cfg);
    CHECK(a.user_sim == b.user_sim);
    CHECK(a.item_sim == b.item_sim);
    CHECK((a.user_sim - a.user_sim.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.item_sim - a.item_sim.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.user_sim.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(a.item_sim.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(a.user_sim.diagonal() == U0.diagonal());

    cfg.seed = 18;
    const auto c = scsr_train(m, U0, V0, cfg);
    CHECK(c.user_sim != a.user_sim);

    // A small sample genuinely differs from the full reference.
    const auto ref = csr_update_reference(m, U0, V0, cfg.alpha);
    cfg.max_iter = 1;
    const auto one = scsr_train(m, U0, V0, cfg);
    CHECK((one.user_sim - ref.user_sim).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("configuration and shape checks") {
    const auto m = testdata::random_integer(5, 4, 0.7, 1);
    const auto U = random_similarity(5, 1);
    const auto V = random_similarity(4, 1);
    ScsrConfig cfg;
    cfg.sigma = 0;
    CHECK_THROWS_AS(scsr_train(m, U, V, cfg), ConfigError);
    cfg = {};
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(scsr_train(m, U, V, cfg), ConfigError);
    cfg = {};
    CHECK_THROWS_AS(scsr_train(m, V, U, cfg), ShapeError);
    CHECK(ScsrConfig{}.sigma == 15);
    CHECK(ScsrConfig{}.max_iter == 15);
    CHECK(ScsrConfig{}.alpha == 0.5);
}
