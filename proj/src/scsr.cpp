#include "cfblend/scsr.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cfblend/errors.hpp"

namespace cfblend {

namespace {

// Counter-keyed generator so that every pair update owns an independent,
// reproducible stream regardless of visiting order.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t iteration, std::uint64_t half, std::uint64_t a,
                         std::uint64_t b) {
    SplitMix64 mix(seed);
    std::uint64_t key = mix();
    for (std::uint64_t part : {iteration, half, a, b}) {
        SplitMix64 step(key ^ part);
        key = step();
    }
    return key;
}

struct UnitProfile {
    std::vector<std::size_t> index;
    std::vector<double> value;
};

// Profiles on unit-scaled ratings, along users (half 0) or items (half 1).
std::vector<UnitProfile> unit_profiles(const RatingMatrix& m, bool users) {
    const std::size_t n = users ? m.n_users() : m.n_items();
    std::vector<UnitProfile> out(n);
    for (std::size_t a = 0; a < n; ++a) {
        const auto cells = users ? m.user_profile(a) : m.item_profile(a);
        out[a].index.reserve(cells.size());
        out[a].value.reserve(cells.size());
        for (const auto& c : cells) {
            out[a].index.push_back(c.index);
            out[a].value.push_back(unit_rating(c.value));
        }
    }
    return out;
}

void check_square(const Eigen::MatrixXd& s, std::size_t n, const char* what) {
    if (static_cast<std::size_t>(s.rows()) != n || s.rows() != s.cols()) {
        throw ShapeError(std::string(what) + " similarity matrix has the wrong shape");
    }
}

// Positions [0, count) of `slots` hold the chosen profile positions.
void choose(std::size_t profile_size, std::size_t sigma, SplitMix64& rng, std::vector<std::size_t>& slots) {
    slots.resize(profile_size);
    for (std::size_t p = 0; p < profile_size; ++p) slots[p] = p;
    if (profile_size <= sigma) return;
    for (std::size_t p = 0; p < sigma; ++p) {
        std::uniform_int_distribution<std::size_t> pick(p, profile_size - 1);
        std::swap(slots[p], slots[pick(rng)]);
    }
    slots.resize(sigma);
}

// One damped half-step over all pairs of `profiles`, reading `other_prev`.
void reinforce_half(const std::vector<UnitProfile>& profiles, const Eigen::MatrixXd& own_prev,
                    const Eigen::MatrixXd& other_prev, double alpha, std::size_t sigma,
                    std::uint64_t seed, std::uint64_t iteration, std::uint64_t half, Eigen::MatrixXd& next) {
    next = own_prev;
    const std::size_t n = profiles.size();
    std::vector<std::size_t> slots_a;
    std::vector<std::size_t> slots_b;
    for (std::size_t a = 0; a < n; ++a) {
        const auto& pa = profiles[a];
        for (std::size_t b = a + 1; b < n; ++b) {
            const auto& pb = profiles[b];
            SplitMix64 rng(stream_key(seed, iteration, half, a, b));
            choose(pa.index.size(), sigma, rng, slots_a);
            choose(pb.index.size(), sigma, rng, slots_b);

            double num = 0.0;
            double den = 0.0;
            for (std::size_t p : slots_a) {
                const auto row = static_cast<Eigen::Index>(pa.index[p]);
                const double rp = pa.value[p];
                for (std::size_t q : slots_b) {
                    const double w = pair_weight(rp, pb.value[q]);
                    num += w * other_prev(row, static_cast<Eigen::Index>(pb.index[q]));
                    den += std::abs(w);
                }
            }
            if (den == 0.0) continue;
            const auto ia = static_cast<Eigen::Index>(a);
            const auto ib = static_cast<Eigen::Index>(b);
            const double value = (1.0 - alpha) * own_prev(ia, ib) + alpha * num / den;
            next(ia, ib) = value;
            next(ib, ia) = value;
        }
    }
}

}  // namespace

double pair_weight(double r1, double r2) { return 1.0 - 2.0 * std::abs(r1 - r2); }

SimilarityPair csr_update_reference(const RatingMatrix& ratings, const Eigen::MatrixXd& user_prev,
                                    const Eigen::MatrixXd& item_prev, double alpha) {
    check_square(user_prev, ratings.n_users(), "user");
    check_square(item_prev, ratings.n_items(), "item");
    const auto users = unit_profiles(ratings, true);
    const auto items = unit_profiles(ratings, false);

    // Full cross products of both profiles.
    auto full = [alpha](const std::vector<UnitProfile>& profiles, const Eigen::MatrixXd& own,
                        const Eigen::MatrixXd& other) {
        Eigen::MatrixXd next = own;
        const std::size_t n = profiles.size();
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b) {
                double num = 0.0;
                double den = 0.0;
                for (std::size_t p = 0; p < profiles[a].index.size(); ++p) {
                    for (std::size_t q = 0; q < profiles[b].index.size(); ++q) {
                        const double w = pair_weight(profiles[a].value[p], profiles[b].value[q]);
                        num += w * other(static_cast<Eigen::Index>(profiles[a].index[p]),
                                         static_cast<Eigen::Index>(profiles[b].index[q]));
                        den += std::abs(w);
                    }
                }
                if (den == 0.0) continue;
                const auto ia = static_cast<Eigen::Index>(a);
                const auto ib = static_cast<Eigen::Index>(b);
                next(ia, ib) = next(ib, ia) = (1.0 - alpha) * own(ia, ib) + alpha * num / den;
            }
        }
        return next;
    };
    return {full(users, user_prev, item_prev), full(items, item_prev, user_prev)};
}

ReinforcedSimilarities scsr_train(const RatingMatrix& ratings, const Eigen::MatrixXd& user_init,
                                  const Eigen::MatrixXd& item_init, const ScsrConfig& cfg) {
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw ConfigError("SCSR: alpha must lie in [0,1]");
    if (cfg.sigma < 1) throw ConfigError("SCSR: sigma must be >= 1");
    if (!(cfg.epsilon > 0.0)) throw ConfigError("SCSR: epsilon must be > 0");
    check_square(user_init, ratings.n_users(), "user");
    check_square(item_init, ratings.n_items(), "item");

    const auto users = unit_profiles(ratings, true);
    const auto items = unit_profiles(ratings, false);

    ReinforcedSimilarities out;
    out.user_sim = user_init;
    out.item_sim = item_init;
    Eigen::MatrixXd user_next;
    Eigen::MatrixXd item_next;
    for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
        reinforce_half(users, out.user_sim, out.item_sim, cfg.alpha, cfg.sigma, cfg.seed, it, 0, user_next);
        reinforce_half(items, out.item_sim, out.user_sim, cfg.alpha, cfg.sigma, cfg.seed, it, 1, item_next);
        const double du = (user_next - out.user_sim).norm();
        const double dv = (item_next - out.item_sim).norm();
        out.user_sim.swap(user_next);
        out.item_sim.swap(item_next);
        out.iterations_run = it;
        if (!out.user_sim.allFinite() || !out.item_sim.allFinite()) {
            throw NumericError("SCSR: non-finite similarity at iteration " + std::to_string(it));
        }
        if (du < cfg.epsilon && dv < cfg.epsilon) {
            out.converged = true;
            break;
        }
    }
    return out;
}

}  // namespace cfblend
