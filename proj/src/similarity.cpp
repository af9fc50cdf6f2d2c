#include "cfblend/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cfblend/errors.hpp"

namespace cfblend {

void SimilarityConfig::validate() const {
    if (beta < 1) throw ConfigError("similarity: beta must be >= 1");
    if (measure == SimilarityMeasure::sigra && weighting != SimilarityWeighting::none) {
        throw ConfigError("similarity: SiGra already attenuates small overlaps; use weighting=none");
    }
    if (!(user_weight >= 0.0 && user_weight <= 1.0)) {
        throw ConfigError("similarity: user_weight must lie in [0,1]");
    }
    if (k_neighbors == 0) throw ConfigError("similarity: k_neighbors must be >= 1");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    const double denom = std::sqrt(aa) * std::sqrt(bb);
    if (denom == 0.0) return 0.0;
    return std::clamp(dot / denom, -1.0, 1.0);
}

double pcc_similarity(std::span<const double> a, std::span<const double> b, double mean_a, double mean_b) {
    double dot = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double da = a[k] - mean_a;
        const double db = b[k] - mean_b;
        dot += da * db;
        aa += da * da;
        bb += db * db;
    }
    const double denom = std::sqrt(aa) * std::sqrt(bb);
    if (denom == 0.0) return 0.0;
    return std::clamp(dot / denom, -1.0, 1.0);
}

double sigra_similarity(std::span<const double> a, std::span<const double> b, std::size_t size_a,
                        std::size_t size_b) {
    const std::size_t overlap = a.size();
    if (overlap == 0) return 0.0;
    double ratio_sum = 0.0;
    for (std::size_t k = 0; k < overlap; ++k) {
        const double hi = std::max(a[k], b[k]);
        ratio_sum += hi > 0.0 ? std::min(a[k], b[k]) / hi : 0.0;
    }
    const double n = static_cast<double>(overlap);
    const double attenuation =
        1.0 / (1.0 + std::exp(-static_cast<double>(size_a + size_b) / (2.0 * n)));
    return attenuation * ratio_sum / n;
}

double similarity_weight(SimilarityWeighting weighting, std::size_t overlap, std::size_t size_a,
                         std::size_t size_b, std::size_t beta) {
    switch (weighting) {
        case SimilarityWeighting::none:
            return 1.0;
        case SimilarityWeighting::normal:
            if (size_a + size_b == 0) return 0.0;
            return 2.0 * static_cast<double>(overlap) / static_cast<double>(size_a + size_b);
        case SimilarityWeighting::significance:
            return static_cast<double>(std::min(overlap, beta)) / static_cast<double>(beta);
        case SimilarityWeighting::sigmoid:
            return 1.0 / (1.0 + std::exp(-static_cast<double>(overlap) / 2.0));
    }
    return 1.0;
}

namespace {

std::span<const Cell> profile_of(const RatingMatrix& m, SimilarityAxis axis, std::size_t a) {
    return axis == SimilarityAxis::user ? m.user_profile(a) : m.item_profile(a);
}

double mean_of(const RatingMatrix& m, SimilarityAxis axis, std::size_t a) {
    return axis == SimilarityAxis::user ? m.user_mean(a) : m.item_mean(a);
}

}  // namespace

SimilarityMatrix compute_similarity(const RatingMatrix& m, const SimilarityConfig& cfg) {
    cfg.validate();
    if (cfg.axis == SimilarityAxis::both) {
        throw ConfigError("compute_similarity: axis must be user or item");
    }
    const std::size_t n = cfg.axis == SimilarityAxis::user ? m.n_users() : m.n_items();
    const auto nn = static_cast<Eigen::Index>(n);

    SimilarityMatrix s;
    s.axis = cfg.axis;
    s.measure = cfg.measure;
    s.values = Eigen::MatrixXd::Zero(nn, nn);
    s.overlap.setZero(nn, nn);
    s.profile_sizes.resize(n);
    for (std::size_t a = 0; a < n; ++a) s.profile_sizes[a] = profile_of(m, cfg.axis, a).size();

    std::vector<double> xa;
    std::vector<double> xb;
    for (std::size_t a = 0; a < n; ++a) {
        const auto pa = profile_of(m, cfg.axis, a);
        const auto ia = static_cast<Eigen::Index>(a);
        if (!pa.empty()) {
            s.values(ia, ia) = 1.0;
            s.overlap(ia, ia) = static_cast<std::uint32_t>(pa.size());
        }
        for (std::size_t b = a + 1; b < n; ++b) {
            const auto pb = profile_of(m, cfg.axis, b);
            xa.clear();
            xb.clear();
            for (std::size_t p = 0, q = 0; p < pa.size() && q < pb.size();) {
                if (pa[p].index < pb[q].index) {
                    ++p;
                } else if (pb[q].index < pa[p].index) {
                    ++q;
                } else {
                    xa.push_back(pa[p++].value);
                    xb.push_back(pb[q++].value);
                }
            }
            if (xa.empty()) continue;
            double sim = 0.0;
            switch (cfg.measure) {
                case SimilarityMeasure::cosine:
                    sim = cosine_similarity(xa, xb);
                    break;
                case SimilarityMeasure::pcc:
                    sim = pcc_similarity(xa, xb, mean_of(m, cfg.axis, a), mean_of(m, cfg.axis, b));
                    break;
                case SimilarityMeasure::sigra:
                    sim = sigra_similarity(xa, xb, pa.size(), pb.size());
                    break;
            }
            const auto ib = static_cast<Eigen::Index>(b);
            s.values(ia, ib) = s.values(ib, ia) = sim;
            s.overlap(ia, ib) = s.overlap(ib, ia) = static_cast<std::uint32_t>(xa.size());
        }
    }
    return s;
}

SimilarityMatrix apply_weighting(SimilarityMatrix s, const SimilarityConfig& cfg) {
    cfg.validate();
    if (cfg.weighting == SimilarityWeighting::none) return s;
    if (s.measure == SimilarityMeasure::sigra) {
        throw ConfigError("apply_weighting: SiGra similarities take no extra weighting");
    }
    const auto n = static_cast<Eigen::Index>(s.size());
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const double w = similarity_weight(cfg.weighting, s.overlap(a, b),
                                               s.profile_sizes[static_cast<std::size_t>(a)],
                                               s.profile_sizes[static_cast<std::size_t>(b)], cfg.beta);
            s.values(a, b) *= w;
            s.values(b, a) = s.values(a, b);
        }
    }
    return s;
}

double predict_knn(const RatingMatrix& m, const SimilarityMatrix& s, std::size_t user, std::size_t item,
                   std::size_t k) {
    if (s.axis == SimilarityAxis::both) throw ConfigError("predict_knn: matrix must be user or item axis");
    if (user >= m.n_users() || item >= m.n_items()) {
        throw KeyError("predict_knn: (" + std::to_string(user) + ", " + std::to_string(item) + ") out of range");
    }
    const bool by_user = s.axis == SimilarityAxis::user;
    const std::size_t target = by_user ? user : item;
    const std::size_t expected = by_user ? m.n_users() : m.n_items();
    if (s.size() != expected) throw ShapeError("predict_knn: similarity matrix does not match ratings");

    // Candidates: entities on the same axis that rated the counterpart.
    const auto candidates = by_user ? m.item_profile(item) : m.user_profile(user);
    const auto t = static_cast<Eigen::Index>(target);

    struct Neighbor {
        double sim;
        std::size_t index;
        double deviation;
    };
    std::vector<Neighbor> neighbors;
    neighbors.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.index == target) continue;
        const auto ci = static_cast<Eigen::Index>(c.index);
        if (!s.dense_support && s.overlap(t, ci) == 0) continue;
        const double mean = by_user ? m.user_mean(c.index) : m.item_mean(c.index);
        neighbors.push_back({s.values(t, ci), c.index, c.value - mean});
    }
    const auto closer = [](const Neighbor& a, const Neighbor& b) {
        return a.sim > b.sim || (a.sim == b.sim && a.index < b.index);
    };
    if (k < neighbors.size()) {
        std::partial_sort(neighbors.begin(), neighbors.begin() + static_cast<std::ptrdiff_t>(k),
                          neighbors.end(), closer);
        neighbors.resize(k);
    }

    const double base = by_user ? m.user_mean(user) : m.item_mean(item);
    double num = 0.0;
    double den = 0.0;
    for (const auto& nb : neighbors) {
        num += nb.sim * nb.deviation;
        den += std::abs(nb.sim);
    }
    return den > 0.0 ? base + num / den : base;
}

double predict_combined(const RatingMatrix& m, const SimilarityMatrix& user_sim,
                        const SimilarityMatrix& item_sim, std::size_t user, std::size_t item,
                        std::size_t k, double user_weight) {
    if (user_sim.axis != SimilarityAxis::user || item_sim.axis != SimilarityAxis::item) {
        throw ConfigError("predict_combined: expects a user-axis and an item-axis matrix");
    }
    const double from_users = user_weight > 0.0 ? predict_knn(m, user_sim, user, item, k) : 0.0;
    const double from_items = user_weight < 1.0 ? predict_knn(m, item_sim, user, item, k) : 0.0;
    return user_weight * from_users + (1.0 - user_weight) * from_items;
}

}  // namespace cfblend
