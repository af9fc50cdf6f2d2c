#include <cmath>
#include <limits>

#include "cfblend/errors.hpp"
#include "cfblend/normal_dist.hpp"

namespace cfblend {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// One-sided tail (lo, inf) with lo > 0, exponential proposal with the
// optimal rate.
double sample_right_tail(double lo, double hi, std::mt19937_64& rng) {
    const double rate = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
    std::exponential_distribution<double> expo(rate);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (;;) {
        const double z = lo + expo(rng);
        const double d = z - rate;
        if (unif(rng) <= std::exp(-0.5 * d * d) && z < hi) return z;
    }
}

double sample_uniform_proposal(double lo, double hi, double peak, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pick(lo, hi);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (;;) {
        const double z = pick(rng);
        if (unif(rng) <= std::exp(0.5 * (peak * peak - z * z))) return z;
    }
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw RangeError("normal_quantile: p must lie in (0,1)");
    double lo = -40.0;
    double hi = 40.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double sample_truncated_normal(double lo, double hi, std::mt19937_64& rng) {
    if (!(lo < hi)) throw RangeError("truncated normal: empty interval");
    const double inf = std::numeric_limits<double>::infinity();
    if (lo == -inf && hi == inf) {
        std::normal_distribution<double> n01;
        return n01(rng);
    }
    if (hi <= 0.0) return -sample_truncated_normal(-hi, -lo, rng);

    if (lo > 0.0) {
        if (hi == inf) return sample_right_tail(lo, hi, rng);
        const double tail = normal_sf(lo);
        const double kept = tail > 0.0 ? 1.0 - normal_sf(hi) / tail : 0.0;
        if (kept > 0.3) return sample_right_tail(lo, hi, rng);
        return sample_uniform_proposal(lo, hi, lo, rng);
    }

    // lo <= 0 < hi
    if (hi - lo >= 2.0) {
        std::normal_distribution<double> n01;
        for (;;) {
            const double z = n01(rng);
            if (z > lo && z < hi) return z;
        }
    }
    return sample_uniform_proposal(lo, hi, 0.0, rng);
}

}  // namespace cfblend
