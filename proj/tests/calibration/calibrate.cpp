// Runs every self-oracle experiment over its calibration seeds and prints the
// raw results together with the bound that the tests freeze. Not part of the
// test suite; rerun by hand when a trainer changes.

#include <algorithm>
#include <cstdio>
#include <vector>

#include "cfblend/factorization.hpp"
#include "cfblend/fm.hpp"
#include "cfblend/ratings.hpp"
#include "fm_synthetic.hpp"
#include "oracle_setups.hpp"
#include "synthetic.hpp"

using namespace cfblend;

int main() {
    {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const double v = setups::als_rank2_recovery(seed);
            std::printf("als rank-2 recovery seed %llu: val rmse %.6g\n", static_cast<unsigned long long>(seed), v);
            worst = std::max(worst, v);
        }
        std::printf("als rank-2 recovery: worst %.6g, bound (x2) %.6g\n\n", worst, 2.0 * worst);
    }
    {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto trace = setups::funk_rank1_trace(seed);
            const double floor = setups::rank1_floor(seed);
            std::printf("funksvd rank-1 seed %llu: final train rmse %.6g, floor %.6g, gap %.6g\n",
                        static_cast<unsigned long long>(seed), trace.back(), floor, trace.back() - floor);
            worst = std::max(worst, trace.back() - floor);
        }
        std::printf("funksvd rank-1: worst gap %.6g, bound (x2) %.6g\n\n", worst, 2.0 * worst);
    }
    {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const double v = setups::bfm_recovery_rmse(seed);
            std::printf("bfm recovery seed %llu: held-out rmse %.6g\n", static_cast<unsigned long long>(seed), v);
            worst = std::max(worst, v);
        }
        std::printf("bfm recovery: worst %.6g, bound (+50%%) %.6g\n\n", worst, 1.5 * worst);
    }
    {
        double lowest = 5.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const double v = setups::bfm_all_fives_mean(seed);
            std::printf("ordered probit all-5 seed %llu: mean prediction %.6g\n",
                        static_cast<unsigned long long>(seed), v);
            lowest = std::min(lowest, v);
        }
        std::printf("ordered probit all-5: lowest %.6g\n", lowest);
    }
    return 0;
}
