#pragma once

#include <random>

namespace cfblend {

double normal_cdf(double x);
// Upper tail 1 - cdf(x), accurate for large x.
double normal_sf(double x);
double normal_quantile(double p);

// Standard normal restricted to (lo, hi); either bound may be infinite.
// Uses exponential-proposal rejection in the tails and uniform rejection
// for narrow intervals.
double sample_truncated_normal(double lo, double hi, std::mt19937_64& rng);

}  // namespace cfblend
