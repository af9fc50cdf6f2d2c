#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "cfblend/errors.hpp"
#include "cfblend/fm.hpp"
#include "cfblend/normal_dist.hpp"

namespace cfblend {

std::array<double, 5> ordinal_probabilities(double score, const Cutpoints& cutpoints) {
    std::array<double, 5> p{};
    double below = 0.0;  // P(latent <= previous cutpoint)
    for (std::size_t c = 0; c < 4; ++c) {
        const double cdf = normal_cdf(cutpoints[c] - score);
        p[c] = std::max(cdf - below, 0.0);
        below = cdf;
    }
    p[4] = normal_sf(cutpoints[3] - score);
    return p;
}

double ordinal_expectation(std::span<const double, 5> probabilities) {
    double expected = 0.0;
    double total = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
        expected += static_cast<double>(c + 1) * probabilities[c];
        total += probabilities[c];
    }
    return total > 0.0 ? expected / total : 3.0;
}

namespace {

enum class Head { regression, ordered_probit };

constexpr double kInf = std::numeric_limits<double>::infinity();

// log P(lo < score + eps <= hi), eps ~ N(0,1), stable in both tails.
double log_interval_prob(double lo, double hi, double score) {
    const double a = lo - score;
    const double b = hi - score;
    double p;
    if (a > 0.0) {
        p = normal_sf(a) - (b == kInf ? 0.0 : normal_sf(b));
    } else {
        p = (b == kInf ? 1.0 : normal_cdf(b)) - (a == -kInf ? 0.0 : normal_cdf(a));
    }
    return p > 0.0 ? std::log(p) : -kInf;
}

class GibbsSampler {
public:
    GibbsSampler(const FeatureMatrix& train, const BfmConfig& cfg, Head head)
        : train_(train),
          cfg_(cfg),
          head_(head),
          n_rows_(train.rows()),
          n_features_(train.schema().n_features()),
          k_(static_cast<Eigen::Index>(cfg.rank)),
          n_groups_(train.schema().n_blocks()),
          rng_(cfg.seed) {
        if (cfg.rank < 1) throw ConfigError("BFM: rank must be >= 1");
        if (cfg.iterations <= cfg.effective_burn_in()) {
            throw ConfigError("BFM: iterations must exceed burn-in");
        }
        if (n_rows_ == 0) throw ConfigError("BFM: empty training set");
        build_columns();
        init_state();
    }

    BfmResult run(const FeatureMatrix& query) {
        if (query.schema().n_features() != n_features_) {
            throw ShapeError("BFM: query schema differs from training schema");
        }
        BfmResult result;
        std::vector<double> query_sum(query.rows(), 0.0);
        std::vector<double> train_sum(n_rows_, 0.0);
        const std::size_t burn_in = cfg_.effective_burn_in();
        std::size_t accepted = 0;

        for (std::size_t sweep = 0; sweep < cfg_.iterations; ++sweep) {
            if (head_ == Head::regression) {
                sample_noise_precision();
                sample_bias();
            } else {
                accepted += sample_cutpoints() ? 1 : 0;
                sample_latent();
            }
            sample_linear_hyper();
            sample_linear();
            sample_factor_hyper();
            sample_factors();
            check_finite(sweep);

            if (sweep < burn_in) continue;
            for (std::size_t r = 0; r < query.rows(); ++r) {
                query_sum[r] += emit(fm_predict(model_, query.row(r)));
            }
            for (std::size_t r = 0; r < n_rows_; ++r) {
                train_sum[r] += emit(target_[r] - e_(static_cast<Eigen::Index>(r)));
            }
            if (head_ == Head::ordered_probit) result.cutpoint_samples.push_back(cutpoints_);
            ++result.retained_samples;
        }

        const double n = static_cast<double>(result.retained_samples);
        result.query_predictions.resize(query.rows());
        for (std::size_t r = 0; r < query.rows(); ++r) result.query_predictions[r] = query_sum[r] / n;
        result.train_predictions.resize(n_rows_);
        for (std::size_t r = 0; r < n_rows_; ++r) result.train_predictions[r] = train_sum[r] / n;
        result.cutpoint_acceptance =
            head_ == Head::ordered_probit ? static_cast<double>(accepted) / static_cast<double>(cfg_.iterations) : 0.0;
        result.last_sample = model_;
        return result;
    }

private:
    double emit(double score) const {
        if (head_ == Head::regression) return score;
        const auto p = ordinal_probabilities(score, cutpoints_);
        return ordinal_expectation(p);
    }

    void build_columns() {
        col_ptr_.assign(n_features_ + 1, 0);
        for (std::size_t r = 0; r < n_rows_; ++r) {
            for (const auto& x : train_.row(r)) ++col_ptr_[x.index + 1];
        }
        for (std::size_t j = 0; j < n_features_; ++j) col_ptr_[j + 1] += col_ptr_[j];
        col_rows_.resize(train_.nnz());
        col_vals_.resize(train_.nnz());
        std::vector<std::size_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
        for (std::size_t r = 0; r < n_rows_; ++r) {
            for (const auto& x : train_.row(r)) {
                const std::size_t pos = fill[x.index]++;
                col_rows_[pos] = r;
                col_vals_[pos] = x.value;
            }
        }
        group_of_.resize(n_features_);
        group_size_.assign(n_groups_, 0);
        for (std::size_t j = 0; j < n_features_; ++j) {
            group_of_[j] = train_.schema().block_of(j);
            ++group_size_[group_of_[j]];
        }
    }

    void init_state() {
        const auto n = static_cast<Eigen::Index>(n_features_);
        model_.w0 = 0.0;
        model_.w = Eigen::VectorXd::Zero(n);
        model_.V.resize(n, k_);
        std::normal_distribution<double> init(0.0, cfg_.init_stdev);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index f = 0; f < k_; ++f) model_.V(j, f) = init(rng_);

        alpha_ = 1.0;
        lambda_w_.assign(n_groups_, 1.0);
        mu_w_.assign(n_groups_, 0.0);
        lambda_v_ = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n_groups_), k_);
        mu_v_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_groups_), k_);

        const auto rows = static_cast<Eigen::Index>(n_rows_);
        q_.resize(rows, k_);
        e_.resize(rows);
        target_.assign(train_.targets().begin(), train_.targets().end());

        if (head_ == Head::ordered_probit) init_ordinal();

        for (std::size_t r = 0; r < n_rows_; ++r) {
            const auto row = train_.row(r);
            for (Eigen::Index f = 0; f < k_; ++f) {
                double s = 0.0;
                for (const auto& x : row) s += model_.V(static_cast<Eigen::Index>(x.index), f) * x.value;
                q_(static_cast<Eigen::Index>(r), f) = s;
            }
            const double pred = fm_predict(model_, row);
            if (head_ == Head::ordered_probit) {
                const int c = category_[r];
                target_[r] = pred + sample_truncated_normal(lower(c) - pred, upper(c) - pred, rng_);
            }
            e_(static_cast<Eigen::Index>(r)) = target_[r] - pred;
        }
    }

    void init_ordinal() {
        category_.resize(n_rows_);
        std::array<double, 5> counts{};
        for (std::size_t r = 0; r < n_rows_; ++r) {
            const double t = target_[r];
            const double rounded = std::round(t);
            if (rounded != t || t < 1.0 || t > 5.0) {
                throw ConfigError("ordered probit: targets must be integers in 1..5, got " + std::to_string(t));
            }
            category_[r] = static_cast<int>(rounded);
            counts[static_cast<std::size_t>(category_[r] - 1)] += 1.0;
        }
        double cumulative = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            cumulative += counts[c] / static_cast<double>(n_rows_);
            double cut = normal_quantile(std::clamp(cumulative, 0.01, 0.99));
            if (c > 0) cut = std::max(cut, cutpoints_[c - 1] + 0.1);
            cutpoints_[c] = cut;
        }
    }

    double lower(int category) const {
        return category == 1 ? -kInf : cutpoints_[static_cast<std::size_t>(category - 2)];
    }
    double upper(int category) const {
        return category == 5 ? kInf : cutpoints_[static_cast<std::size_t>(category - 1)];
    }

    void sample_noise_precision() {
        const double shape = 0.5 * (cfg_.alpha0 + static_cast<double>(n_rows_));
        const double rate = 0.5 * (cfg_.beta0 + e_.squaredNorm());
        std::gamma_distribution<double> gamma(shape, 1.0 / rate);
        alpha_ = gamma(rng_);
    }

    // Conditional of a parameter theta that enters every prediction linearly as
    // theta * h_n: Normal with precision alpha sum h^2 + lambda.
    double draw_conditional(double precision, double numerator) {
        const double mean = numerator / precision;
        return mean + normal_(rng_) / std::sqrt(precision);
    }

    void sample_bias() {
        const double precision = alpha_ * static_cast<double>(n_rows_) + cfg_.w0_precision;
        const double numerator = alpha_ * (e_.sum() + model_.w0 * static_cast<double>(n_rows_)) +
                                 cfg_.w0_precision * cfg_.mu0;
        const double fresh = draw_conditional(precision, numerator);
        e_.array() -= fresh - model_.w0;
        model_.w0 = fresh;
    }

    // Normal-Gamma update of (mu, lambda) for one parameter group.
    void sample_group_hyper(double sum, double count, const auto& sum_sq_dev, double& mu, double& lambda) {
        const double post_n = count + cfg_.gamma0;
        const double mean = (sum + cfg_.gamma0 * cfg_.mu0) / post_n;
        mu = mean + normal_(rng_) / std::sqrt(post_n * lambda);
        const double shape = 0.5 * (cfg_.alpha_lambda + count + 1.0);
        const double rate =
            0.5 * (cfg_.beta_lambda + sum_sq_dev(mu) + cfg_.gamma0 * (mu - cfg_.mu0) * (mu - cfg_.mu0));
        std::gamma_distribution<double> gamma(shape, 1.0 / rate);
        lambda = gamma(rng_);
    }

    void sample_linear_hyper() {
        std::vector<double> sums(n_groups_, 0.0);
        for (std::size_t j = 0; j < n_features_; ++j) sums[group_of_[j]] += model_.w(static_cast<Eigen::Index>(j));
        for (std::size_t g = 0; g < n_groups_; ++g) {
            auto sq_dev = [&](double mu) {
                double s = 0.0;
                for (std::size_t j = 0; j < n_features_; ++j) {
                    if (group_of_[j] != g) continue;
                    const double d = model_.w(static_cast<Eigen::Index>(j)) - mu;
                    s += d * d;
                }
                return s;
            };
            sample_group_hyper(sums[g], static_cast<double>(group_size_[g]), sq_dev, mu_w_[g], lambda_w_[g]);
        }
    }

    void sample_linear() {
        for (std::size_t j = 0; j < n_features_; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const std::size_t g = group_of_[j];
            const double old = model_.w(jj);
            double hh = 0.0;
            double he = 0.0;
            for (std::size_t p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
                const double h = col_vals_[p];
                hh += h * h;
                he += h * (e_(static_cast<Eigen::Index>(col_rows_[p])) + old * h);
            }
            const double fresh = draw_conditional(alpha_ * hh + lambda_w_[g], alpha_ * he + lambda_w_[g] * mu_w_[g]);
            const double delta = fresh - old;
            for (std::size_t p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
                e_(static_cast<Eigen::Index>(col_rows_[p])) -= delta * col_vals_[p];
            }
            model_.w(jj) = fresh;
        }
    }

    void sample_factor_hyper() {
        for (Eigen::Index f = 0; f < k_; ++f) {
            std::vector<double> sums(n_groups_, 0.0);
            for (std::size_t j = 0; j < n_features_; ++j) sums[group_of_[j]] += model_.V(static_cast<Eigen::Index>(j), f);
            for (std::size_t g = 0; g < n_groups_; ++g) {
                auto sq_dev = [&](double mu) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n_features_; ++j) {
                        if (group_of_[j] != g) continue;
                        const double d = model_.V(static_cast<Eigen::Index>(j), f) - mu;
                        s += d * d;
                    }
                    return s;
                };
                const auto gg = static_cast<Eigen::Index>(g);
                sample_group_hyper(sums[g], static_cast<double>(group_size_[g]), sq_dev, mu_v_(gg, f), lambda_v_(gg, f));
            }
        }
    }

    // Each nonzero is touched a constant number of times per factor, so one
    // pass costs O(k * nnz).
    void sample_factors() {
        std::vector<double> h;
        for (Eigen::Index f = 0; f < k_; ++f) {
            for (std::size_t j = 0; j < n_features_; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                const auto g = static_cast<Eigen::Index>(group_of_[j]);
                const double old = model_.V(jj, f);
                const std::size_t begin = col_ptr_[j];
                const std::size_t end = col_ptr_[j + 1];
                h.resize(end - begin);
                double hh = 0.0;
                double he = 0.0;
                for (std::size_t p = begin; p < end; ++p) {
                    const auto r = static_cast<Eigen::Index>(col_rows_[p]);
                    const double x = col_vals_[p];
                    const double hv = x * (q_(r, f) - old * x);
                    h[p - begin] = hv;
                    hh += hv * hv;
                    he += hv * (e_(r) + old * hv);
                }
                const double fresh =
                    draw_conditional(alpha_ * hh + lambda_v_(g, f), alpha_ * he + lambda_v_(g, f) * mu_v_(g, f));
                const double delta = fresh - old;
                for (std::size_t p = begin; p < end; ++p) {
                    const auto r = static_cast<Eigen::Index>(col_rows_[p]);
                    e_(r) -= delta * h[p - begin];
                    q_(r, f) += delta * col_vals_[p];
                }
                model_.V(jj, f) = fresh;
            }
        }
    }

    double ordinal_log_likelihood(const Cutpoints& cuts) const {
        double total = 0.0;
        for (std::size_t r = 0; r < n_rows_; ++r) {
            const int c = category_[r];
            const double lo = c == 1 ? -kInf : cuts[static_cast<std::size_t>(c - 2)];
            const double hi = c == 5 ? kInf : cuts[static_cast<std::size_t>(c - 1)];
            total += log_interval_prob(lo, hi, target_[r] - e_(static_cast<Eigen::Index>(r)));
            if (total == -kInf) break;
        }
        return total;
    }

    // Random-walk Metropolis on (c1, log gaps); the reparametrization keeps
    // every proposal strictly increasing.
    bool sample_cutpoints() {
        std::array<double, 4> theta{};
        theta[0] = cutpoints_[0];
        for (std::size_t c = 1; c < 4; ++c) theta[c] = std::log(cutpoints_[c] - cutpoints_[c - 1]);

        std::array<double, 4> proposal{};
        for (std::size_t c = 0; c < 4; ++c) proposal[c] = theta[c] + cfg_.cutpoint_step * normal_(rng_);
        Cutpoints candidate{};
        candidate[0] = proposal[0];
        for (std::size_t c = 1; c < 4; ++c) candidate[c] = candidate[c - 1] + std::exp(proposal[c]);
        for (std::size_t c = 1; c < 4; ++c) {
            if (!(candidate[c] > candidate[c - 1])) return false;  // gap underflow
        }

        auto log_prior = [&](const std::array<double, 4>& t) {
            double s = 0.0;
            for (double v : t) s -= 0.5 * v * v / (cfg_.cutpoint_prior_sd * cfg_.cutpoint_prior_sd);
            return s;
        };
        const double log_ratio = ordinal_log_likelihood(candidate) + log_prior(proposal) -
                                 ordinal_log_likelihood(cutpoints_) - log_prior(theta);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        if (std::log(unif(rng_)) < log_ratio) {
            cutpoints_ = candidate;
            for (std::size_t c = 1; c < 4; ++c) {
                if (!(cutpoints_[c] > cutpoints_[c - 1])) {
                    throw NumericError("ordered probit: cutpoint ordering violated");
                }
            }
            return true;
        }
        return false;
    }

    void sample_latent() {
        for (std::size_t r = 0; r < n_rows_; ++r) {
            const auto rr = static_cast<Eigen::Index>(r);
            const double pred = target_[r] - e_(rr);
            const int c = category_[r];
            const double z = pred + sample_truncated_normal(lower(c) - pred, upper(c) - pred, rng_);
            target_[r] = z;
            e_(rr) = z - pred;
        }
    }

    void check_finite(std::size_t sweep) const {
        const bool ok = std::isfinite(model_.w0) && std::isfinite(alpha_) && std::isfinite(e_.squaredNorm()) &&
                        model_.w.allFinite() && model_.V.allFinite();
        if (!ok) throw NumericError("BFM: non-finite sample at sweep " + std::to_string(sweep));
    }

    const FeatureMatrix& train_;
    BfmConfig cfg_;
    Head head_;
    std::size_t n_rows_;
    std::size_t n_features_;
    Eigen::Index k_;
    std::size_t n_groups_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};

    std::vector<std::size_t> col_ptr_;
    std::vector<std::size_t> col_rows_;
    std::vector<double> col_vals_;
    std::vector<std::size_t> group_of_;
    std::vector<std::size_t> group_size_;

    FMModel model_;
    double alpha_ = 1.0;
    std::vector<double> lambda_w_;
    std::vector<double> mu_w_;
    Eigen::MatrixXd lambda_v_;
    Eigen::MatrixXd mu_v_;

    Eigen::MatrixXd q_;         // q(r, f) = sum_j v_jf x_rj
    Eigen::VectorXd e_;         // target - prediction
    std::vector<double> target_;  // ratings, or latent scores for ordered probit
    std::vector<int> category_;
    Cutpoints cutpoints_{};
};

}  // namespace

BfmResult bfm_fit_regression(const FeatureMatrix& train, const BfmConfig& cfg, const FeatureMatrix& query) {
    GibbsSampler sampler(train, cfg, Head::regression);
    return sampler.run(query);
}

BfmResult bfm_fit_ordered_probit(const FeatureMatrix& train, const BfmConfig& cfg, const FeatureMatrix& query) {
    GibbsSampler sampler(train, cfg, Head::ordered_probit);
    return sampler.run(query);
}

}  // namespace cfblend
