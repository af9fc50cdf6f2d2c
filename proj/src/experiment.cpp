#include "cfblend/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <ostream>
#include <string_view>

#include "cfblend/errors.hpp"
#include "cfblend/factorization.hpp"

namespace cfblend {

namespace {

bool is_factor_family(PresetFamily f) {
    return f == PresetFamily::svd || f == PresetFamily::als || f == PresetFamily::funksvd;
}

FactorModel train_factor(const Preset& p, const RatingMatrix& train) {
    switch (p.family) {
        case PresetFamily::svd:
            return svd_baseline(train, p.svd_rank);
        case PresetFamily::als:
            return als_train(train, p.als);
        case PresetFamily::funksvd:
            return funksvd_train(train, p.funk);
        default:
            throw ConfigError("preset '" + p.name + "' has no factor model to save");
    }
}

std::vector<double> train_and_predict(const Preset& p, const RatingMatrix& train, std::span<const UserItem> queries,
                                      const std::optional<std::filesystem::path>& model_out) {
    if (model_out) {
        const auto model = train_factor(p, train);
        save_factor_model(model, *model_out);
        return predict_ratings(model, queries);
    }
    return fit_predict(p, train, queries);
}

void check_parent(const std::filesystem::path& p, const char* what) {
    const auto parent = p.parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent)) {
        throw ConfigError(std::string(what) + ": directory " + parent.string() + " does not exist");
    }
}

void put_double(std::ostream& out, double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out << std::string_view(buf, static_cast<std::size_t>(end - buf));
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
    if (!std::filesystem::is_regular_file(cfg.data)) {
        throw ConfigError("data file " + cfg.data.string() + " does not exist");
    }
    if (!(cfg.split > 0.0 && cfg.split < 1.0)) throw ConfigError("split must lie in (0,1)");
    if (cfg.queries && !std::filesystem::is_regular_file(*cfg.queries)) {
        throw ConfigError("queries file " + cfg.queries->string() + " does not exist");
    }
    if (cfg.out_submission && !cfg.queries) throw ConfigError("out-submission requires queries");
    if (cfg.out_metrics) check_parent(*cfg.out_metrics, "out-metrics");
    if (cfg.out_submission) check_parent(*cfg.out_submission, "out-submission");
    if (cfg.out_model) check_parent(*cfg.out_model, "out-model");
}

MetricsRow run_experiment(const ExperimentConfig& cfg, const RatingMatrix& data) {
    const Preset preset = resolve_preset(cfg.preset, cfg.overrides, cfg.seed);
    if (cfg.out_model && !is_factor_family(preset.family)) {
        throw ConfigError("preset '" + preset.name + "' has no factor model to save");
    }
    const auto start = std::chrono::steady_clock::now();

    const auto split = split_ratings(data, cfg.split, cfg.seed);
    auto queries = split.train.pairs();
    const auto n_train = queries.size();
    const auto val_pairs = split.validation.pairs();
    queries.insert(queries.end(), val_pairs.begin(), val_pairs.end());
    const auto preds = train_and_predict(preset, split.train, queries, cfg.out_model);

    const std::span<const double> all(preds);
    const std::span<const UserItem> all_pairs(queries);
    MetricsRow row;
    row.model = preset.name;
    row.rank = preset.rank();
    row.seed = cfg.seed;
    row.train_rmse = rmse(PredictionSet(all_pairs.first(n_train), all.first(n_train)), split.train);
    row.val_rmse = split.validation.empty()
                       ? 0.0
                       : rmse(PredictionSet(all_pairs.subspan(n_train), all.subspan(n_train)), split.validation);

    if (cfg.out_submission) {
        const auto pairs = load_query_pairs(*cfg.queries);
        const auto sub = fit_predict(preset, data, pairs);
        write_submission(PredictionSet(pairs, sub), *cfg.out_submission);
    }
    if (cfg.timing) {
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    if (cfg.out_metrics) write_metrics(std::span<const MetricsRow>(&row, 1), *cfg.out_metrics);
    return row;
}

MetricsRow run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    return run_experiment(cfg, load_ratings(cfg.data));
}

std::vector<MetricsRow> sweep_rank(const ExperimentConfig& cfg, const RatingMatrix& data,
                                   std::span<const std::size_t> ranks, std::span<const std::string> models) {
    if (ranks.empty()) throw ConfigError("sweep-rank: rank list is empty");
    if (models.empty()) throw ConfigError("sweep-rank: model list is empty");
    std::vector<MetricsRow> rows;
    for (const auto& model : models) {
        for (std::size_t r : ranks) {
            ExperimentConfig one = cfg;
            one.preset = model;
            one.overrides = {{"rank", std::to_string(r)}};
            one.out_metrics.reset();
            one.out_submission.reset();
            one.out_model.reset();
            rows.push_back(run_experiment(one, data));
        }
    }
    if (cfg.out_metrics) write_metrics(rows, *cfg.out_metrics);
    return rows;
}

void write_metrics_header(std::ostream& out) { out << "model,rank,seed,train_rmse,val_rmse,seconds\n"; }

void write_metrics_row(const MetricsRow& row, std::ostream& out) {
    out << row.model << ',' << row.rank << ',' << row.seed << ',';
    put_double(out, row.train_rmse);
    out << ',';
    put_double(out, row.val_rmse);
    out << ',';
    put_double(out, row.seconds);
    out << '\n';
}

void write_metrics(std::span<const MetricsRow> rows, std::ostream& out) {
    write_metrics_header(out);
    for (const auto& row : rows) write_metrics_row(row, out);
    if (!out) throw IoError("metrics: write failure");
}

void write_metrics(std::span<const MetricsRow> rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_metrics(rows, out);
}

std::vector<UserItem> load_query_pairs(const std::filesystem::path& path) {
    LoadOptions opts;
    opts.bounds = RatingBounds::unbounded;
    return load_ratings(path, opts).pairs();
}

}  // namespace cfblend
