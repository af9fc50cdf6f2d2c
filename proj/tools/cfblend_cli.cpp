// cfblend: batch front end for training, scoring, rank sweeps and blending.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cfblend/config.hpp"
#include "cfblend/errors.hpp"
#include "cfblend/experiment.hpp"
#include "cfblend/factorization.hpp"
#include "cfblend/presets.hpp"
#include "cfblend/ratings.hpp"

namespace {

using cfblend::Settings;

struct RunOptions {
    Settings cli;
    std::string config_path;
};

void add_run_options(CLI::App* cmd, RunOptions& opts, bool with_model_flags) {
    auto keyed = [&](const std::string& key, const std::string& help) {
        cmd->add_option_function<std::string>(
            "--" + key, [&opts, key](const std::string& v) { opts.cli[key] = v; }, help);
    };
    cmd->add_option("--config", opts.config_path, "Flat key = value settings file");
    keyed("data", "Ratings CSV (Id,Prediction)");
    keyed("seed", "Seed for the split and every stochastic model");
    keyed("split", "Train fraction of the train/validation split");
    keyed("out-metrics", "Write model,rank,seed,train_rmse,val_rmse,seconds here");
    keyed("out-submission", "Write predictions for --queries here");
    keyed("queries", "Id,Prediction file listing the pairs to predict");
    cmd->add_flag_callback("--no-timing", [&opts] { opts.cli["no-timing"] = "1"; },
                           "Report 0 seconds so metrics files are byte-stable");
    if (!with_model_flags) return;
    keyed("preset", "Model preset, see `cfblend presets`");
    keyed("out-model", "Save the factor model (svd, als, funksvd)");
    keyed("rank", "Latent dimension");
    keyed("lambda", "Regularization (ALS lambda, FunkSVD alpha and beta)");
    keyed("iters", "ALS iterations or Gibbs sweeps");
    keyed("eta", "FunkSVD learning rate");
    keyed("epochs", "FunkSVD epochs");
    keyed("burn-in", "Gibbs sweeps discarded before averaging");
    keyed("k", "Neighbors, or `all`");
    keyed("beta", "Significance weighting threshold");
    keyed("user-weight", "Weight of the user-based prediction in combined models");
    keyed("alpha", "SCSR damping, or blend regularization");
    keyed("sigma", "SCSR profile sample size");
    keyed("max-iter", "SCSR iterations");
    keyed("epsilon", "SCSR convergence threshold");
    keyed("method", "Blend regression: ols, ridge or lasso");
    keyed("members", "Comma-separated blend members");
    keyed("refit", "Refit blend members on all training data before predicting");
}

cfblend::ExperimentConfig resolve(const RunOptions& opts) {
    Settings merged;
    if (!opts.config_path.empty()) merged = cfblend::load_settings(opts.config_path);
    cfblend::merge_settings(merged, cfblend::settings_from_environment());
    cfblend::merge_settings(merged, opts.cli);
    cfblend::ExperimentConfig cfg;
    cfblend::apply_settings(merged, cfg);
    if (cfg.data.empty()) throw cfblend::ConfigError("no data file given (--data)");
    return cfg;
}

std::vector<std::size_t> parse_ranks(const std::string& text) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        const auto piece = text.substr(start, comma - start);
        const auto dash = piece.find('-');
        try {
            if (dash == std::string::npos) {
                out.push_back(std::stoul(piece));
            } else {
                const auto lo = std::stoul(piece.substr(0, dash));
                const auto hi = std::stoul(piece.substr(dash + 1));
                for (auto r = lo; r <= hi; ++r) out.push_back(r);
            }
        } catch (const std::logic_error&) {
            throw cfblend::ConfigError("bad rank list entry '" + piece + "'");
        }
        start = comma + 1;
    }
    return out;
}

std::vector<std::string> parse_names(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        if (comma > start) out.push_back(text.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

void print_rows(const std::vector<cfblend::MetricsRow>& rows) { cfblend::write_metrics(rows, std::cout); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collaborative filtering experiments: factor models, BFM, similarity kNN, SCSR and blending"};
    app.require_subcommand(1);

    RunOptions train_opts;
    auto* train = app.add_subcommand("train", "Split, train a preset, report RMSE, optionally write a submission");
    add_run_options(train, train_opts, true);

    RunOptions blend_opts;
    auto* blend = app.add_subcommand("blend", "Train a blend preset (default blend-final)");
    add_run_options(blend, blend_opts, true);

    RunOptions sweep_opts;
    std::string ranks = "1-16";
    std::string models = "svd,als,funksvd,bfm-r-ui";
    auto* sweep = app.add_subcommand("sweep-rank", "Validation RMSE per rank for the factor models");
    add_run_options(sweep, sweep_opts, false);
    sweep->add_option("--ranks", ranks, "Ranks, e.g. 1-16 or 2,4,8")->capture_default_str();
    sweep->add_option("--models", models, "Comma-separated presets")->capture_default_str();

    std::string truth_path;
    std::string pred_path;
    auto* evaluate = app.add_subcommand("evaluate", "RMSE of a prediction file against observed ratings");
    evaluate->add_option("--data", truth_path, "Observed ratings")->required();
    evaluate->add_option("--predictions", pred_path, "Prediction file (Id,Prediction)")->required();

    std::string model_path;
    std::string query_path;
    std::string out_path;
    auto* predict = app.add_subcommand("predict", "Apply a saved factor model to query pairs");
    predict->add_option("--model", model_path, "File written by train --out-model")->required();
    predict->add_option("--queries", query_path, "Id,Prediction file listing the pairs")->required();
    predict->add_option("--out-submission", out_path, "Output file (default: stdout)");

    auto* presets = app.add_subcommand("presets", "List named presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train || *blend) {
            auto& opts = *train ? train_opts : blend_opts;
            if (*blend && !opts.cli.contains("preset")) opts.cli["preset"] = "blend-final";
            auto cfg = resolve(opts);
            if (*blend && cfblend::resolve_preset(cfg.preset, cfg.overrides).family != cfblend::PresetFamily::blend) {
                throw cfblend::ConfigError("preset '" + cfg.preset + "' is not a blend");
            }
            print_rows({cfblend::run_experiment(cfg)});
        } else if (*sweep) {
            auto cfg = resolve(sweep_opts);
            if (!cfg.overrides.empty()) throw cfblend::ConfigError("sweep-rank takes no model overrides");
            cfblend::validate(cfg);
            const auto data = cfblend::load_ratings(cfg.data);
            const auto rank_list = parse_ranks(ranks);
            const auto model_list = parse_names(models);
            print_rows(cfblend::sweep_rank(cfg, data, rank_list, model_list));
        } else if (*evaluate) {
            const auto truth = cfblend::load_ratings(truth_path);
            cfblend::LoadOptions loose;
            loose.bounds = cfblend::RatingBounds::unbounded;
            const auto preds = cfblend::load_ratings(pred_path, loose);
            const auto pairs = preds.pairs();
            const auto values = preds.values();
            const double score = cfblend::rmse(cfblend::PredictionSet(pairs, values), truth);
            std::cout << "rmse," << score << '\n';
        } else if (*predict) {
            const auto model = cfblend::load_factor_model(std::filesystem::path(model_path));
            const auto pairs = cfblend::load_query_pairs(query_path);
            const auto values = cfblend::predict_ratings(model, pairs);
            const cfblend::PredictionSet set(pairs, values);
            if (out_path.empty()) {
                cfblend::write_submission(set, std::cout);
            } else {
                cfblend::write_submission(set, std::filesystem::path(out_path));
            }
        } else if (*presets) {
            for (const auto& name : cfblend::preset_names()) {
                const auto p = cfblend::resolve_preset(name);
                std::cout << name;
                if (!p.table_row.empty()) std::cout << ' ' << p.table_row;
                std::cout << '\n';
            }
        }
    } catch (const cfblend::Error& e) {
        std::cerr << "cfblend: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "cfblend: unexpected error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
