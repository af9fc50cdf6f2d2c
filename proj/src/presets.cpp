#include "cfblend/presets.hpp"

#include <algorithm>
#include <charconv>
#include <regex>
#include <set>

#include "cfblend/errors.hpp"

namespace cfblend {

namespace {

struct NamedRow {
    const char* row;
    const char* name;
};

// Numbered configurations of the reference results table.
constexpr NamedRow kTableRows[] = {
    {"(1)", "item-pcc-normal-30"},       {"(2)", "item-pcc-normal-all"},
    {"(3)", "item-pcc-none-30"},         {"(4)", "item-pcc-none-all"},
    {"(5)", "both-pcc-normal-30-w0.06"}, {"(6)", "item-sigra-all"},
    {"(7)", "both-cosine-normal-30-w0.5"}, {"(8)", "bfm-r-ui"},
    {"(9)", "bfm-r-uiiu"},               {"(10)", "bfm-r-uiii"},
    {"(11)", "bfm-r-uiiuii"},            {"(12)", "bfm-op-ui"},
    {"(13)", "bfm-op-uiiu"},             {"(14)", "bfm-op-uiii"},
    {"(15)", "bfm-op-uiiuii"},
};

const char* const kUnavailable[] = {"deeprec", "lightgcn", "row-16", "(16)", "blend-5-15-16"};

std::vector<std::string> rows_to_names(std::initializer_list<int> rows) {
    std::vector<std::string> out;
    for (int r : rows) out.emplace_back(kTableRows[r - 1].name);
    return out;
}

std::string row_of(const std::string& name) {
    for (const auto& r : kTableRows) {
        if (name == r.name) return r.row;
    }
    return "";
}

double parse_real(const std::string& key, const std::string& text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError("override '" + key + "': expected a number, got '" + text + "'");
    }
    return v;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError("override '" + key + "': expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

std::size_t parse_neighbors(const std::string& key, const std::string& text) {
    if (text == "all") return kAllNeighbors;
    return parse_count(key, text);
}

bool parse_flag(const std::string& key, const std::string& text) {
    if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
    if (text == "0" || text == "false" || text == "no" || text == "off") return false;
    throw ConfigError("override '" + key + "': expected a boolean, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto piece = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!piece.empty()) out.push_back(piece);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

bool parse_similarity_name(const std::string& name, SimilarityConfig& cfg) {
    static const std::regex pattern(
        R"(^(user|item|both)-(cosine|pcc|sigra)(?:-(none|normal|significance|sigmoid))?-(\d+|all)(?:-w([0-9]*\.?[0-9]+))?$)");
    std::smatch m;
    if (!std::regex_match(name, m, pattern)) return false;

    const std::string axis = m[1];
    const std::string measure = m[2];
    const std::string weighting = m[3].matched ? std::string(m[3]) : std::string();
    cfg.axis = axis == "user" ? SimilarityAxis::user : axis == "item" ? SimilarityAxis::item : SimilarityAxis::both;
    cfg.measure = measure == "cosine" ? SimilarityMeasure::cosine
                  : measure == "pcc"  ? SimilarityMeasure::pcc
                                      : SimilarityMeasure::sigra;
    if (cfg.measure == SimilarityMeasure::sigra) {
        if (!weighting.empty() && weighting != "none") return false;
        cfg.weighting = SimilarityWeighting::none;
    } else {
        if (weighting.empty()) return false;
        cfg.weighting = weighting == "none"     ? SimilarityWeighting::none
                        : weighting == "normal" ? SimilarityWeighting::normal
                        : weighting == "significance" ? SimilarityWeighting::significance
                                                      : SimilarityWeighting::sigmoid;
    }
    cfg.k_neighbors = m[4] == "all" ? kAllNeighbors : std::stoul(m[4]);
    if (m[5].matched && cfg.axis != SimilarityAxis::both) return false;
    cfg.user_weight = m[5].matched ? std::stod(m[5]) : 0.5;
    cfg.beta = cfg.axis == SimilarityAxis::user   ? kUserSignificanceBeta
               : cfg.axis == SimilarityAxis::item ? kItemSignificanceBeta
                                                  : kBothSignificanceBeta;
    return cfg.k_neighbors > 0;
}

bool parse_bfm_name(const std::string& name, Preset& p) {
    static const std::regex pattern(R"(^bfm-(r|op)-ui(iu)?(ii)?$)");
    std::smatch m;
    if (!std::regex_match(name, m, pattern)) return false;
    p.family = PresetFamily::bfm;
    p.ordered_probit = m[1] == "op";
    p.implicit_user = m[2].matched;
    p.implicit_item = m[3].matched;
    return true;
}

Preset base_preset(const std::string& name) {
    Preset p;
    p.name = name;
    p.table_row = row_of(name);

    if (name == "global-mean") {
        p.family = PresetFamily::global_mean;
    } else if (name == "svd") {
        p.family = PresetFamily::svd;
    } else if (name == "als") {
        p.family = PresetFamily::als;
    } else if (name == "funksvd") {
        p.family = PresetFamily::funksvd;
    } else if (name == "scsr") {
        p.family = PresetFamily::scsr;
        // Initial matrices: PCC with normal weighting; predictions blend both
        // axes with weight 0.5 over all neighbors.
        p.similarity.axis = SimilarityAxis::both;
        p.similarity.measure = SimilarityMeasure::pcc;
        p.similarity.weighting = SimilarityWeighting::normal;
        p.similarity.k_neighbors = kAllNeighbors;
        p.similarity.user_weight = 0.5;
        p.similarity.beta = kBothSignificanceBeta;
    } else if (parse_bfm_name(name, p)) {
    } else if (parse_similarity_name(name, p.similarity)) {
        p.family = PresetFamily::similarity;
    } else if (name == "blend" || name.rfind("blend-", 0) == 0) {
        p.family = PresetFamily::blend;
        if (name == "blend") {
        } else if (name == "blend-final") {
            p.members = final_blend_members();
        } else if (name == "blend-bfm") {
            p.members = rows_to_names({8, 9, 10, 11, 12, 13, 14, 15});
        } else if (name == "blend-5-15") {
            p.members = rows_to_names({5, 15});
        } else if (name == "blend-15-1to5") {
            p.members = rows_to_names({15, 1, 2, 3, 4, 5});
        } else if (name == "blend-5-6-7-15") {
            p.members = rows_to_names({5, 6, 7, 15});
        } else if (name == "blend-15-1to7") {
            p.members = rows_to_names({15, 1, 2, 3, 4, 5, 6, 7});
        } else if (name == "blend-ridge") {
            p.members = final_blend_members();
            p.blend_method = BlendMethod::ridge;
            p.blend_alpha = kRidgeAlpha;
        } else if (name == "blend-lasso") {
            p.members = final_blend_members();
            p.blend_method = BlendMethod::lasso;
            p.blend_alpha = kLassoAlpha;
        } else {
            throw ConfigError("unknown preset '" + name + "'");
        }
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return p;
}

void apply_overrides(Preset& p, const PresetOverrides& overrides) {
    std::set<std::string> allowed;
    switch (p.family) {
        case PresetFamily::global_mean:
            break;
        case PresetFamily::svd:
            allowed = {"rank"};
            break;
        case PresetFamily::als:
            allowed = {"rank", "lambda", "iters"};
            break;
        case PresetFamily::funksvd:
            allowed = {"rank", "eta", "lambda", "epochs"};
            break;
        case PresetFamily::bfm:
            allowed = {"rank", "iters", "burn-in"};
            break;
        case PresetFamily::similarity:
            allowed = {"k", "beta", "user-weight"};
            break;
        case PresetFamily::scsr:
            allowed = {"alpha", "sigma", "max-iter", "epsilon", "k", "user-weight"};
            break;
        case PresetFamily::blend:
            allowed = {"method", "alpha", "refit", "members"};
            break;
    }
    for (const auto& [key, value] : overrides) {
        if (!allowed.contains(key)) {
            throw ConfigError("preset '" + p.name + "' does not accept override '" + key + "'");
        }
        if (key == "rank") {
            const auto r = parse_count(key, value);
            p.svd_rank = r;
            p.als.rank = r;
            p.funk.rank = r;
            p.bfm.rank = r;
        } else if (key == "lambda") {
            const double l = parse_real(key, value);
            p.als.lambda = l;
            p.funk.alpha = l;
            p.funk.beta = l;
        } else if (key == "iters") {
            const auto n = parse_count(key, value);
            p.als.iterations = n;
            p.bfm.iterations = n;
        } else if (key == "eta") {
            p.funk.eta = parse_real(key, value);
        } else if (key == "epochs") {
            p.funk.epochs = parse_count(key, value);
        } else if (key == "burn-in") {
            p.bfm.burn_in = parse_count(key, value);
        } else if (key == "k") {
            p.similarity.k_neighbors = parse_neighbors(key, value);
        } else if (key == "beta") {
            p.similarity.beta = parse_count(key, value);
        } else if (key == "user-weight") {
            p.similarity.user_weight = parse_real(key, value);
        } else if (key == "alpha") {
            if (p.family == PresetFamily::scsr) {
                p.scsr.alpha = parse_real(key, value);
            } else {
                p.blend_alpha = parse_real(key, value);
            }
        } else if (key == "sigma") {
            p.scsr.sigma = parse_count(key, value);
        } else if (key == "max-iter") {
            p.scsr.max_iter = parse_count(key, value);
        } else if (key == "epsilon") {
            p.scsr.epsilon = parse_real(key, value);
        } else if (key == "method") {
            p.blend_method = parse_blend_method(value);
        } else if (key == "refit") {
            p.refit_members = parse_flag(key, value);
        } else if (key == "members") {
            p.members = split_list(value);
        }
    }
    if (p.family == PresetFamily::similarity || p.family == PresetFamily::scsr) p.similarity.validate();
    if (p.family == PresetFamily::blend) {
        if (p.members.empty()) throw ConfigError("blend preset '" + p.name + "' has no members");
        for (const auto& m : p.members) {
            if (resolve_preset(m).family == PresetFamily::blend) {
                throw ConfigError("blend member '" + m + "' is itself a blend");
            }
        }
    }
}

std::vector<double> fit_similarity(const Preset& p, const RatingMatrix& train, std::span<const UserItem> queries) {
    SimilarityConfig cfg = p.similarity;
    std::vector<double> out;
    out.reserve(queries.size());
    if (cfg.axis == SimilarityAxis::both) {
        cfg.axis = SimilarityAxis::user;
        const auto users = apply_weighting(compute_similarity(train, cfg), cfg);
        cfg.axis = SimilarityAxis::item;
        const auto items = apply_weighting(compute_similarity(train, cfg), cfg);
        for (const auto& q : queries) {
            out.push_back(predict_combined(train, users, items, q.user, q.item, cfg.k_neighbors, cfg.user_weight));
        }
        return out;
    }
    const auto s = apply_weighting(compute_similarity(train, cfg), cfg);
    for (const auto& q : queries) out.push_back(predict_knn(train, s, q.user, q.item, cfg.k_neighbors));
    return out;
}

std::vector<double> fit_scsr(const Preset& p, const RatingMatrix& train, std::span<const UserItem> queries) {
    SimilarityConfig cfg = p.similarity;
    cfg.axis = SimilarityAxis::user;
    auto users = apply_weighting(compute_similarity(train, cfg), cfg);
    cfg.axis = SimilarityAxis::item;
    auto items = apply_weighting(compute_similarity(train, cfg), cfg);

    ScsrConfig scfg = p.scsr;
    scfg.seed = p.seed;
    auto reinforced = scsr_train(train, users.values, items.values, scfg);
    users.values = std::move(reinforced.user_sim);
    items.values = std::move(reinforced.item_sim);
    users.dense_support = true;
    items.dense_support = true;

    std::vector<double> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
        out.push_back(predict_combined(train, users, items, q.user, q.item, cfg.k_neighbors, cfg.user_weight));
    }
    return out;
}

std::vector<double> fit_bfm(const Preset& p, const RatingMatrix& train, std::span<const UserItem> queries) {
    FeatureSchema schema{train.n_users(), train.n_items(), p.implicit_user, p.implicit_item};
    const auto features = build_features(train, schema);
    const auto query = build_query_features(train, queries, schema);
    BfmConfig cfg = p.bfm;
    cfg.seed = p.seed;
    const auto result = p.ordered_probit ? bfm_fit_ordered_probit(features, cfg, query)
                                         : bfm_fit_regression(features, cfg, query);
    return result.query_predictions;
}

std::vector<double> fit_blend(const Preset& p, const RatingMatrix& train, std::span<const UserItem> queries) {
    const auto split = split_ratings(train, kBlendSplitFraction, p.seed);
    const auto holdout = split.validation.pairs();
    std::vector<UserItem> combined = holdout;
    if (!p.refit_members) combined.insert(combined.end(), queries.begin(), queries.end());

    BlendDataset data;
    data.split_seed = p.seed;
    data.pairs = holdout;
    const auto n_hold = static_cast<Eigen::Index>(holdout.size());
    const auto n_models = static_cast<Eigen::Index>(p.members.size());
    data.features.resize(n_hold, n_models);
    data.targets.resize(n_hold);
    const auto truth = split.validation.values();
    for (Eigen::Index r = 0; r < n_hold; ++r) data.targets(r) = truth[static_cast<std::size_t>(r)];
    Eigen::MatrixXd query_features(static_cast<Eigen::Index>(queries.size()), n_models);

    for (Eigen::Index j = 0; j < n_models; ++j) {
        const auto& name = p.members[static_cast<std::size_t>(j)];
        const Preset member = resolve_preset(name, {}, p.seed);
        std::vector<double> preds;
        std::vector<double> query_preds;
        try {
            preds = fit_predict(member, split.train, combined);
            if (p.refit_members) query_preds = fit_predict(member, train, queries);
        } catch (const std::exception& e) {
            throw Error("base model '" + name + "' failed: " + e.what());
        }
        for (Eigen::Index r = 0; r < n_hold; ++r) data.features(r, j) = preds[static_cast<std::size_t>(r)];
        for (Eigen::Index r = 0; r < query_features.rows(); ++r) {
            query_features(r, j) = p.refit_members ? query_preds[static_cast<std::size_t>(r)]
                                                   : preds[static_cast<std::size_t>(n_hold + r)];
        }
        data.model_names.push_back(name);
    }
    const auto model = fit_blender(data, p.blend_method, p.blend_alpha);
    return blend_predict(model, query_features);
}

}  // namespace

std::size_t Preset::rank() const {
    switch (family) {
        case PresetFamily::svd:
            return svd_rank;
        case PresetFamily::als:
            return als.rank;
        case PresetFamily::funksvd:
            return funk.rank;
        case PresetFamily::bfm:
            return bfm.rank;
        default:
            return 0;
    }
}

std::vector<std::string> final_blend_members() { return rows_to_names({8, 9, 10, 11, 12, 13, 14, 15, 1, 2, 3, 4, 5}); }

Preset resolve_preset(const std::string& name, const PresetOverrides& overrides, std::uint64_t seed) {
    for (const char* gone : kUnavailable) {
        if (name == gone) {
            throw ConfigError("preset '" + name + "' is unavailable: neural models are not part of this build");
        }
    }
    std::string canonical = name;
    if (name.rfind("row-", 0) == 0) {
        const std::string label = "(" + name.substr(4) + ")";
        canonical.clear();
        for (const auto& r : kTableRows) {
            if (label == r.row) canonical = r.name;
        }
        if (canonical.empty()) throw ConfigError("unknown preset '" + name + "'");
    }
    Preset p = base_preset(canonical);
    p.seed = seed;
    p.funk.seed = seed;
    p.bfm.seed = seed;
    p.scsr.seed = seed;
    apply_overrides(p, overrides);
    return p;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names = {"global-mean", "svd", "als", "funksvd", "scsr",
                                      "item-pcc-normal-60", "user-pcc-normal-all", "both-pcc-normal-all-w0.5",
                                      "both-pcc-normal-60-w0.06"};
    for (const auto& r : kTableRows) names.emplace_back(r.name);
    for (const char* b : {"blend-final", "blend-bfm", "blend-5-15", "blend-15-1to5", "blend-5-6-7-15",
                          "blend-15-1to7", "blend-ridge", "blend-lasso"}) {
        names.emplace_back(b);
    }
    return names;
}

std::vector<double> fit_predict(const Preset& preset, const RatingMatrix& train, std::span<const UserItem> queries) {
    switch (preset.family) {
        case PresetFamily::global_mean:
            return std::vector<double>(queries.size(), train.global_mean());
        case PresetFamily::svd:
            return predict_ratings(svd_baseline(train, preset.svd_rank), queries);
        case PresetFamily::als:
            return predict_ratings(als_train(train, preset.als), queries);
        case PresetFamily::funksvd:
            return predict_ratings(funksvd_train(train, preset.funk), queries);
        case PresetFamily::bfm:
            return fit_bfm(preset, train, queries);
        case PresetFamily::similarity:
            return fit_similarity(preset, train, queries);
        case PresetFamily::scsr:
            return fit_scsr(preset, train, queries);
        case PresetFamily::blend:
            return fit_blend(preset, train, queries);
    }
    return {};
}

BaseModel as_base_model(const Preset& preset) {
    return BaseModel{preset.name, [preset](const RatingMatrix& train, std::span<const UserItem> queries) {
                         return fit_predict(preset, train, queries);
                     }};
}

}  // namespace cfblend
