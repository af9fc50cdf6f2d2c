#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cfblend/blending.hpp"
#include "cfblend/factorization.hpp"
#include "cfblend/fm.hpp"
#include "cfblend/ratings.hpp"
#include "cfblend/scsr.hpp"
#include "cfblend/similarity.hpp"

namespace cfblend {

// Per-run hyperparameter overrides keyed by flag name without dashes
// (e.g. "rank", "lambda", "iters").
using PresetOverrides = std::map<std::string, std::string>;

enum class PresetFamily { global_mean, svd, als, funksvd, bfm, similarity, scsr, blend };

struct Preset {
    std::string name;
    std::string table_row;  // "(1)".."(15)" where the configuration is a numbered row
    PresetFamily family = PresetFamily::global_mean;
    std::uint64_t seed = 0;

    std::size_t svd_rank = kDefaultSvdRank;
    AlsConfig als;
    FunkConfig funk;

    BfmConfig bfm;
    bool implicit_user = false;
    bool implicit_item = false;
    bool ordered_probit = false;

    SimilarityConfig similarity;
    ScsrConfig scsr;

    std::vector<std::string> members;
    BlendMethod blend_method = BlendMethod::ols;
    double blend_alpha = 0.0;
    bool refit_members = false;  // refit base models on all training data before inference

    // Latent dimension for factor models and BFM; 0 otherwise.
    std::size_t rank() const;
};

// Throws ConfigError for unknown names ("unknown preset"), unavailable
// neural rows, and overrides the preset does not accept.
Preset resolve_preset(const std::string& name, const PresetOverrides& overrides = {}, std::uint64_t seed = 0);

// Named, fixed presets (generic similarity names such as
// `user-cosine-sigmoid-10` also resolve).
std::vector<std::string> preset_names();

// Train on `train` and return one raw (unclipped) prediction per query.
std::vector<double> fit_predict(const Preset& preset, const RatingMatrix& train, std::span<const UserItem> queries);

BaseModel as_base_model(const Preset& preset);

// Members of `blend-final`: the eight BFM rows and similarity rows (1)-(5).
std::vector<std::string> final_blend_members();

}  // namespace cfblend
