#include "cfblend/blending.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string_view>

#include "cfblend/errors.hpp"

namespace cfblend {

BlendDataset make_blend_dataset(const DataSplit& split, std::span<const BaseModel> models) {
    if (models.empty()) throw ConfigError("blend: at least one base model is required");
    const auto pairs = split.validation.pairs();
    const auto n = static_cast<Eigen::Index>(pairs.size());

    BlendDataset data;
    data.split_seed = split.seed;
    data.pairs = pairs;
    data.features.resize(n, static_cast<Eigen::Index>(models.size()));
    data.targets.resize(n);
    const auto truth = split.validation.values();
    for (Eigen::Index r = 0; r < n; ++r) data.targets(r) = truth[static_cast<std::size_t>(r)];

    for (std::size_t j = 0; j < models.size(); ++j) {
        std::vector<double> column;
        try {
            column = models[j].fit_predict(split.train, pairs);
        } catch (const std::exception& e) {
            throw Error("base model '" + models[j].name + "' failed: " + e.what());
        }
        if (column.size() != pairs.size()) {
            throw ShapeError("base model '" + models[j].name + "' returned the wrong number of predictions");
        }
        for (Eigen::Index r = 0; r < n; ++r) {
            data.features(r, static_cast<Eigen::Index>(j)) = column[static_cast<std::size_t>(r)];
        }
        data.model_names.push_back(models[j].name);
    }
    if (!data.features.allFinite()) throw NumericError("blend: non-finite base-model prediction");
    return data;
}

BlendDataset make_blend_dataset(const RatingMatrix& m, std::span<const BaseModel> models, double fraction,
                                std::uint64_t seed) {
    return make_blend_dataset(split_ratings(m, fraction, seed), models);
}

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

}  // namespace

BlendModel fit_blender(const BlendDataset& data, BlendMethod method, double alpha) {
    const Eigen::Index n = data.features.rows();
    const Eigen::Index m = data.features.cols();
    if (data.targets.size() != n) throw ShapeError("blend: targets and features differ in length");
    if (n <= m) throw ShapeError("blend: need more rows than models");
    if (!(alpha >= 0.0)) throw ConfigError("blend: alpha must be >= 0");

    BlendModel model;
    model.method = method;
    model.alpha = alpha;
    model.model_names = data.model_names;

    if (method == BlendMethod::ols) {
        Eigen::MatrixXd design(n, m + 1);
        design.col(0).setOnes();
        design.rightCols(m) = data.features;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        if (qr.rank() < m + 1) {
            throw NumericError("blend: OLS design is rank-deficient; use ridge instead");
        }
        const Eigen::VectorXd beta = qr.solve(data.targets);
        model.intercept = beta(0);
        model.weights = beta.tail(m);
        return model;
    }

    const Eigen::RowVectorXd x_mean = data.features.colwise().mean();
    const double y_mean = data.targets.mean();
    const Eigen::MatrixXd xc = data.features.rowwise() - x_mean;
    const Eigen::VectorXd yc = data.targets.array() - y_mean;

    if (method == BlendMethod::ridge) {
        Eigen::MatrixXd gram = xc.transpose() * xc;
        gram.diagonal().array() += alpha;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
            throw NumericError("blend: ridge system is singular; increase alpha");
        }
        model.weights = ldlt.solve(xc.transpose() * yc);
    } else {
        const double nn = static_cast<double>(n);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
        Eigen::VectorXd residual = yc;
        const Eigen::VectorXd col_sq = xc.colwise().squaredNorm().transpose() / nn;
        for (std::size_t sweep = 0; sweep < kLassoMaxSweeps; ++sweep) {
            double max_change = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) {
                if (col_sq(j) == 0.0) continue;
                const double rho = xc.col(j).dot(residual) / nn + col_sq(j) * w(j);
                const double fresh = soft_threshold(rho, alpha) / col_sq(j);
                const double delta = fresh - w(j);
                if (delta != 0.0) {
                    residual -= delta * xc.col(j);
                    w(j) = fresh;
                }
                max_change = std::max(max_change, std::abs(delta));
            }
            if (max_change < kLassoTolerance) break;
        }
        model.weights = w;
    }
    model.intercept = y_mean - x_mean.dot(model.weights);
    if (!model.weights.allFinite() || !std::isfinite(model.intercept)) {
        throw NumericError("blend: non-finite weights");
    }
    return model;
}

double blend_predict(const BlendModel& model, std::span<const double> model_predictions) {
    if (static_cast<Eigen::Index>(model_predictions.size()) != model.weights.size()) {
        throw ShapeError("blend: expected " + std::to_string(model.weights.size()) + " model predictions, got " +
                         std::to_string(model_predictions.size()));
    }
    double out = model.intercept;
    for (std::size_t j = 0; j < model_predictions.size(); ++j) {
        out += model.weights(static_cast<Eigen::Index>(j)) * model_predictions[j];
    }
    return out;
}

std::vector<double> blend_predict(const BlendModel& model, const Eigen::MatrixXd& features) {
    if (features.cols() != model.weights.size()) throw ShapeError("blend: feature width mismatch");
    const Eigen::VectorXd fitted = (features * model.weights).array() + model.intercept;
    return {fitted.data(), fitted.data() + fitted.size()};
}

void write_blend_dataset(const BlendDataset& data, std::ostream& out) {
    for (const auto& name : data.model_names) out << name << ',';
    out << "target\n";
    char buf[64];
    auto put = [&](double v) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out << std::string_view(buf, static_cast<std::size_t>(end - buf));
    };
    for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
        for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
            put(data.features(r, j));
            out << ',';
        }
        put(data.targets(r));
        out << '\n';
    }
    if (!out) throw IoError("blend dataset: write failure");
}

void write_blend_dataset(const BlendDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_blend_dataset(data, out);
}

BlendMethod parse_blend_method(const std::string& name) {
    if (name == "ols" || name == "linear") return BlendMethod::ols;
    if (name == "ridge") return BlendMethod::ridge;
    if (name == "lasso") return BlendMethod::lasso;
    throw ConfigError("unknown blend method '" + name + "' (expected ols, ridge or lasso)");
}

std::string to_string(BlendMethod method) {
    switch (method) {
        case BlendMethod::ols:
            return "ols";
        case BlendMethod::ridge:
            return "ridge";
        case BlendMethod::lasso:
            return "lasso";
    }
    return "ols";
}

}  // namespace cfblend
