#include <cmath>
#include <string>

#include "cfblend/errors.hpp"
#include "cfblend/fm.hpp"

namespace cfblend {

std::size_t FeatureSchema::block_of(std::size_t feature) const {
    if (feature < item_offset()) return 0;
    if (feature < implicit_user_offset()) return 1;
    std::size_t block = 2;
    if (implicit_user) {
        if (feature < implicit_item_offset()) return block;
        ++block;
    }
    return block;
}

std::string FeatureSchema::label() const {
    std::string s = "ui";
    if (implicit_user) s += "iu";
    if (implicit_item) s += "ii";
    return s;
}

void FeatureMatrix::add_row(std::span<const Feature> row, double target) {
    const std::size_t n = schema_.n_features();
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (row[k].index >= n) {
            throw KeyError("feature index " + std::to_string(row[k].index) + " >= " + std::to_string(n));
        }
        if (k > 0 && row[k].index <= row[k - 1].index) {
            throw ShapeError("feature row not strictly sorted by index");
        }
    }
    features_.insert(features_.end(), row.begin(), row.end());
    row_ptr_.push_back(features_.size());
    targets_.push_back(target);
}

namespace {

void append_row(const RatingMatrix& source, const FeatureSchema& schema, std::size_t user,
                std::size_t item, std::vector<Feature>& row) {
    row.clear();
    row.push_back({schema.user_offset() + user, 1.0});
    row.push_back({schema.item_offset() + item, 1.0});
    if (schema.implicit_user) {
        const std::size_t off = schema.implicit_user_offset();
        const auto profile = source.user_profile(user);
        if (profile.empty()) {
            // Fallback for users without history: the queried item alone, value 1.
            row.push_back({off + item, 1.0});
        } else {
            const double value = 1.0 / std::sqrt(static_cast<double>(profile.size()));
            for (const auto& c : profile) row.push_back({off + c.index, value});
        }
    }
    if (schema.implicit_item) {
        const std::size_t off = schema.implicit_item_offset();
        const auto profile = source.item_profile(item);
        if (profile.empty()) {
            row.push_back({off + user, 1.0});
        } else {
            const double value = 1.0 / std::sqrt(static_cast<double>(profile.size()));
            for (const auto& c : profile) row.push_back({off + c.index, value});
        }
    }
}

void check_schema(const RatingMatrix& m, const FeatureSchema& schema) {
    if (schema.n_users != m.n_users() || schema.n_items != m.n_items()) {
        throw ShapeError("feature schema dimensions do not match the rating matrix");
    }
}

}  // namespace

FeatureMatrix build_features(const RatingMatrix& m, const FeatureSchema& schema) {
    check_schema(m, schema);
    FeatureMatrix out(schema);
    std::vector<Feature> row;
    for (const auto& e : m.entries()) {
        append_row(m, schema, e.user, e.item, row);
        out.add_row(row, e.value);
    }
    return out;
}

FeatureMatrix build_query_features(const RatingMatrix& implicit_source,
                                   std::span<const UserItem> pairs, const FeatureSchema& schema) {
    check_schema(implicit_source, schema);
    FeatureMatrix out(schema);
    std::vector<Feature> row;
    for (const auto& p : pairs) {
        if (p.user >= schema.n_users || p.item >= schema.n_items) {
            throw KeyError("query (" + std::to_string(p.user) + ", " + std::to_string(p.item) +
                           ") out of range");
        }
        append_row(implicit_source, schema, p.user, p.item, row);
        out.add_row(row, 0.0);
    }
    return out;
}

double fm_predict(const FMModel& model, std::span<const Feature> row) {
    const std::size_t n = model.n_features();
    double linear = model.w0;
    for (const auto& x : row) {
        if (x.index >= n) {
            throw KeyError("feature index " + std::to_string(x.index) + " >= " + std::to_string(n));
        }
        linear += model.w(static_cast<Eigen::Index>(x.index)) * x.value;
    }
    double pairwise = 0.0;
    for (Eigen::Index f = 0; f < model.V.cols(); ++f) {
        double sum = 0.0;
        double sum_sq = 0.0;
        for (const auto& x : row) {
            const double t = model.V(static_cast<Eigen::Index>(x.index), f) * x.value;
            sum += t;
            sum_sq += t * t;
        }
        pairwise += sum * sum - sum_sq;
    }
    return linear + 0.5 * pairwise;
}

}  // namespace cfblend
