#include "cfblend/ratings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <string_view>

#include "cfblend/errors.hpp"

namespace cfblend {

namespace {

std::string pair_name(std::size_t user, std::size_t item) {
    return "r" + std::to_string(user + 1) + "_c" + std::to_string(item + 1);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

Rating parse_line(std::string_view line, std::size_t line_no) {
    // r<row>_c<col>,<value>
    if (line.size() < 6 || line.front() != 'r') {
        throw ParseError(line_no, "expected r<row>_c<col>,<value>");
    }
    const auto sep = line.find("_c");
    const auto comma = line.find(',');
    if (sep == std::string_view::npos || comma == std::string_view::npos || comma < sep) {
        throw ParseError(line_no, "expected r<row>_c<col>,<value>");
    }
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
    if (!parse_number(line.substr(1, sep - 1), row) || row == 0) {
        throw ParseError(line_no, "bad row index");
    }
    if (!parse_number(line.substr(sep + 2, comma - sep - 2), col) || col == 0) {
        throw ParseError(line_no, "bad column index");
    }
    if (!parse_number(trim(line.substr(comma + 1)), value) || !std::isfinite(value)) {
        throw ParseError(line_no, "bad value");
    }
    return {row - 1, col - 1, value};
}

}  // namespace

RatingMatrix::RatingMatrix(std::size_t n_users, std::size_t n_items, std::vector<Rating> entries,
                           RatingBounds bounds)
    : n_users_(n_users),
      n_items_(n_items),
      bounds_(bounds),
      entries_(std::move(entries)),
      by_user_(n_users),
      by_item_(n_items) {
    double total = 0.0;
    for (const auto& e : entries_) {
        if (e.user >= n_users_ || e.item >= n_items_) {
            throw RangeError("index " + pair_name(e.user, e.item) + " outside " +
                             std::to_string(n_users_) + "x" + std::to_string(n_items_));
        }
        if (!std::isfinite(e.value)) {
            throw RangeError("non-finite value at " + pair_name(e.user, e.item));
        }
        if (bounds_ == RatingBounds::strict && (e.value < kMinRating || e.value > kMaxRating)) {
            throw RangeError("rating " + std::to_string(e.value) + " at " + pair_name(e.user, e.item) +
                             " outside [1,5]");
        }
        by_user_[e.user].push_back({e.item, e.value});
        by_item_[e.item].push_back({e.user, e.value});
        total += e.value;
    }
    global_mean_ = entries_.empty() ? 0.0 : total / static_cast<double>(entries_.size());

    auto by_index = [](const Cell& a, const Cell& b) { return a.index < b.index; };
    user_means_.assign(n_users_, global_mean_);
    for (std::size_t u = 0; u < n_users_; ++u) {
        auto& profile = by_user_[u];
        std::sort(profile.begin(), profile.end(), by_index);
        for (std::size_t k = 1; k < profile.size(); ++k) {
            if (profile[k].index == profile[k - 1].index) {
                throw DuplicateError("duplicate entry " + pair_name(u, profile[k].index));
            }
        }
        if (!profile.empty()) {
            double s = 0.0;
            for (const auto& c : profile) s += c.value;
            user_means_[u] = s / static_cast<double>(profile.size());
        }
    }
    item_means_.assign(n_items_, global_mean_);
    for (std::size_t i = 0; i < n_items_; ++i) {
        auto& profile = by_item_[i];
        std::sort(profile.begin(), profile.end(), by_index);
        if (!profile.empty()) {
            double s = 0.0;
            for (const auto& c : profile) s += c.value;
            item_means_[i] = s / static_cast<double>(profile.size());
        }
    }
}

std::optional<double> RatingMatrix::find(std::size_t user, std::size_t item) const {
    if (user >= n_users_) return std::nullopt;
    const auto& profile = by_user_[user];
    auto it = std::lower_bound(profile.begin(), profile.end(), item,
                               [](const Cell& c, std::size_t idx) { return c.index < idx; });
    if (it == profile.end() || it->index != item) return std::nullopt;
    return it->value;
}

double RatingMatrix::at(std::size_t user, std::size_t item) const {
    if (auto v = find(user, item)) return *v;
    throw KeyError("pair " + pair_name(user, item) + " not observed");
}

std::vector<UserItem> RatingMatrix::pairs() const {
    std::vector<UserItem> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back({e.user, e.item});
    return out;
}

std::vector<double> RatingMatrix::values() const {
    std::vector<double> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.value);
    return out;
}

RatingMatrix load_ratings(std::istream& in, const LoadOptions& options) {
    std::vector<Rating> entries;
    std::string line;
    std::size_t line_no = 0;
    std::size_t max_user = 0;
    std::size_t max_item = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) continue;  // header
        auto view = trim(line);
        if (view.empty()) continue;
        Rating r = parse_line(view, line_no);
        if (options.bounds == RatingBounds::strict && (r.value < kMinRating || r.value > kMaxRating)) {
            throw RangeError("line " + std::to_string(line_no) + ": rating " + std::string(trim(view.substr(view.find(',') + 1))) +
                             " outside [1,5]");
        }
        max_user = std::max(max_user, r.user + 1);
        max_item = std::max(max_item, r.item + 1);
        entries.push_back(r);
    }
    if (in.bad()) throw IoError("read failure");
    const std::size_t n_users = options.n_users.value_or(max_user);
    const std::size_t n_items = options.n_items.value_or(max_item);
    if (n_users < max_user || n_items < max_item) {
        throw RangeError("observed index exceeds configured dimensions");
    }
    return RatingMatrix(n_users, n_items, std::move(entries), options.bounds);
}

RatingMatrix load_ratings(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return load_ratings(in, options);
}

DataSplit split_ratings(const RatingMatrix& m, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ConfigError("split fraction must lie in (0,1), got " + std::to_string(fraction));
    }
    const auto entries = m.entries();
    const std::size_t n = entries.size();
    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<char> in_train(n, 0);
    for (std::size_t k = 0; k < n_train; ++k) in_train[order[k]] = 1;

    std::vector<Rating> train;
    std::vector<Rating> validation;
    train.reserve(n_train);
    validation.reserve(n - n_train);
    for (std::size_t k = 0; k < n; ++k) {
        (in_train[k] ? train : validation).push_back(entries[k]);
    }
    return DataSplit{RatingMatrix(m.n_users(), m.n_items(), std::move(train), m.bounds()),
                     RatingMatrix(m.n_users(), m.n_items(), std::move(validation), m.bounds()), seed,
                     fraction};
}

NormalizationState NormalizationState::identity(std::size_t n_items) {
    NormalizationState s;
    s.mode = NormalizationMode::none;
    s.column_means.assign(n_items, 0.0);
    s.column_stds.assign(n_items, 1.0);
    return s;
}

NormalizedRatings normalize(const RatingMatrix& m, NormalizationMode mode) {
    if (m.empty()) throw ConfigError("cannot normalize an empty rating matrix");

    NormalizationState state = NormalizationState::identity(m.n_items());
    state.mode = mode;
    state.global_mean = m.global_mean();
    if (mode == NormalizationMode::none) {
        return {m, std::move(state)};
    }

    for (std::size_t i = 0; i < m.n_items(); ++i) {
        const auto profile = m.item_profile(i);
        if (profile.empty()) {
            state.column_means[i] = m.global_mean();
            state.column_stds[i] = 1.0;
            continue;
        }
        const double mean = m.item_mean(i);
        double ss = 0.0;
        for (const auto& c : profile) ss += (c.value - mean) * (c.value - mean);
        const double sd = std::sqrt(ss / static_cast<double>(profile.size()));
        state.column_means[i] = mean;
        state.column_stds[i] = std::max(sd, kMinColumnStd);
    }

    std::vector<Rating> scaled;
    scaled.reserve(m.size());
    for (const auto& e : m.entries()) {
        scaled.push_back({e.user, e.item, state.normalize(e.item, e.value)});
    }
    return {RatingMatrix(m.n_users(), m.n_items(), std::move(scaled), RatingBounds::unbounded),
            std::move(state)};
}

PredictionSet::PredictionSet(std::span<const UserItem> pairs, std::span<const double> values) {
    if (pairs.size() != values.size()) {
        throw ShapeError("pairs and values differ in length");
    }
    entries_.reserve(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) add(pairs[k].user, pairs[k].item, values[k]);
}

void PredictionSet::add(std::size_t user, std::size_t item, double value) {
    if (!std::isfinite(value)) {
        throw NumericError("non-finite prediction for " + pair_name(user, item));
    }
    entries_.push_back({user, item, std::clamp(value, kMinRating, kMaxRating)});
}

double rmse(const PredictionSet& predictions, const RatingMatrix& truth) {
    if (predictions.empty()) return 0.0;
    double ss = 0.0;
    for (const auto& p : predictions.entries()) {
        const double d = p.value - truth.at(p.user, p.item);
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(predictions.size()));
}

double rmse(std::span<const double> predicted, std::span<const double> truth) {
    if (predicted.size() != truth.size()) throw ShapeError("rmse: length mismatch");
    if (predicted.empty()) return 0.0;
    double ss = 0.0;
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        const double d = predicted[k] - truth[k];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(predicted.size()));
}

void write_submission(const PredictionSet& predictions, std::ostream& out) {
    out << "Id,Prediction\n";
    char buf[64];
    for (const auto& p : predictions.entries()) {
        // Shortest representation that round-trips exactly.
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), p.value);
        out << 'r' << (p.user + 1) << "_c" << (p.item + 1) << ',' << std::string_view(buf, end - buf)
            << '\n';
    }
    if (!out) throw IoError("write failure");
}

void write_submission(const PredictionSet& predictions, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_submission(predictions, out);
}

}  // namespace cfblend
