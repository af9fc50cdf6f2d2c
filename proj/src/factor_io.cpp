#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cfblend/errors.hpp"
#include "cfblend/factorization.hpp"

namespace cfblend {

namespace {

static_assert(std::endian::native == std::endian::little, "factor dumps assume little-endian hosts");

constexpr std::array<char, 8> kMagic = {'C', 'F', 'B', 'F', 'A', 'C', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw IoError("factor model: truncated stream");
    return value;
}

void put_doubles(std::ostream& out, const double* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& in, double* data, std::size_t n) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw IoError("factor model: truncated stream");
}

}  // namespace

// Layout: magic[8] version:u32 n_users:u64 n_items:u64 rank:u64 mode:u8
// global_mean:f64 user_factors (column-major) item_factors (column-major)
// column_means[n_items] column_stds[n_items]
void save_factor_model(const FactorModel& model, std::ostream& out) {
    out.write(kMagic.data(), kMagic.size());
    put(out, kVersion);
    put(out, static_cast<std::uint64_t>(model.n_users()));
    put(out, static_cast<std::uint64_t>(model.n_items()));
    put(out, static_cast<std::uint64_t>(model.rank()));
    put(out, static_cast<std::uint8_t>(model.norm.mode == NormalizationMode::column ? 1 : 0));
    put(out, model.norm.global_mean);
    put_doubles(out, model.user_factors.data(), static_cast<std::size_t>(model.user_factors.size()));
    put_doubles(out, model.item_factors.data(), static_cast<std::size_t>(model.item_factors.size()));
    put_doubles(out, model.norm.column_means.data(), model.norm.column_means.size());
    put_doubles(out, model.norm.column_stds.data(), model.norm.column_stds.size());
    if (!out) throw IoError("factor model: write failure");
}

FactorModel load_factor_model(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw IoError("factor model: bad magic header");
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion) {
        throw IoError("factor model: unsupported version " + std::to_string(version));
    }
    const auto n_users = static_cast<Eigen::Index>(get<std::uint64_t>(in));
    const auto n_items = static_cast<Eigen::Index>(get<std::uint64_t>(in));
    const auto rank = static_cast<Eigen::Index>(get<std::uint64_t>(in));
    const auto mode = get<std::uint8_t>(in);

    FactorModel model;
    model.norm.mode = mode == 1 ? NormalizationMode::column : NormalizationMode::none;
    model.norm.global_mean = get<double>(in);
    model.user_factors.resize(n_users, rank);
    model.item_factors.resize(rank, n_items);
    get_doubles(in, model.user_factors.data(), static_cast<std::size_t>(model.user_factors.size()));
    get_doubles(in, model.item_factors.data(), static_cast<std::size_t>(model.item_factors.size()));
    model.norm.column_means.resize(static_cast<std::size_t>(n_items));
    model.norm.column_stds.resize(static_cast<std::size_t>(n_items));
    get_doubles(in, model.norm.column_means.data(), model.norm.column_means.size());
    get_doubles(in, model.norm.column_stds.data(), model.norm.column_stds.size());
    return model;
}

void save_factor_model(const FactorModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    save_factor_model(model, out);
}

FactorModel load_factor_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return load_factor_model(in);
}

}  // namespace cfblend
