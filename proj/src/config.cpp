#include "cfblend/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <set>

#include "cfblend/errors.hpp"

extern char** environ;

namespace cfblend {

namespace {

const std::set<std::string> kRunKeys = {"data",           "preset",  "split",   "seed",      "out-metrics",
                                        "out-submission", "queries", "out-model", "no-timing"};

const std::set<std::string> kOverrideKeys = {"rank",  "lambda", "iters",    "eta",     "epochs",
                                             "k",     "beta",   "user-weight", "alpha", "sigma",
                                             "max-iter", "epsilon", "burn-in", "method", "refit", "members"};

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace

bool is_setting_key(const std::string& key) { return kRunKeys.contains(key) || kOverrideKeys.contains(key); }

bool is_override_key(const std::string& key) { return kOverrideKeys.contains(key); }

Settings parse_settings(std::istream& in) {
    Settings out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(number, "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (!is_setting_key(key)) throw ParseError(number, "unknown key '" + key + "'");
        out[key] = value;
    }
    return out;
}

Settings load_settings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    return parse_settings(in);
}

Settings settings_from_environment() {
    Settings out;
    const std::string prefix = kEnvPrefix;
    for (char** env = environ; env != nullptr && *env != nullptr; ++env) {
        const std::string entry = *env;
        if (entry.rfind(prefix, 0) != 0) continue;
        const auto eq = entry.find('=');
        std::string key = entry.substr(prefix.size(), eq - prefix.size());
        std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) {
            return c == '_' ? '-' : static_cast<char>(std::tolower(c));
        });
        if (!is_setting_key(key)) throw ConfigError("unknown environment setting " + entry.substr(0, eq));
        out[key] = eq == std::string::npos ? "" : entry.substr(eq + 1);
    }
    return out;
}

void merge_settings(Settings& base, const Settings& overlay) {
    for (const auto& [k, v] : overlay) base[k] = v;
}

void apply_settings(const Settings& settings, ExperimentConfig& cfg) {
    for (const auto& [key, value] : settings) {
        if (key == "data") {
            cfg.data = value;
        } else if (key == "preset") {
            cfg.preset = value;
        } else if (key == "split") {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc() || ptr != value.data() + value.size()) {
                throw ConfigError("split: expected a number, got '" + value + "'");
            }
            cfg.split = v;
        } else if (key == "seed") {
            std::uint64_t v = 0;
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc() || ptr != value.data() + value.size()) {
                throw ConfigError("seed: expected a non-negative integer, got '" + value + "'");
            }
            cfg.seed = v;
        } else if (key == "out-metrics") {
            cfg.out_metrics = value;
        } else if (key == "out-submission") {
            cfg.out_submission = value;
        } else if (key == "queries") {
            cfg.queries = value;
        } else if (key == "out-model") {
            cfg.out_model = value;
        } else if (key == "no-timing") {
            cfg.timing = !parse_bool(key, value);
        } else if (is_override_key(key)) {
            cfg.overrides[key] = value;
        } else {
            throw ConfigError("unknown setting '" + key + "'");
        }
    }
}

}  // namespace cfblend
