#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "cfblend/experiment.hpp"

namespace cfblend {

// Flat settings keyed by CLI long-flag name ("seed", "out-metrics", "rank").
using Settings = std::map<std::string, std::string>;

inline constexpr const char* kEnvPrefix = "CFBLEND_";

bool is_setting_key(const std::string& key);
bool is_override_key(const std::string& key);

// `key = value` lines; `#` starts a comment, blank lines are skipped.
// Unknown keys and malformed lines raise ParseError with the line number.
Settings parse_settings(std::istream& in);
Settings load_settings(const std::filesystem::path& path);

// CFBLEND_OUT_METRICS=... maps to "out-metrics". Unknown CFBLEND_ variables
// raise ConfigError.
Settings settings_from_environment();

// Later entries win.
void merge_settings(Settings& base, const Settings& overlay);

// Copies recognized settings into `cfg`; override keys go to cfg.overrides.
void apply_settings(const Settings& settings, ExperimentConfig& cfg);

}  // namespace cfblend
