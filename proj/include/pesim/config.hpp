#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pesim/harness.hpp"

namespace pesim {

inline constexpr int kConfigSchemaVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the key-value subset we use: `[section]` headers, `key = value` with numbers,
/// booleans, quoted strings, inf/nan and single-line arrays, `#` comments.
/// Returns a JSON object of sections. Throws ConfigError with a line number.
nlohmann::json parse_kv_text(const std::string& text);

/// Applies a parsed document onto the defaults. Requires schema_version; rejects unknown
/// sections and keys and values of the wrong type.
RolloutSpec spec_from_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const RolloutSpec& spec);

/// Key-value text of every setting, accepted by parse_config_text.
std::string spec_to_text(const RolloutSpec& spec);

/// `.json` files are read as JSON, anything else as key-value text.
RolloutSpec load_config(const std::filesystem::path& path);
RolloutSpec parse_config_text(const std::string& text);

/// Overrides one gain addressed as "<section>.<field>" (sections apf, angelani, janosov, evader).
void set_gain(BaselineGains& gains, const std::string& key, double value);

/// Reads only the gain sections of a config file, starting from the built-in defaults.
BaselineGains load_gains(const std::filesystem::path& path);

}  // namespace pesim
