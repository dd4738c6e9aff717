#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fqgan/train.hpp"

namespace fqgan {

/// Bad key, unparseable value, or a configuration that fails validation.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Config keys in file order; each names a TrainConfig field.
const std::vector<std::string>& config_keys();

/// Sets one field from its textual value.
void apply_setting(TrainConfig& config, std::string_view key, std::string_view value);

/// Parses `key=value` lines on top of `base`. Blank lines and '#' comments are
/// ignored; unknown keys are errors.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

/// Every key with its effective value; parse_config of this text reproduces
/// `config` exactly (doubles use shortest round-trip formatting).
std::string to_config_text(const TrainConfig& config);

/// Textual value of one key.
std::string config_value(const TrainConfig& config, std::string_view key);

}  // namespace fqgan
