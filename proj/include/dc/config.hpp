#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dc/trainer.hpp"

namespace dc {

// Everything cmd_train needs: the trainer configuration plus file locations.
struct RunConfig {
  TrainConfig train;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> truth;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> warm_start;
  // Keys under "run." (written into manifests); kept verbatim, never interpreted.
  std::map<std::string, std::string> run_keys;
};

// Names of every accepted key, in the order they are written.
const std::vector<std::string>& config_keys();

// Sets one key from its text value. Throws ConfigError on an unknown key or a
// malformed value.
void set_config_key(RunConfig& cfg, std::string_view key, std::string_view value);

// Flat "key = value" text, one entry per line; '#' starts a comment. Errors
// carry the 1-based line number.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// All keys with values that parse back to the same configuration.
std::string format_config(const RunConfig& cfg);

}  // namespace dc
