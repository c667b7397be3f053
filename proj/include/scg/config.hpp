#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "scg/train.hpp"

namespace scg {

// Everything a run needs besides the dataset itself.
struct RunConfig {
  TrainConfig train;
  double train_fraction = 0.1;
  std::uint64_t split_seed = 1;
  bool normalize = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& config);
// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// "key = value" lines; '#' starts a comment, blank lines are ignored.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in, const std::string& source);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

}  // namespace scg
