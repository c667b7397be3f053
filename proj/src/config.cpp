#include "scg/config.hpp"

#include <charconv>
#include <fstream>

#include "scg/error.hpp"
#include "scg/format.hpp"

namespace scg {

std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& config) {
  auto out = to_key_values(config.train);
  out.emplace_back("train_fraction", format_double(config.train_fraction));
  out.emplace_back("split_seed", std::to_string(config.split_seed));
  out.emplace_back("normalize", config.normalize ? "true" : "false");
  return out;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  if (apply_setting(config.train, key, value)) return;
  if (key == "train_fraction") {
    double fraction = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), fraction);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw ConfigError("invalid value '" + value + "' for train_fraction");
    }
    config.train_fraction = fraction;
  } else if (key == "split_seed") {
    std::uint64_t seed = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw ConfigError("invalid value '" + value + "' for split_seed");
    }
    config.split_seed = seed;
  } else if (key == "normalize") {
    if (value == "true" || value == "1") {
      config.normalize = true;
    } else if (value == "false" || value == "0") {
      config.normalize = false;
    } else {
      throw ConfigError("invalid value '" + value + "' for normalize");
    }
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in, const std::string& source) {
  const auto trim = [](const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string();
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
  };
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  for (const auto& [key, value] : parse_key_values(in, path.string())) {
    try {
      apply_setting(config, key, value);
    } catch (const ConfigError& err) {
      throw ConfigError(path.string() + ": " + err.what());
    }
  }
}

}  // namespace scg
