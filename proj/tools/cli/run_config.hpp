#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalecamo/raster_image.hpp"

namespace scalecamo::cli {

using Json = nlohmann::ordered_json;

/// One object of the config file. Every getter marks its key as used;
/// finish() rejects whatever was never asked for.
class ConfigBlock {
 public:
  ConfigBlock(const Json* node, std::string where);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  long get_int(const std::string& key, long fallback);
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  Size get_size(const std::string& key, Size fallback);
  std::vector<Size> get_sizes(const std::string& key, std::vector<Size> fallback);
  /// A single string counts as a one-element list.
  std::vector<std::string> get_strings(const std::string& key, std::vector<std::string> fallback);
  /// Array of objects; each element becomes a child block.
  std::vector<ConfigBlock> get_list(const std::string& key);
  ConfigBlock child(const std::string& key);

  /// Throws ParseFailure naming the first unknown key.
  void finish() const;

 private:
  const Json& fetch(const std::string& key);

  const Json* node_;
  std::string where_;
  std::set<std::string> used_;
};

struct LoadedConfig {
  Json root = Json::object();
  std::filesystem::path base_dir;  // relative paths in the file resolve here
};

/// Empty path gives an empty config. Throws ParseFailure / IOFailure, and
/// rejects top-level keys outside the known globals and blocks.
LoadedConfig load_config(const std::filesystem::path& path);

/// "HxW" or a single number for a square.
Size parse_size(const std::string& text);
Json to_json(Size size);

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& path);

}  // namespace scalecamo::cli
