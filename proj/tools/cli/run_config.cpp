#include "run_config.hpp"

#include <fstream>

#include "scalecamo/error.hpp"

namespace scalecamo::cli {

namespace {

const std::set<std::string> kTopLevel = {"seed",   "output_dir", "log_level", "threads",
                                         "attack", "poison",     "scan",      "defend",
                                         "audit",  "fixtures",   "operator"};

[[noreturn]] void fail(const std::string& message) {
  throw Error(ErrorCode::parse_failure, "config: " + message);
}

Size size_from(const Json& v, const std::string& where) {
  if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer()) {
    return {v[0].get<int>(), v[1].get<int>()};
  }
  if (v.is_number_integer()) return {v.get<int>(), v.get<int>()};
  if (v.is_string()) return parse_size(v.get<std::string>());
  fail(where + ": expected [height, width], an integer or \"HxW\"");
}

}  // namespace

ConfigBlock::ConfigBlock(const Json* node, std::string where)
    : node_(node), where_(std::move(where)) {
  if (node_ && !node_->is_null() && !node_->is_object()) fail(where_ + " must be an object");
}

bool ConfigBlock::has(const std::string& key) const {
  return node_ && node_->is_object() && node_->contains(key) && !(*node_)[key].is_null();
}

const Json& ConfigBlock::fetch(const std::string& key) {
  used_.insert(key);
  return (*node_)[key];
}

std::string ConfigBlock::get_string(const std::string& key, const std::string& fallback) {
  used_.insert(key);
  if (!has(key)) return fallback;
  const Json& v = fetch(key);
  if (!v.is_string()) fail(where_ + "." + key + ": expected a string");
  return v.get<std::string>();
}

double ConfigBlock::get_double(const std::string& key, double fallback) {
  used_.insert(key);
  if (!has(key)) return fallback;
  const Json& v = fetch(key);
  if (!v.is_number()) fail(where_ + "." + key + ": expected a number");
  return v.get<double>();
}

long ConfigBlock::get_int(const std::string& key, long fallback) {
  used_.insert(key);
  if (!has(key)) return fallback;
  const Json& v = fetch(key);
  if (!v.is_number_integer()) fail(where_ + "." + key + ": expected an integer");
  return v.get<long>();
}

std::uint64_t ConfigBlock::get_uint(const std::string& key, std::uint64_t fallback) {
  used_.insert(key);
  if (!has(key)) return fallback;
  const Json& v = fetch(key);
  if (!v.is_number_unsigned()) fail(where_ + "." + key + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

bool ConfigBlock::get_bool(const std::string& key, bool fallback) {
  used_.insert(key);
  if (!has(key)) return fallback;
  const Json& v = fetch(key);
  if (!v.is_boolean()) fail(where_ + "." + key + ": expected true or false");
  return v.get<bool>();
}

Size ConfigBlock::get_size(const std::string& key, Size fallback) {
  used_.insert(key);
  if (!has(key)) return fallback;
  return size_from(fetch(key), where_ + "." + key);
}

std::vector<Size> ConfigBlock::get_sizes(const std::string& key, std::vector<Size> fallback) {
  used_.insert(key);
  if (!has(key)) return fallback;
  const Json& v = fetch(key);
  if (!v.is_array()) fail(where_ + "." + key + ": expected a list of sizes");
  std::vector<Size> out;
  for (const auto& e : v) out.push_back(size_from(e, where_ + "." + key));
  return out;
}

std::vector<std::string> ConfigBlock::get_strings(const std::string& key,
                                                  std::vector<std::string> fallback) {
  used_.insert(key);
  if (!has(key)) return fallback;
  const Json& v = fetch(key);
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) fail(where_ + "." + key + ": expected a list of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) fail(where_ + "." + key + ": expected a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::vector<ConfigBlock> ConfigBlock::get_list(const std::string& key) {
  used_.insert(key);
  std::vector<ConfigBlock> out;
  if (!has(key)) return out;
  const Json& v = fetch(key);
  if (!v.is_array()) fail(where_ + "." + key + ": expected a list");
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.emplace_back(&v[i], where_ + "." + key + "[" + std::to_string(i) + "]");
    if (!v[i].is_object()) fail(where_ + "." + key + "[" + std::to_string(i) + "] must be an object");
  }
  return out;
}

ConfigBlock ConfigBlock::child(const std::string& key) {
  used_.insert(key);
  return ConfigBlock(has(key) ? &(*node_)[key] : nullptr, where_.empty() ? key : where_ + "." + key);
}

void ConfigBlock::finish() const {
  if (!node_ || !node_->is_object()) return;
  for (const auto& [key, value] : node_->items()) {
    if (!used_.count(key)) fail("unknown key '" + (where_.empty() ? key : where_ + "." + key) + "'");
  }
}

LoadedConfig load_config(const std::filesystem::path& path) {
  LoadedConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot read config " + path.string());
  try {
    cfg.root = Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(path.string() + ": " + e.what());
  }
  if (!cfg.root.is_object()) fail(path.string() + ": top level must be an object");
  for (const auto& [key, value] : cfg.root.items()) {
    if (!kTopLevel.count(key)) fail("unknown key '" + key + "'");
  }
  cfg.base_dir = path.parent_path();
  return cfg;
}

Size parse_size(const std::string& text) {
  const auto x = text.find('x');
  try {
    std::size_t used = 0;
    if (x == std::string::npos) {
      const int v = std::stoi(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return {v, v};
    }
    const int h = std::stoi(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    const std::string rest = text.substr(x + 1);
    const int w = std::stoi(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    return {h, w};
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::parse_failure, "bad size '" + text + "', expected HxW");
  }
}

Json to_json(Size size) { return Json::array({size.height, size.width}); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace scalecamo::cli
