#include "botuq/io/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "botuq/errors.hpp"

namespace botuq::io {

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const ConfigMap& config, const std::string& key, T fallback) {
  auto it = config.find(key);
  if (it == config.end()) return fallback;
  const std::string& text = it->second;
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ValidationError("config key '" + key + "': cannot parse '" + text + "'");
  return value;
}

}  // namespace

ConfigMap read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  ConfigMap config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string text = trim(line);
    if (text.empty()) continue;
    auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": expected key=value");
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (key.empty())
      throw ValidationError(path + ":" + std::to_string(line_no) + ": empty key");
    if (!config.emplace(key, value).second)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": duplicate key '" +
                            key + "'");
  }
  return config;
}

void require_known(const ConfigMap& config, const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : config)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ValidationError("unknown config key '" + key + "'");
}

std::string config_string(const ConfigMap& config, const std::string& key,
                          std::string fallback) {
  auto it = config.find(key);
  return it == config.end() ? std::move(fallback) : it->second;
}

std::int64_t config_int(const ConfigMap& config, const std::string& key,
                        std::int64_t fallback) {
  return parse_number<std::int64_t>(config, key, fallback);
}

std::uint64_t config_u64(const ConfigMap& config, const std::string& key,
                         std::uint64_t fallback) {
  return parse_number<std::uint64_t>(config, key, fallback);
}

double config_double(const ConfigMap& config, const std::string& key, double fallback) {
  auto it = config.find(key);
  if (it == config.end()) return fallback;
  const std::string& text = it->second;
  try {
    std::size_t used = 0;
    double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "': cannot parse '" + text + "'");
  }
}

bool config_bool(const ConfigMap& config, const std::string& key, bool fallback) {
  auto it = config.find(key);
  if (it == config.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "on") return true;
  if (it->second == "false" || it->second == "0" || it->second == "off") return false;
  throw ValidationError("config key '" + key + "': expected a boolean, got '" +
                        it->second + "'");
}

}  // namespace botuq::io
