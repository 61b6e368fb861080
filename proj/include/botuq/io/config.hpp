#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace botuq::io {

using ConfigMap = std::map<std::string, std::string>;

// Flat key=value file: '#' starts a comment, blank lines are skipped, keys
// and values are trimmed.  Duplicate keys are an error, as is any line
// without '='.
ConfigMap read_config(const std::string& path);

// Rejects keys outside `allowed`, naming the offender.
void require_known(const ConfigMap& config, const std::vector<std::string>& allowed);

std::string config_string(const ConfigMap& config, const std::string& key,
                          std::string fallback);
std::int64_t config_int(const ConfigMap& config, const std::string& key,
                        std::int64_t fallback);
std::uint64_t config_u64(const ConfigMap& config, const std::string& key,
                         std::uint64_t fallback);
double config_double(const ConfigMap& config, const std::string& key, double fallback);
bool config_bool(const ConfigMap& config, const std::string& key, bool fallback);

}  // namespace botuq::io
