#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace dualres {

/// Flat `key = value` configuration. Lines starting with '#' are comments.
/// Every key must be consumed by a getter before `ensure_consumed()`, so
/// typos surface as ConfigError instead of being silently ignored.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse(const std::string& text, const std::string& source = "config");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  long long get_int(const std::string& key, long long fallback);
  bool get_bool(const std::string& key, bool fallback);

  std::string require_string(const std::string& key);
  long long require_int(const std::string& key);

  void ensure_consumed() const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  const std::string* find(const std::string& key);

  std::string source_ = "config";
  std::map<std::string, std::string> entries_;
  std::set<std::string> consumed_;
};

}  // namespace dualres
