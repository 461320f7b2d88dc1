#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ncdre {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plain-text `key = value` file. '#' starts a comment; keys may repeat and
/// keep their order; the last occurrence wins for scalar lookups.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string source = "<memory>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool empty() const { return entries_.empty(); }
  bool has(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  std::vector<std::string> get_all(std::string_view key) const;

  std::string get_string(std::string_view key, std::string fallback) const;
  long long get_int(std::string_view key, long long fallback) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  /// Throws on any key outside `known`.
  void require_known(const std::set<std::string>& known) const;

  /// Later entries override earlier ones with the same key.
  void set(std::string key, std::string value);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::string source_;
};

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_whitespace(std::string_view s);

}  // namespace ncdre
