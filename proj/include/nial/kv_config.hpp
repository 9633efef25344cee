#pragma once

#include <string>
#include <utility>
#include <vector>

namespace nial {

// Flat `key = value` text config. `#` starts a full-line comment, blank lines
// are skipped, later duplicates override earlier ones. Typed getters mark keys
// as read so the caller can reject typos via unread_keys().
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse_text(const std::string& text);
  static KvConfig parse_file(const std::string& path);

  // CLI override; replaces an existing value or appends.
  void set(const std::string& key, std::string value);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Keys present but never fetched by any getter.
  std::vector<std::string> unread_keys() const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  const std::string* find(const std::string& key) const;

  std::vector<std::pair<std::string, std::string>> entries_;
  mutable std::vector<bool> read_;
};

// Shortest-round-trip decimal text for a double (17 significant digits never
// needed more); used for every double the library serializes.
std::string format_double(double v);

long long parse_int(const std::string& text, const std::string& what);
double parse_double(const std::string& text, const std::string& what);

}  // namespace nial
