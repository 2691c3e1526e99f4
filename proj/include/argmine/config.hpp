#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace argmine {

/// `key = value` lines; '#' starts a comment, blank lines are ignored.
/// Later keys override earlier ones.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in, std::string_view source = "config");
  static KeyValues load(const std::string& path);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool contains(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, std::string fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Canonical `key=value` text, sorted by key.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> values_;
  std::string source_;
};

}  // namespace argmine
