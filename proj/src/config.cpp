#include "argmine/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "argmine/errors.hpp"

namespace argmine {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in, std::string_view source) {
  KeyValues kv;
  kv.source_ = std::string(source);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(kv.source_ + ":" + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError(kv.source_ + ":" + std::to_string(lineno) + ": empty key");
    kv.values_[std::string(key)] = std::string(trim(s.substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse(in, path);
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValues::get_string(const std::string& key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : fallback;
}

namespace {

template <typename T>
T parse_number(const std::string& source, const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(source + ": '" + key + "' is not a valid number: " + text);
  return value;
}

}  // namespace

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  auto v = get(key);
  return v ? parse_number<long long>(source_, key, *v) : fallback;
}

std::uint64_t KeyValues::get_uint(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  return v ? parse_number<std::uint64_t>(source_, key, *v) : fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::istringstream in(*v);
  double d;
  in >> d;
  if (!in || !in.eof()) throw ConfigError(source_ + ": '" + key + "' is not a valid number: " + *v);
  return d;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError(source_ + ": '" + key + "' must be true or false, got " + *v);
}

std::string KeyValues::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

}  // namespace argmine
