#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "curriculum/error.hpp"

namespace curriculum {

namespace detail {

inline std::string_view trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Flat `key = value` configuration. Blank lines and lines starting with '#'
// are ignored. Keys outside the allowed set are rejected at parse time.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::set<std::string>& allowed,
                              const std::string& source = "<config>") {
    KeyValueConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto text = detail::trim(line);
      if (text.empty() || text.front() == '#') continue;
      auto eq = text.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorKind::usage, source + ":" + std::to_string(line_no) +
                                          ": expected 'key = value'");
      }
      std::string key(detail::trim(text.substr(0, eq)));
      std::string value(detail::trim(text.substr(eq + 1)));
      if (!allowed.contains(key)) {
        throw Error(ErrorKind::usage, source + ":" + std::to_string(line_no) +
                                          ": unknown key '" + key + "'");
      }
      config.values_[key] = value;
    }
    return config;
  }

  static KeyValueConfig load(const std::string& path,
                             const std::set<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::usage, "cannot open config file " + path);
    return parse(in, allowed, path);
  }

  bool contains(const std::string& key) const { return values_.contains(key); }

  std::optional<std::string> get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> get_double(const std::string& key) const {
    auto raw = get_string(key);
    if (!raw) return std::nullopt;
    try {
      std::size_t used = 0;
      double v = std::stod(*raw, &used);
      if (used == raw->size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::usage, "config key '" + key + "' is not a number: " + *raw);
  }

  std::optional<std::int64_t> get_int(const std::string& key) const {
    auto raw = get_string(key);
    if (!raw) return std::nullopt;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
    if (ec != std::errc() || ptr != raw->data() + raw->size()) {
      throw Error(ErrorKind::usage, "config key '" + key + "' is not an integer: " + *raw);
    }
    return v;
  }

  std::optional<bool> get_bool(const std::string& key) const {
    auto raw = get_string(key);
    if (!raw) return std::nullopt;
    std::string v = *raw;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(ErrorKind::usage, "config key '" + key + "' is not a boolean: " + *raw);
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace curriculum
