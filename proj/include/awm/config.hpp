#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "awm/errors.hpp"
#include "awm/rng.hpp"

namespace awm {

// Flat key-value configuration with INI-style sections: a line "key value"
// under "[watermark]" becomes "watermark.key". Values run to end of line, so
// paths with spaces work. '#' starts a comment line.
class Config {
 public:
  Config() = default;

  static Config from_lines(const std::vector<std::string>& lines) {
    Config c;
    std::string prefix;
    for (size_t ln = 0; ln < lines.size(); ++ln) {
      std::string s = trim(lines[ln]);
      if (s.empty() || s[0] == '#') continue;
      if (s.front() == '[') {
        if (s.back() != ']' || s.size() < 3)
          throw IoError("bad section header at config line " + std::to_string(ln + 1));
        prefix = s.substr(1, s.size() - 2) + ".";
        continue;
      }
      const size_t sp = s.find_first_of(" \t");
      if (sp == std::string::npos)
        throw IoError("config line " + std::to_string(ln + 1) + " has no value: " + s);
      c.values_[prefix + s.substr(0, sp)] = trim(s.substr(sp + 1));
    }
    return c;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return from_lines(lines);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw IoError("missing required config key: " + key);
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_double(it->second, key);
  }

  uint64_t get_u64(const std::string& key, uint64_t fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_u64(it->second, key);
  }

  size_t get_size(const std::string& key, size_t fallback) const {
    return static_cast<size_t>(get_u64(key, fallback));
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw IoError("config key " + key + " is not a boolean: " + v);
  }

  /// Hash of the full normalized key-value state (map order, so canonical).
  uint64_t content_hash() const {
    uint64_t h = kFnvOffsetBasis;
    for (const auto& [k, v] : values_) {
      h = fnv1a64(k, h);
      h = fnv1a64("=", h);
      h = fnv1a64(v, h);
      h = fnv1a64("\n", h);
    }
    return h;
  }

 private:
  static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  static double parse_double(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
      throw IoError("config key " + key + " is not a number: " + v);
    return x;
  }

  static uint64_t parse_u64(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
      throw IoError("config key " + key + " is not an integer: " + v);
    return static_cast<uint64_t>(x);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace awm
