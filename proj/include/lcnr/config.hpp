#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcnr/csv.hpp"
#include "lcnr/errors.hpp"

namespace lcnr::config {

// Flat `key = value` files, one pair per line, '#' comments.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path);
    Config cfg;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view sv = csv::trim(line);
      if (sv.empty() || sv.front() == '#') continue;
      const auto eq = sv.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value', got '" + std::string(sv) + "'");
      std::string key(csv::trim(sv.substr(0, eq)));
      std::string value(csv::trim(sv.substr(eq + 1)));
      if (key.empty()) throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return csv::parse_double(it->second);
    } catch (const ParseError&) {
      throw ConfigError("config key '" + key + "': not a number: '" + it->second + "'");
    }
  }

  long get_long(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return csv::parse_long(it->second);
    } catch (const ParseError&) {
      throw ConfigError("config key '" + key + "': not an integer: '" + it->second + "'");
    }
  }

  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const auto& cell : csv::split_row(it->second)) {
      if (cell.empty()) continue;
      try {
        out.push_back(csv::parse_double(cell));
      } catch (const ParseError&) {
        throw ConfigError("config key '" + key + "': not a number: '" + cell + "'");
      }
    }
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lcnr::config
