#pragma once

// Reader for the experiment files: a TOML subset with [section] headers,
// key = value lines, '#' comments, and values that are numbers, booleans,
// "strings" or (nested) [arrays]. Every value remembers its source line so
// schema errors can point at it.

#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sgpg/linalg.hpp"

namespace sgpg {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, int line, const std::string& msg);
  const std::string& path() const { return path_; }
  int line() const { return line_; }

 private:
  std::string path_;
  int line_;
};

struct ConfigValue {
  using Array = std::vector<ConfigValue>;
  std::variant<double, bool, std::string, Array> data;
  int line = 0;

  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }
};

class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  // Keys are "section.name"; top-level keys have no dot.
  const ConfigValue& at(const std::string& key) const;

  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  long long integer(const std::string& key) const;
  long long integer(const std::string& key, long long fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  Vector vector(const std::string& key) const;
  Matrix matrix(const std::string& key) const;
  std::vector<std::string> strings(const std::string& key) const;

  // Keys present in `section` that are not in `known`; used to reject typos.
  void reject_unknown(const std::string& section, const std::vector<std::string>& known) const;
  std::vector<std::string> keys() const;
  const std::string& source() const { return source_; }

  void set(const std::string& key, ConfigValue v) { values_[key] = std::move(v); }

 private:
  std::map<std::string, ConfigValue> values_;
  std::string source_;
};

}  // namespace sgpg
