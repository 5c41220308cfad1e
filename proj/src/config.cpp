#include "sgpg/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sgpg {

namespace {

std::string where(const std::string& path, int line, const std::string& msg) {
  std::ostringstream os;
  if (line > 0) os << "line " << line << ": ";
  if (!path.empty()) os << path << ": ";
  os << msg;
  return os.str();
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  std::map<std::string, ConfigValue> run() {
    std::map<std::string, ConfigValue> out;
    std::string section;
    while (!eof()) {
      skip_blank();
      if (eof()) break;
      const char c = peek();
      if (c == '\n') {
        advance();
        continue;
      }
      if (c == '#') {
        skip_comment();
        continue;
      }
      if (c == '[') {
        advance();
        skip_inline_space();
        section = bare_key("section name");
        skip_inline_space();
        expect(']');
        end_of_line();
        continue;
      }
      const int key_line = line_;
      const std::string key = bare_key("key");
      skip_inline_space();
      expect('=');
      skip_inline_space();
      ConfigValue v = value();
      end_of_line();
      const std::string full = section.empty() ? key : section + "." + key;
      if (out.count(full)) throw ConfigError(full, key_line, "duplicate key");
      out.emplace(full, std::move(v));
    }
    return out;
  }

 private:
  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  void advance() {
    if (text_[pos_] == '\n') ++line_;
    ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError("", line_, msg); }

  void expect(char c) {
    if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
    advance();
  }

  void skip_inline_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) advance();
  }
  void skip_blank() { skip_inline_space(); }
  void skip_comment() {
    while (!eof() && peek() != '\n') advance();
  }
  // Inside arrays newlines and comments are whitespace.
  void skip_array_space() {
    for (;;) {
      skip_inline_space();
      if (eof()) return;
      if (peek() == '\n') {
        advance();
      } else if (peek() == '#') {
        skip_comment();
      } else {
        return;
      }
    }
  }

  void end_of_line() {
    skip_inline_space();
    if (eof()) return;
    if (peek() == '#') skip_comment();
    if (eof()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    advance();
  }

  std::string bare_key(const char* what) {
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                      peek() == '-' || peek() == '.'))
      advance();
    if (pos_ == start) fail(std::string("expected ") + what);
    return text_.substr(start, pos_ - start);
  }

  ConfigValue value() {
    ConfigValue v;
    v.line = line_;
    if (eof()) fail("missing value");
    const char c = peek();
    if (c == '"') {
      v.data = quoted();
    } else if (c == '[') {
      v.data = array();
    } else if (text_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      v.data = true;
    } else if (text_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      v.data = false;
    } else {
      v.data = number();
    }
    return v;
  }

  std::string quoted() {
    expect('"');
    std::string s;
    for (;;) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = peek();
      advance();
      if (c == '"') break;
      if (c == '\\') {
        if (eof()) fail("unterminated escape");
        const char e = peek();
        advance();
        switch (e) {
          case 'n':
            s += '\n';
            break;
          case 't':
            s += '\t';
            break;
          case '"':
          case '\\':
            s += e;
            break;
          default:
            fail(std::string("unsupported escape \\") + e);
        }
      } else {
        s += c;
      }
    }
    return s;
  }

  ConfigValue::Array array() {
    expect('[');
    ConfigValue::Array items;
    skip_array_space();
    if (!eof() && peek() == ']') {
      advance();
      return items;
    }
    for (;;) {
      skip_array_space();
      items.push_back(value());
      skip_array_space();
      if (eof()) fail("unterminated array");
      if (peek() == ',') {
        advance();
        skip_array_space();
        if (!eof() && peek() == ']') {
          advance();
          return items;
        }
        continue;
      }
      if (peek() == ']') {
        advance();
        return items;
      }
      fail("expected ',' or ']' in array");
    }
  }

  double number() {
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' ||
                      peek() == '-' || peek() == '.' || peek() == '_'))
      advance();
    std::string tok = text_.substr(start, pos_ - start);
    if (tok.empty()) fail("expected a value");
    std::string digits;
    for (std::size_t i = 0; i < tok.size(); ++i) {
      if (tok[i] == '_') {
        const bool ok = i > 0 && i + 1 < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i - 1])) &&
                        std::isdigit(static_cast<unsigned char>(tok[i + 1]));
        if (!ok) fail("misplaced '_' in number '" + tok + "'");
        continue;
      }
      digits += tok[i];
    }
    if (digits == "inf" || digits == "+inf") return INFINITY;
    if (digits == "-inf") return -INFINITY;
    const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(first, digits.data() + digits.size(), x);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) fail("invalid value '" + tok + "'");
    return x;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

ConfigError::ConfigError(const std::string& path, int line, const std::string& msg)
    : std::runtime_error(where(path, line, msg)), path_(path), line_(line) {}

Config Config::parse(const std::string& text) {
  Config c;
  c.values_ = Parser(text).run();
  c.source_ = text;
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot open config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

const ConfigValue& Config::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, 0, "missing required key");
  return it->second;
}

double Config::number(const std::string& key) const {
  const ConfigValue& v = at(key);
  if (!v.is_number()) throw ConfigError(key, v.line, "expected a number");
  return std::get<double>(v.data);
}

double Config::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

long long Config::integer(const std::string& key) const {
  const ConfigValue& v = at(key);
  const double x = number(key);
  if (!(std::floor(x) == x) || std::abs(x) > 9.0e15) throw ConfigError(key, v.line, "expected an integer");
  return static_cast<long long>(x);
}

long long Config::integer(const std::string& key, long long fallback) const {
  return has(key) ? integer(key) : fallback;
}

bool Config::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const ConfigValue& v = at(key);
  if (!v.is_bool()) throw ConfigError(key, v.line, "expected true or false");
  return std::get<bool>(v.data);
}

std::string Config::string(const std::string& key) const {
  const ConfigValue& v = at(key);
  if (!v.is_string()) throw ConfigError(key, v.line, "expected a quoted string");
  return std::get<std::string>(v.data);
}

std::string Config::string(const std::string& key, const std::string& fallback) const {
  return has(key) ? string(key) : fallback;
}

Vector Config::vector(const std::string& key) const {
  const ConfigValue& v = at(key);
  if (!v.is_array()) throw ConfigError(key, v.line, "expected an array of numbers");
  Vector out;
  for (const ConfigValue& e : std::get<ConfigValue::Array>(v.data)) {
    if (!e.is_number()) throw ConfigError(key, e.line, "expected an array of numbers");
    out.push_back(std::get<double>(e.data));
  }
  return out;
}

Matrix Config::matrix(const std::string& key) const {
  const ConfigValue& v = at(key);
  if (!v.is_array()) throw ConfigError(key, v.line, "expected an array of rows");
  const auto& rows = std::get<ConfigValue::Array>(v.data);
  if (rows.empty()) throw ConfigError(key, v.line, "matrix has no rows");
  std::vector<Vector> out;
  for (const ConfigValue& r : rows) {
    if (!r.is_array()) throw ConfigError(key, r.line, "expected an array of rows");
    Vector row;
    for (const ConfigValue& e : std::get<ConfigValue::Array>(r.data)) {
      if (!e.is_number()) throw ConfigError(key, e.line, "matrix entries must be numbers");
      row.push_back(std::get<double>(e.data));
    }
    if (row.size() != std::get<ConfigValue::Array>(rows.front().data).size())
      throw ConfigError(key, r.line, "ragged matrix rows");
    out.push_back(std::move(row));
  }
  return Matrix::from_rows(out, out.front().size());
}

std::vector<std::string> Config::strings(const std::string& key) const {
  const ConfigValue& v = at(key);
  if (!v.is_array()) throw ConfigError(key, v.line, "expected an array of strings");
  std::vector<std::string> out;
  for (const ConfigValue& e : std::get<ConfigValue::Array>(v.data)) {
    if (!e.is_string()) throw ConfigError(key, e.line, "expected an array of strings");
    out.push_back(std::get<std::string>(e.data));
  }
  return out;
}

void Config::reject_unknown(const std::string& section,
                            const std::vector<std::string>& known) const {
  const std::string prefix = section + ".";
  for (const auto& [key, v] : values_) {
    if (key.compare(0, prefix.size(), prefix) != 0) continue;
    const std::string name = key.substr(prefix.size());
    bool ok = false;
    for (const std::string& k : known) ok |= k == name;
    if (!ok) throw ConfigError(key, v.line, "unknown key");
  }
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (const auto& kv : values_) out.push_back(kv.first);
  return out;
}

}  // namespace sgpg
