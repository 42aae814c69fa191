// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/toml.hpp"

#include <cctype>
#include <cstdlib>

namespace tlc::toml {

namespace {

struct Cursor {
  const std::string& s;
  std::size_t pos = 0;
  int line = 1;

  bool done() const { return pos >= s.size(); }
  char peek() const { return s[pos]; }
  char get() { return s[pos++]; }
  void skip_ws() {
    while (!done() && (peek() == ' ' || peek() == '\t')) ++pos;
  }
};

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string parse_bare_key(Cursor& c) {
  std::string key;
  while (!c.done() && is_bare_key_char(c.peek())) key += c.get();
  if (key.empty()) fail(c.line, "expected a key");
  return key;
}

std::string parse_string_value(Cursor& c) {
  std::string out;
  c.get();  // opening quote
  while (true) {
    if (c.done()) fail(c.line, "unterminated string");
    char ch = c.get();
    if (ch == '"') break;
    if (ch == '\n') fail(c.line, "newline inside string");
    if (ch == '\\') {
      if (c.done()) fail(c.line, "bad escape");
      const char esc = c.get();
      switch (esc) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(c.line, std::string("unsupported escape \\") + esc);
      }
    } else {
      out += ch;
    }
  }
  return out;
}

Value parse_scalar(Cursor& c);

Value parse_array(Cursor& c) {
  Value v;
  v.type = Value::Type::Array;
  v.line = c.line;
  c.get();  // '['
  while (true) {
    c.skip_ws();
    if (c.done()) fail(c.line, "unterminated array");
    if (c.peek() == ']') {
      c.get();
      break;
    }
    v.array.push_back(parse_scalar(c));
    c.skip_ws();
    if (!c.done() && c.peek() == ',') {
      c.get();
      continue;
    }
    if (!c.done() && c.peek() == ']') {
      c.get();
      break;
    }
    fail(c.line, "expected ',' or ']' in array");
  }
  return v;
}

Value parse_scalar(Cursor& c) {
  c.skip_ws();
  if (c.done()) fail(c.line, "expected a value");
  Value v;
  v.line = c.line;
  const char first = c.peek();
  if (first == '"') {
    v.type = Value::Type::String;
    v.str = parse_string_value(c);
    return v;
  }
  if (first == '[') return parse_array(c);

  std::string tok;
  while (!c.done() && c.peek() != ' ' && c.peek() != '\t' && c.peek() != '\n' &&
         c.peek() != '#' && c.peek() != ',' && c.peek() != ']')
    tok += c.get();
  if (tok == "true" || tok == "false") {
    v.type = Value::Type::Boolean;
    v.boolean = tok == "true";
    return v;
  }
  char* end = nullptr;
  if (tok.find('.') == std::string::npos && tok.find('e') == std::string::npos &&
      tok.find('E') == std::string::npos && tok.find("inf") == std::string::npos &&
      tok.find("nan") == std::string::npos) {
    const long long iv = std::strtoll(tok.c_str(), &end, 10);
    if (end != nullptr && *end == '\0' && !tok.empty()) {
      v.type = Value::Type::Integer;
      v.integer = iv;
      return v;
    }
  }
  const double dv = std::strtod(tok.c_str(), &end);
  if (end == nullptr || *end != '\0' || tok.empty())
    fail(v.line, "cannot parse value '" + tok + "'");
  v.type = Value::Type::Float;
  v.number = dv;
  return v;
}

}  // namespace

double Value::as_number() const {
  switch (type) {
    case Type::Float: return number;
    case Type::Integer: return static_cast<double>(integer);
    default: throw ConfigError("config line " + std::to_string(line) + ": expected a number");
  }
}

Table Table::parse(const std::string& text) {
  Table t;
  Cursor c{text};
  std::string section;
  while (!c.done()) {
    c.skip_ws();
    if (c.done()) break;
    const char ch = c.peek();
    if (ch == '\n') {
      c.get();
      ++c.line;
      continue;
    }
    if (ch == '#') {
      while (!c.done() && c.peek() != '\n') c.get();
      continue;
    }
    if (ch == '[') {
      c.get();
      std::string name = parse_bare_key(c);
      while (!c.done() && c.peek() == '.') {
        c.get();
        name += '.' + parse_bare_key(c);
      }
      if (c.done() || c.get() != ']') fail(c.line, "expected ']' after table name");
      section = name;
      continue;
    }
    const int key_line = c.line;
    std::string key = parse_bare_key(c);
    while (!c.done() && c.peek() == '.') {
      c.get();
      key += '.' + parse_bare_key(c);
    }
    c.skip_ws();
    if (c.done() || c.get() != '=') fail(key_line, "expected '=' after key '" + key + "'");
    Value v = parse_scalar(c);
    v.line = key_line;
    c.skip_ws();
    if (!c.done() && c.peek() == '#')
      while (!c.done() && c.peek() != '\n') c.get();
    if (!c.done() && c.peek() != '\n') fail(key_line, "trailing characters after value");
    const std::string full = section.empty() ? key : section + '.' + key;
    if (t.kv_.count(full) != 0) fail(key_line, "duplicate key '" + full + "'");
    t.kv_.emplace(full, std::move(v));
  }
  return t;
}

bool Table::has_section(const std::string& prefix) const {
  const std::string p = prefix + '.';
  auto it = kv_.lower_bound(p);
  return it != kv_.end() && it->first.compare(0, p.size(), p) == 0;
}

const Value& Table::fetch(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("config: missing required key '" + key + "'");
  consumed_.insert(key);
  return it->second;
}

std::string Table::get_string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  return require_string(key);
}

std::string Table::require_string(const std::string& key) const {
  const Value& v = fetch(key);
  if (v.type != Value::Type::String)
    throw ConfigError("config line " + std::to_string(v.line) + ": '" + key +
                      "' must be a string");
  return v.str;
}

double Table::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  return require_double(key);
}

double Table::require_double(const std::string& key) const { return fetch(key).as_number(); }

std::int64_t Table::get_int(const std::string& key, std::int64_t fallback) const {
  if (!has(key)) return fallback;
  return require_int(key);
}

std::int64_t Table::require_int(const std::string& key) const {
  const Value& v = fetch(key);
  if (v.type != Value::Type::Integer)
    throw ConfigError("config line " + std::to_string(v.line) + ": '" + key +
                      "' must be an integer");
  return v.integer;
}

bool Table::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const Value& v = fetch(key);
  if (v.type != Value::Type::Boolean)
    throw ConfigError("config line " + std::to_string(v.line) + ": '" + key +
                      "' must be a boolean");
  return v.boolean;
}

std::vector<double> Table::get_double_array(const std::string& key,
                                            const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  const Value& v = fetch(key);
  if (v.type != Value::Type::Array)
    throw ConfigError("config line " + std::to_string(v.line) + ": '" + key +
                      "' must be an array");
  std::vector<double> out;
  out.reserve(v.array.size());
  for (const auto& e : v.array) out.push_back(e.as_number());
  return out;
}

std::vector<int> Table::get_int_array(const std::string& key,
                                      const std::vector<int>& fallback) const {
  if (!has(key)) return fallback;
  const Value& v = fetch(key);
  if (v.type != Value::Type::Array)
    throw ConfigError("config line " + std::to_string(v.line) + ": '" + key +
                      "' must be an array");
  std::vector<int> out;
  out.reserve(v.array.size());
  for (const auto& e : v.array) {
    if (e.type != Value::Type::Integer)
      throw ConfigError("config line " + std::to_string(e.line) + ": '" + key +
                        "' must hold integers");
    out.push_back(static_cast<int>(e.integer));
  }
  return out;
}

void Table::set_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like key=value: '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Cursor c{text};
  Value v = parse_scalar(c);
  v.line = 0;
  kv_[key] = std::move(v);
}

std::vector<std::string> Table::unconsumed() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : kv_) {
    if (consumed_.count(key) == 0)
      out.push_back("'" + key + "' (line " + std::to_string(value.line) + ")");
  }
  return out;
}

}  // namespace tlc::toml
