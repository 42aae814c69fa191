// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tlc/common.hpp"

namespace tlc::toml {

// TOML subset sufficient for flat run configs: [section] / [section.sub]
// headers, scalar and scalar-array values, '#' comments. No datetimes,
// multiline strings, inline or array-of-tables.
struct Value {
  enum class Type { String, Float, Integer, Boolean, Array };
  Type type = Type::String;
  std::string str;
  double number = 0.0;
  std::int64_t integer = 0;
  bool boolean = false;
  std::vector<Value> array;
  int line = 0;

  double as_number() const;
};

class Table {
 public:
  static Table parse(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  bool has_section(const std::string& prefix) const;

  // typed getters; each access marks the key consumed for schema validation
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::int64_t require_int(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_array(const std::string& key,
                                       const std::vector<double>& fallback) const;
  std::vector<int> get_int_array(const std::string& key, const std::vector<int>& fallback) const;

  // replace or insert a scalar, value text in TOML syntax ("key=value")
  void set_override(const std::string& assignment);

  // keys never consumed by any getter, with line numbers - the strict-schema
  // rejection list
  std::vector<std::string> unconsumed() const;

  const std::map<std::string, Value>& entries() const { return kv_; }

 private:
  const Value& fetch(const std::string& key) const;
  std::map<std::string, Value> kv_;
  mutable std::set<std::string> consumed_;
};

}  // namespace tlc::toml
