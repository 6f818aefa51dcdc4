#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace scaffopt::toml {

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, int line_)
      : std::runtime_error("line " + std::to_string(line_) + ": " + what), line(line_) {}
  int line;
};

// Value of the TOML subset used for experiment configs: booleans, integers,
// floats, strings and single-line arrays of these.
struct Value {
  enum class Kind { kBool, kInt, kFloat, kString, kArray };
  Kind kind = Kind::kInt;
  bool boolean = false;
  long long integer = 0;
  double number = 0.0;
  std::string text;
  std::vector<Value> array;
  int line = 0;

  bool is_number() const { return kind == Kind::kInt || kind == Kind::kFloat; }
  double as_number() const {
    if (kind == Kind::kInt) return static_cast<double>(integer);
    if (kind == Kind::kFloat) return number;
    throw ParseError("expected a number", line);
  }
  long long as_integer() const {
    if (kind != Kind::kInt) throw ParseError("expected an integer", line);
    return integer;
  }
  const std::string& as_string() const {
    if (kind != Kind::kString) throw ParseError("expected a string", line);
    return text;
  }
};

// Keys are flattened to "section.key". Supported syntax: comments (#),
// [section] headers, bare keys, quoted strings, booleans, integers, floats
// and single-line arrays; duplicate keys are rejected.
using Table = std::map<std::string, Value>;

Table parse(const std::string& text);
Table parse_file(const std::string& path);

}  // namespace scaffopt::toml
