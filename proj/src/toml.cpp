#include "scaffopt/toml.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace scaffopt::toml {

namespace {

struct Cursor {
  const std::string& s;
  std::size_t pos = 0;
  int line;

  bool done() const { return pos >= s.size(); }
  char peek() const { return s[pos]; }
  void skip_space() {
    while (!done() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
};

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string parse_bare_key(Cursor& c) {
  std::string key;
  while (!c.done() && (is_bare_key_char(c.peek()) || c.peek() == '.')) {
    key.push_back(c.peek());
    ++c.pos;
  }
  if (key.empty()) throw ParseError("expected a key", c.line);
  if (key.front() == '.' || key.back() == '.' || key.find("..") != std::string::npos) {
    throw ParseError("malformed key '" + key + "'", c.line);
  }
  return key;
}

std::string parse_quoted(Cursor& c) {
  ++c.pos;  // opening quote
  std::string out;
  while (true) {
    if (c.done()) throw ParseError("unterminated string", c.line);
    char ch = c.s[c.pos++];
    if (ch == '"') return out;
    if (ch == '\\') {
      if (c.done()) throw ParseError("unterminated escape", c.line);
      char esc = c.s[c.pos++];
      switch (esc) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        default:
          throw ParseError(std::string("unsupported escape '\\") + esc + "'", c.line);
      }
    } else {
      out.push_back(ch);
    }
  }
}

Value parse_value(Cursor& c);

Value parse_scalar_token(Cursor& c) {
  Value v;
  v.line = c.line;
  if (c.peek() == '"') {
    v.kind = Value::Kind::kString;
    v.text = parse_quoted(c);
    return v;
  }
  std::string token;
  while (!c.done()) {
    char ch = c.peek();
    if (ch == ',' || ch == ']' || ch == '#' || ch == ' ' || ch == '\t') break;
    token.push_back(ch);
    ++c.pos;
  }
  if (token.empty()) throw ParseError("expected a value", c.line);
  if (token == "true" || token == "false") {
    v.kind = Value::Kind::kBool;
    v.boolean = token == "true";
    return v;
  }
  // integer first, then float; the full token must be consumed either way
  char* end = nullptr;
  errno = 0;
  const long long as_int = std::strtoll(token.c_str(), &end, 10);
  if (errno == 0 && end == token.c_str() + token.size()) {
    v.kind = Value::Kind::kInt;
    v.integer = as_int;
    return v;
  }
  errno = 0;
  const double as_float = std::strtod(token.c_str(), &end);
  if (errno == 0 && end == token.c_str() + token.size()) {
    v.kind = Value::Kind::kFloat;
    v.number = as_float;
    return v;
  }
  throw ParseError("cannot parse value '" + token + "'", c.line);
}

Value parse_value(Cursor& c) {
  c.skip_space();
  if (c.done()) throw ParseError("missing value", c.line);
  if (c.peek() == '[') {
    Value v;
    v.kind = Value::Kind::kArray;
    v.line = c.line;
    ++c.pos;
    while (true) {
      c.skip_space();
      if (c.done()) throw ParseError("unterminated array", c.line);
      if (c.peek() == ']') {
        ++c.pos;
        break;
      }
      v.array.push_back(parse_value(c));
      c.skip_space();
      if (c.done()) throw ParseError("unterminated array", c.line);
      if (c.peek() == ',') {
        ++c.pos;
      } else if (c.peek() != ']') {
        throw ParseError("expected ',' or ']' in array", c.line);
      }
    }
    return v;
  }
  return parse_scalar_token(c);
}

}  // namespace

Table parse(const std::string& text) {
  Table table;
  std::istringstream in(text);
  std::string raw;
  std::string prefix;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    Cursor c{raw, 0, line_no};
    c.skip_space();
    if (c.done() || c.peek() == '#') continue;
    if (c.peek() == '[') {
      ++c.pos;
      std::string section = parse_bare_key(c);
      if (c.done() || c.peek() != ']') throw ParseError("expected ']' after section name", line_no);
      ++c.pos;
      c.skip_space();
      if (!c.done() && c.peek() != '#') throw ParseError("trailing characters after section header", line_no);
      prefix = section + ".";
      continue;
    }
    std::string key = parse_bare_key(c);
    c.skip_space();
    if (c.done() || c.peek() != '=') throw ParseError("expected '=' after key '" + key + "'", line_no);
    ++c.pos;
    Value value = parse_value(c);
    c.skip_space();
    if (!c.done() && c.peek() != '#') throw ParseError("trailing characters after value for '" + key + "'", line_no);
    const std::string full = prefix + key;
    if (table.count(full)) throw ParseError("duplicate key '" + full + "'", line_no);
    value.line = line_no;
    table.emplace(full, std::move(value));
  }
  return table;
}

Table parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace scaffopt::toml
