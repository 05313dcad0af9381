#include "formlab/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace formlab::toml_lite {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw std::runtime_error("toml: line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Removes a trailing comment, respecting string quotes.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
    } else if (c == '"') {
      in_str = true;
    } else if (c == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

std::string parse_string(const std::string& s, std::size_t line, std::size_t& pos) {
  std::string out;
  ++pos;  // opening quote
  while (pos < s.size() && s[pos] != '"') {
    char c = s[pos];
    if (c == '\\') {
      ++pos;
      if (pos >= s.size()) fail(line, "dangling escape");
      switch (s[pos]) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: fail(line, "unsupported escape");
      }
    } else {
      out.push_back(c);
    }
    ++pos;
  }
  if (pos >= s.size()) fail(line, "unterminated string");
  ++pos;  // closing quote
  return out;
}

nlohmann::json parse_value(const std::string& s, std::size_t line, std::size_t& pos);

nlohmann::json parse_array(const std::string& s, std::size_t line, std::size_t& pos) {
  nlohmann::json arr = nlohmann::json::array();
  ++pos;  // opening bracket
  for (;;) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos >= s.size()) fail(line, "unterminated array");
    if (s[pos] == ']') {
      ++pos;
      return arr;
    }
    arr.push_back(parse_value(s, line, pos));
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos < s.size() && s[pos] == ',') {
      ++pos;
      continue;
    }
    if (pos < s.size() && s[pos] == ']') {
      ++pos;
      return arr;
    }
    fail(line, "expected ',' or ']' in array");
  }
}

nlohmann::json parse_scalar(const std::string& token, std::size_t line) {
  if (token == "true") return true;
  if (token == "false") return false;
  if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
  if (token == "-inf") return -std::numeric_limits<double>::infinity();
  if (token == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (token.empty()) fail(line, "missing value");

  // integer first, double as the fallback; '_' separators are allowed
  std::string digits;
  digits.reserve(token.size());
  for (char c : token)
    if (c != '_') digits.push_back(c);

  bool int_like = true;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    char c = digits[i];
    if (i == 0 && (c == '+' || c == '-')) continue;
    if (!std::isdigit(static_cast<unsigned char>(c))) int_like = false;
  }
  if (int_like && digits.size() <= 19) {
    long long v = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec == std::errc() && p == digits.data() + digits.size()) return v;
  }
  try {
    std::size_t used = 0;
    double v = std::stod(digits, &used);
    if (used == digits.size()) return v;
  } catch (...) {
  }
  fail(line, "unrecognized value '" + token + "'");
}

nlohmann::json parse_value(const std::string& s, std::size_t line, std::size_t& pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  if (pos >= s.size()) fail(line, "missing value");
  if (s[pos] == '"') return parse_string(s, line, pos);
  if (s[pos] == '[') return parse_array(s, line, pos);
  std::size_t start = pos;
  while (pos < s.size() && s[pos] != ',' && s[pos] != ']' && s[pos] != '#') ++pos;
  return parse_scalar(trim(s.substr(start, pos - start)), line);
}

std::vector<std::string> split_path(const std::string& s, std::size_t line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == '.') {
      if (cur.empty()) fail(line, "empty path segment");
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (trim(cur).empty()) fail(line, "empty path segment");
  parts.push_back(trim(cur));
  return parts;
}

/// Walks a dotted path from the root, descending into the last element of
/// any array-of-tables on the way.
nlohmann::json* descend(nlohmann::json* node, const std::vector<std::string>& path,
                        std::size_t upto, std::size_t line) {
  for (std::size_t i = 0; i < upto; ++i) {
    nlohmann::json& slot = (*node)[path[i]];
    if (slot.is_null()) slot = nlohmann::json::object();
    if (slot.is_array()) {
      if (slot.empty()) fail(line, "path crosses an empty table array");
      node = &slot.back();
    } else if (slot.is_object()) {
      node = &slot;
    } else {
      fail(line, "path segment '" + path[i] + "' is not a table");
    }
  }
  return node;
}

}  // namespace

nlohmann::json parse(const std::string& text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = trim(strip_comment(text.substr(pos, eol - pos)));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;

    if (line.size() >= 4 && line.substr(0, 2) == "[[") {
      if (line.substr(line.size() - 2) != "]]") fail(line_no, "malformed table array header");
      auto path = split_path(trim(line.substr(2, line.size() - 4)), line_no);
      nlohmann::json* parent = descend(&root, path, path.size() - 1, line_no);
      nlohmann::json& slot = (*parent)[path.back()];
      if (slot.is_null()) slot = nlohmann::json::array();
      if (!slot.is_array()) fail(line_no, "'" + path.back() + "' is already a non-array");
      slot.push_back(nlohmann::json::object());
      table = &slot.back();
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed table header");
      auto path = split_path(trim(line.substr(1, line.size() - 2)), line_no);
      nlohmann::json* parent = descend(&root, path, path.size() - 1, line_no);
      nlohmann::json& slot = (*parent)[path.back()];
      if (slot.is_null()) slot = nlohmann::json::object();
      if (!slot.is_object()) fail(line_no, "'" + path.back() + "' is already a non-table");
      table = &slot;
      continue;
    }

    std::size_t eq = std::string::npos;
    {
      bool in_str = false;
      for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_str) {
          if (c == '\\') ++i;
          else if (c == '"') in_str = false;
        } else if (c == '"') {
          in_str = true;
        } else if (c == '=') {
          eq = i;
          break;
        }
      }
    }
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(line_no, "empty key");
    if (key.front() == '"') {
      std::size_t kpos = 0;
      key = parse_string(key, line_no, kpos);
    }
    std::size_t vpos = 0;
    std::string rest = trim(line.substr(eq + 1));
    nlohmann::json value = parse_value(rest, line_no, vpos);
    while (vpos < rest.size() && std::isspace(static_cast<unsigned char>(rest[vpos]))) ++vpos;
    if (vpos != rest.size()) fail(line_no, "trailing characters after value");
    if (table->contains(key)) fail(line_no, "duplicate key '" + key + "'");
    (*table)[key] = std::move(value);
  }
  return root;
}

}  // namespace formlab::toml_lite
