#include "adl/text.hpp"

#include <cstdio>

#include "adl/value.hpp"

namespace adl {

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    if (c <= 0x20 || c == '%' || c == '|' || c == '=' || c == ',' || c == 0x7f) {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      auto hex = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        return -1;
      };
      int hi = hex(s[i + 1]), lo = hex(s[i + 2]);
      if (hi < 0 || lo < 0) {
        out += s[i];
        continue;
      }
      out += static_cast<char>(hi * 16 + lo);
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

const std::string* Fields::find(std::string_view key) const {
  for (auto& [k, v] : items)
    if (k == key) return &v;
  return nullptr;
}

const std::string& Fields::get(std::string_view key) const {
  if (auto* v = find(key)) return *v;
  throw Error("journal record lacks field '" + std::string(key) + "'", ErrorKind::Io);
}

std::string Fields::render() const {
  std::string out;
  for (auto& [k, v] : items) {
    if (!out.empty()) out += ' ';
    out += k;
    out += '=';
    out += escape(v);
  }
  return out;
}

Fields Fields::parse(std::string_view text) {
  Fields f;
  if (text.empty()) return f;
  for (auto& part : split(text, ' ')) {
    if (part.empty()) continue;
    auto eq = part.find('=');
    if (eq == std::string::npos) throw Error("malformed journal field: " + part, ErrorKind::Io);
    f.add(part.substr(0, eq), unescape(std::string_view(part).substr(eq + 1)));
  }
  return f;
}

}  // namespace adl
