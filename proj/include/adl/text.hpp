#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace adl {

/// Percent-encodes separators and control bytes so a string survives as one
/// journal field.
std::string escape(std::string_view s);
std::string unescape(std::string_view s);

/// Journal records are `key=value` fields separated by single spaces.
struct Fields {
  std::vector<std::pair<std::string, std::string>> items;

  Fields& add(std::string key, std::string value) {
    items.emplace_back(std::move(key), std::move(value));
    return *this;
  }
  const std::string& get(std::string_view key) const;
  const std::string* find(std::string_view key) const;
  std::string render() const;
  static Fields parse(std::string_view text);
};

}  // namespace adl
