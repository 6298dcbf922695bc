#include "adl/value.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>

#include "adl/text.hpp"

namespace adl {

namespace {

using namespace std::chrono;

std::optional<int> to_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

int expand_year(std::string_view field, int v) {
  if (field.size() <= 2) return v >= 70 ? 1900 + v : 2000 + v;
  return v;
}

bool valid_civil(int y, int m, int d) {
  year_month_day ymd{year{y}, month{static_cast<unsigned>(m)},
                     day{static_cast<unsigned>(d)}};
  return ymd.ok();
}

}  // namespace

Date Date::from_civil(int y, unsigned m, unsigned d, int hh, int mm, int ss) {
  namespace chr = std::chrono;
  chr::sys_days days{chr::year{y} / chr::month{m} / chr::day{d}};
  return Date{days.time_since_epoch().count() * 86400ll + hh * 3600ll +
              mm * 60ll + ss};
}

std::optional<Date> Date::parse(std::string_view text) {
  std::string t = trim(text);
  if (t.empty()) return std::nullopt;

  // ISO form.
  if (t.size() >= 10 && t[4] == '-' && t[7] == '-') {
    auto y = to_int(std::string_view(t).substr(0, 4));
    auto m = to_int(std::string_view(t).substr(5, 2));
    auto d = to_int(std::string_view(t).substr(8, 2));
    if (!y || !m || !d || !valid_civil(*y, *m, *d)) return std::nullopt;
    int hh = 0, mi = 0, ss = 0;
    if (t.size() > 10) {
      if ((t[10] != 'T' && t[10] != ' ') || t.size() < 19) return std::nullopt;
      auto h = to_int(std::string_view(t).substr(11, 2));
      auto n = to_int(std::string_view(t).substr(14, 2));
      auto s = to_int(std::string_view(t).substr(17, 2));
      if (!h || !n || !s || *h > 23 || *n > 59 || *s > 60) return std::nullopt;
      hh = *h;
      mi = *n;
      ss = *s;
    }
    return from_civil(*y, *m, *d, hh, mi, ss);
  }

  auto fields = split(t, '_');
  if (fields.size() != 3) return std::nullopt;
  auto a = to_int(fields[0]);
  auto b = to_int(fields[1]);
  auto c = to_int(fields[2]);
  if (!a || !b || !c) return std::nullopt;
  int y, m, d;
  if (*a > 31) {
    y = expand_year(fields[0], *a);
    m = *b;
    d = *c;
  } else {
    d = *a;
    m = *b;
    y = expand_year(fields[2], *c);
  }
  if (!valid_civil(y, m, d)) return std::nullopt;
  return from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

int Date::year() const {
  namespace chr = std::chrono;
  auto days = chr::sys_days{chr::days{
      seconds >= 0 ? seconds / 86400 : (seconds - 86399) / 86400}};
  return int(chr::year_month_day{days}.year());
}

std::string Date::literal() const {
  std::int64_t day_count = seconds >= 0 ? seconds / 86400 : (seconds - 86399) / 86400;
  year_month_day ymd{sys_days{std::chrono::days{day_count}}};
  int y = int(ymd.year());
  char buf[32];
  if (y >= 1932 && y <= 1999) {
    std::snprintf(buf, sizeof buf, "%02d_%02u_%02u", y % 100,
                  unsigned(ymd.month()), unsigned(ymd.day()));
  } else {
    std::snprintf(buf, sizeof buf, "%04d_%02u_%02u", y, unsigned(ymd.month()),
                  unsigned(ymd.day()));
  }
  return buf;
}

std::string Date::iso() const {
  std::int64_t day_count = seconds >= 0 ? seconds / 86400 : (seconds - 86399) / 86400;
  std::int64_t rem = seconds - day_count * 86400;
  year_month_day ymd{sys_days{std::chrono::days{day_count}}};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(rem / 3600),
                int(rem / 60 % 60), int(rem % 60));
  return buf;
}

Value Value::integer(std::int64_t v) {
  Value r;
  r.data_ = v;
  return r;
}
Value Value::boolean(bool v) {
  Value r;
  r.data_ = v;
  return r;
}
Value Value::string(std::string v) {
  Value r;
  r.data_ = std::move(v);
  return r;
}
Value Value::date(Date v) {
  Value r;
  r.data_ = v;
  return r;
}
Value Value::set(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  Value r;
  r.data_ = std::move(v);
  return r;
}

std::string Value::display() const {
  switch (kind()) {
    case ValueKind::Unset: return "";
    case ValueKind::Integer: return std::to_string(as_integer());
    case ValueKind::Boolean: return as_boolean() ? "true" : "false";
    case ValueKind::String: return as_string();
    case ValueKind::Date: return as_date().literal();
    case ValueKind::Set: {
      std::string out = "{";
      for (std::size_t i = 0; i < as_set().size(); ++i) {
        if (i) out += ',';
        out += as_set()[i];
      }
      return out + "}";
    }
  }
  return {};
}

std::vector<std::string> Value::elements() const {
  if (is_unset()) return {};
  if (kind() == ValueKind::Set) return as_set();
  return {display()};
}

std::string Value::encode() const {
  switch (kind()) {
    case ValueKind::Unset: return "-";
    case ValueKind::Integer: return "i:" + std::to_string(as_integer());
    case ValueKind::Boolean: return as_boolean() ? "b:1" : "b:0";
    case ValueKind::String: return "s:" + escape(as_string());
    case ValueKind::Date: return "d:" + std::to_string(as_date().seconds);
    case ValueKind::Set: {
      std::string out = "S:";
      for (std::size_t i = 0; i < as_set().size(); ++i) {
        if (i) out += ',';
        out += escape(as_set()[i]);
      }
      return out;
    }
  }
  return "-";
}

Value Value::decode(std::string_view text) {
  if (text == "-") return {};
  if (text.size() < 2 || text[1] != ':') throw Error("bad value encoding: " + std::string(text), ErrorKind::Io);
  auto body = text.substr(2);
  switch (text[0]) {
    case 'i': {
      std::int64_t v = 0;
      std::from_chars(body.data(), body.data() + body.size(), v);
      return integer(v);
    }
    case 'b': return boolean(body == "1");
    case 's': return string(unescape(body));
    case 'd': {
      std::int64_t v = 0;
      std::from_chars(body.data(), body.data() + body.size(), v);
      return date(Date{v});
    }
    case 'S': {
      std::vector<std::string> items;
      if (!body.empty())
        for (auto& part : split(body, ',')) items.push_back(unescape(part));
      return set(std::move(items));
    }
    default: throw Error("bad value encoding: " + std::string(text), ErrorKind::Io);
  }
}

std::optional<Value> Domain::parse(std::string_view raw) const {
  std::string text = trim(raw);
  switch (kind) {
    case DomainKind::Integer: {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (text.empty() || ec != std::errc{} || p != text.data() + text.size())
        return std::nullopt;
      return Value::integer(v);
    }
    case DomainKind::Boolean: {
      auto l = to_lower(text);
      if (l == "true" || l == "yes" || l == "1") return Value::boolean(true);
      if (l == "false" || l == "no" || l == "0") return Value::boolean(false);
      return std::nullopt;
    }
    case DomainKind::Date: {
      auto d = Date::parse(text);
      if (!d) return std::nullopt;
      return Value::date(*d);
    }
    case DomainKind::String: return Value::string(std::string(raw));  // content keeps its bytes
    case DomainKind::Enumeration: {
      if (std::find(values.begin(), values.end(), text) == values.end())
        return std::nullopt;
      return Value::string(text);
    }
    case DomainKind::SetOf: {
      std::string body = text;
      if (body.size() >= 2 && body.front() == '{' && body.back() == '}')
        body = body.substr(1, body.size() - 2);
      std::vector<std::string> items;
      if (!trim(body).empty())
        for (auto& part : split(body, ',')) {
          auto item = trim(part);
          if (std::find(values.begin(), values.end(), item) == values.end())
            return std::nullopt;
          items.push_back(item);
        }
      return Value::set(std::move(items));
    }
  }
  return std::nullopt;
}

bool Domain::contains(const Value& v) const {
  switch (kind) {
    case DomainKind::Integer: return v.kind() == ValueKind::Integer;
    case DomainKind::Boolean: return v.kind() == ValueKind::Boolean;
    case DomainKind::Date: return v.kind() == ValueKind::Date;
    case DomainKind::String: return v.kind() == ValueKind::String;
    case DomainKind::Enumeration:
      return v.kind() == ValueKind::String &&
             std::find(values.begin(), values.end(), v.as_string()) != values.end();
    case DomainKind::SetOf:
      if (v.kind() != ValueKind::Set) return false;
      for (auto& item : v.as_set())
        if (std::find(values.begin(), values.end(), item) == values.end()) return false;
      return true;
  }
  return false;
}

bool Domain::widens(const Domain& older) const {
  if (kind == older.kind) {
    if (kind != DomainKind::Enumeration && kind != DomainKind::SetOf) return true;
    for (auto& v : older.values)
      if (std::find(values.begin(), values.end(), v) == values.end()) return false;
    return true;
  }
  // An enumeration may be widened into a free string.
  return kind == DomainKind::String && older.kind == DomainKind::Enumeration;
}

std::string Domain::describe() const {
  auto list = [&] {
    std::string s = "(";
    for (std::size_t i = 0; i < values.size(); ++i) s += (i ? ", " : "") + values[i];
    return s + ")";
  };
  switch (kind) {
    case DomainKind::Integer: return "integer";
    case DomainKind::Date: return "date";
    case DomainKind::Boolean: return "boolean";
    case DomainKind::String: return "string";
    case DomainKind::Enumeration: return list();
    case DomainKind::SetOf: return "set_of " + list();
  }
  return "?";
}

void Digest::add(std::string_view bytes) {
  for (unsigned char c : bytes) {
    h_ ^= c;
    h_ *= 1099511628211ull;
  }
}

std::string Digest::hex() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
  return buf;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace adl
