#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace adl {

enum class ErrorKind {
  Domain,    // bad input or violated model rule
  Usage,     // malformed invocation
  Aborted,   // a transaction was aborted
  Io,        // filesystem / persistence failure
};

/// Base exception for all engine errors. The kind maps to the CLI exit code
/// and to the C API status.
class Error : public std::runtime_error {
 public:
  explicit Error(std::string message, ErrorKind kind = ErrorKind::Domain)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Calendar date-time, UTC, second resolution.
struct Date {
  std::int64_t seconds = 0;  // since 1970-01-01T00:00:00Z

  static Date from_civil(int year, unsigned month, unsigned day, int hour = 0,
                         int minute = 0, int second = 0);

  /// Accepts `dd_mm_yy`, `yy_mm_dd` (first field > 31 means year-first),
  /// `yyyy_mm_dd` and ISO `yyyy-mm-dd[Thh:mm:ss]`. Two-digit years map to
  /// 1970..2069.
  static std::optional<Date> parse(std::string_view text);

  /// Year-first underscore form; two-digit year when unambiguous.
  std::string literal() const;
  std::string iso() const;

  int year() const;

  auto operator<=>(const Date&) const = default;
};

enum class ValueKind { Unset, Integer, Boolean, String, Date, Set };

/// Attribute value. Sets are kept sorted and duplicate-free.
class Value {
 public:
  Value() = default;
  static Value integer(std::int64_t v);
  static Value boolean(bool v);
  static Value string(std::string v);
  static Value date(Date v);
  static Value set(std::vector<std::string> v);

  ValueKind kind() const noexcept { return static_cast<ValueKind>(data_.index()); }
  bool is_unset() const noexcept { return kind() == ValueKind::Unset; }

  std::int64_t as_integer() const { return std::get<std::int64_t>(data_); }
  bool as_boolean() const { return std::get<bool>(data_); }
  const std::string& as_string() const { return std::get<std::string>(data_); }
  Date as_date() const { return std::get<Date>(data_); }
  const std::vector<std::string>& as_set() const {
    return std::get<std::vector<std::string>>(data_);
  }

  /// Human-readable rendering; sets render as `{a,b}`; unset renders empty.
  std::string display() const;

  /// Unambiguous single-token encoding used by the journal and digests.
  std::string encode() const;
  static Value decode(std::string_view text);

  /// Element-wise text view: scalars yield one element, sets their members.
  std::vector<std::string> elements() const;

  bool operator==(const Value&) const = default;

 private:
  std::variant<std::monostate, std::int64_t, bool, std::string, Date,
               std::vector<std::string>>
      data_;
};

enum class DomainKind { Integer, Date, Boolean, String, Enumeration, SetOf };

struct Domain {
  DomainKind kind = DomainKind::String;
  std::vector<std::string> values;  // Enumeration / SetOf members, in order

  static Domain of(DomainKind k) { return Domain{k, {}}; }

  /// Parses textual input into a value of this domain; nullopt on mismatch.
  std::optional<Value> parse(std::string_view text) const;
  bool contains(const Value& v) const;
  /// True if every value legal under `older` is still legal here.
  bool widens(const Domain& older) const;
  std::string describe() const;

  bool operator==(const Domain&) const = default;
};

/// 64-bit FNV-1a, used for store and workspace digests.
class Digest {
 public:
  void add(std::string_view bytes);
  void add_field(std::string_view bytes) {
    add(bytes);
    add(std::string_view("\x1f", 1));
  }
  std::uint64_t value() const noexcept { return h_; }
  std::string hex() const;

 private:
  std::uint64_t h_ = 1469598103934665603ull;
};

std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace adl
