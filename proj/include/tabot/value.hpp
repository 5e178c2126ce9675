#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

namespace tabot {

enum class FieldType { Boolean, Integer, Float, Date, Datetime, Text, Empty };

auto field_type_name(FieldType type) -> std::string_view;
auto parse_field_type(std::string_view name) -> std::optional<FieldType>;
auto is_numeric(FieldType type) -> bool;
auto is_temporal(FieldType type) -> bool;

struct Missing {
    auto operator<=>(const Missing&) const = default;
};

/// Calendar day, counted from 1970-01-01.
struct Date {
    std::int32_t days = 0;
    auto operator<=>(const Date&) const = default;
};

/// Seconds since 1970-01-01T00:00:00, no time zone.
struct Datetime {
    std::int64_t seconds = 0;
    auto operator<=>(const Datetime&) const = default;
};

using Value = std::variant<Missing, bool, std::int64_t, double, Date, Datetime, std::string>;

inline auto is_missing(const Value& v) -> bool { return std::holds_alternative<Missing>(v); }

/// Numeric view of Integer/Float values.
auto as_double(const Value& v) -> std::optional<double>;

auto days_from_civil(int year, unsigned month, unsigned day) -> std::int32_t;
auto valid_civil(int year, unsigned month, unsigned day) -> bool;
auto format_date(Date d) -> std::string;
auto format_datetime(Datetime dt) -> std::string;

/// Human/wire rendering. Integers print without separators, floats with the
/// shortest representation that round-trips.
auto to_string(const Value& v) -> std::string;

/// Wire form: Missing → null, bool/number as JSON scalars, dates as ISO strings.
auto to_json(const Value& v) -> nlohmann::json;
/// Untyped decoding used by plan documents: numbers become Integer/Float,
/// strings stay strings until coerced against a field type.
auto value_from_json(const nlohmann::json& j) -> Value;

/// Coerce a loosely typed value (usually a string literal from an utterance or
/// a plan document) to `type`. Returns nullopt when it does not parse.
auto coerce(const Value& v, FieldType type) -> std::optional<Value>;

}  // namespace tabot
