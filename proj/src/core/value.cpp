#include "tabot/value.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "tabot/error.hpp"
#include "tabot/parse.hpp"
#include "tabot/text.hpp"

namespace tabot {

auto error_code_name(ErrorCode code) -> std::string_view {
    switch (code) {
        case ErrorCode::MalformedCsv: return "MalformedCsv";
        case ErrorCode::DuplicateColumnName: return "DuplicateColumnName";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::UnknownField: return "UnknownField";
        case ErrorCode::SynonymCollision: return "SynonymCollision";
        case ErrorCode::GroupMembershipConflict: return "GroupMembershipConflict";
        case ErrorCode::CompositeShadowsField: return "CompositeShadowsField";
        case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case ErrorCode::IntegrityViolation: return "IntegrityViolation";
        case ErrorCode::InvalidCommand: return "InvalidCommand";
        case ErrorCode::InvalidCatalog: return "InvalidCatalog";
        case ErrorCode::InvalidBundle: return "InvalidBundle";
        case ErrorCode::EmptyUtterance: return "EmptyUtterance";
        case ErrorCode::UnboundSlot: return "UnboundSlot";
        case ErrorCode::InvalidPlan: return "InvalidPlan";
        case ErrorCode::InvalidChoice: return "InvalidChoice";
        case ErrorCode::UnknownTurn: return "UnknownTurn";
        case ErrorCode::FallbackUnavailable: return "FallbackUnavailable";
        case ErrorCode::InvalidSql: return "InvalidSql";
        case ErrorCode::UnknownDataset: return "UnknownDataset";
        case ErrorCode::NoActiveBundle: return "NoActiveBundle";
        case ErrorCode::GenerationInProgress: return "GenerationInProgress";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

auto field_type_name(FieldType type) -> std::string_view {
    switch (type) {
        case FieldType::Boolean: return "Boolean";
        case FieldType::Integer: return "Integer";
        case FieldType::Float: return "Float";
        case FieldType::Date: return "Date";
        case FieldType::Datetime: return "Datetime";
        case FieldType::Text: return "Text";
        case FieldType::Empty: return "Empty";
    }
    return "Empty";
}

auto parse_field_type(std::string_view name) -> std::optional<FieldType> {
    static constexpr std::array kAll = {FieldType::Boolean, FieldType::Integer, FieldType::Float,
                                        FieldType::Date,    FieldType::Datetime, FieldType::Text,
                                        FieldType::Empty};
    for (auto t : kAll) {
        if (field_type_name(t) == name) return t;
    }
    return std::nullopt;
}

auto is_numeric(FieldType type) -> bool { return type == FieldType::Integer || type == FieldType::Float; }
auto is_temporal(FieldType type) -> bool { return type == FieldType::Date || type == FieldType::Datetime; }

auto as_double(const Value& v) -> std::optional<double> {
    if (auto i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (auto d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
}

// Civil-calendar conversions after H. Hinnant's public-domain algorithms.
auto days_from_civil(int y, unsigned m, unsigned d) -> std::int32_t {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int>(doe) - 719468;
}

namespace {

struct Civil {
    int year;
    unsigned month;
    unsigned day;
};

auto civil_from_days(std::int64_t z) -> Civil {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), m, d};
}

}  // namespace

auto valid_civil(int year, unsigned month, unsigned day) -> bool {
    if (year < 1 || year > 9999 || month < 1 || month > 12 || day < 1) return false;
    static constexpr std::array<unsigned, 12> kDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    unsigned limit = kDays[month - 1] + (month == 2 && leap ? 1 : 0);
    return day <= limit;
}

auto format_date(Date d) -> std::string {
    auto c = civil_from_days(d.days);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", c.year, c.month, c.day);
    return buf;
}

auto format_datetime(Datetime dt) -> std::string {
    std::int64_t days = dt.seconds >= 0 ? dt.seconds / 86400 : -((-dt.seconds + 86399) / 86400);
    std::int64_t rem = dt.seconds - days * 86400;
    auto c = civil_from_days(days);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", c.year, c.month, c.day,
                  static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
    return buf;
}

auto to_string(const Value& v) -> std::string {
    struct Visitor {
        auto operator()(const Missing&) const -> std::string { return ""; }
        auto operator()(bool b) const -> std::string { return b ? "true" : "false"; }
        auto operator()(std::int64_t i) const -> std::string { return std::to_string(i); }
        auto operator()(double d) const -> std::string {
            char buf[64];
            auto res = std::to_chars(buf, buf + sizeof buf, d);
            return std::string(buf, res.ptr);
        }
        auto operator()(Date d) const -> std::string { return format_date(d); }
        auto operator()(Datetime d) const -> std::string { return format_datetime(d); }
        auto operator()(const std::string& s) const -> std::string { return s; }
    };
    return std::visit(Visitor{}, v);
}

auto to_json(const Value& v) -> nlohmann::json {
    struct Visitor {
        auto operator()(const Missing&) const -> nlohmann::json { return nullptr; }
        auto operator()(bool b) const -> nlohmann::json { return b; }
        auto operator()(std::int64_t i) const -> nlohmann::json { return i; }
        auto operator()(double d) const -> nlohmann::json { return d; }
        auto operator()(Date d) const -> nlohmann::json { return format_date(d); }
        auto operator()(Datetime d) const -> nlohmann::json { return format_datetime(d); }
        auto operator()(const std::string& s) const -> nlohmann::json { return s; }
    };
    return std::visit(Visitor{}, v);
}

auto value_from_json(const nlohmann::json& j) -> Value {
    if (j.is_null()) return Missing{};
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw Error(ErrorCode::InvalidPlan, "unsupported literal " + j.dump());
}

auto coerce(const Value& v, FieldType type) -> std::optional<Value> {
    if (is_missing(v)) return Value{Missing{}};
    switch (type) {
        case FieldType::Empty: return std::nullopt;
        case FieldType::Text:
            if (std::holds_alternative<std::string>(v)) return v;
            return Value{to_string(v)};
        case FieldType::Boolean:
            if (std::holds_alternative<bool>(v)) return v;
            if (auto i = std::get_if<std::int64_t>(&v); i && (*i == 0 || *i == 1)) return Value{*i == 1};
            if (auto s = std::get_if<std::string>(&v)) {
                if (auto b = parse::boolean(*s)) return Value{*b};
                if (*s == "1" || *s == "0") return Value{*s == "1"};
            }
            return std::nullopt;
        case FieldType::Integer:
            if (std::holds_alternative<std::int64_t>(v)) return v;
            if (std::holds_alternative<double>(v)) return v;  // compared numerically
            if (auto s = std::get_if<std::string>(&v)) return parse::number_literal(*s);
            return std::nullopt;
        case FieldType::Float:
            if (std::holds_alternative<double>(v) || std::holds_alternative<std::int64_t>(v)) return v;
            if (auto s = std::get_if<std::string>(&v)) return parse::number_literal(*s);
            return std::nullopt;
        case FieldType::Date:
            if (std::holds_alternative<Date>(v)) return v;
            if (auto s = std::get_if<std::string>(&v)) {
                if (auto d = parse::date_literal(*s)) return Value{*d};
            }
            return std::nullopt;
        case FieldType::Datetime:
            if (std::holds_alternative<Datetime>(v)) return v;
            if (auto d = std::get_if<Date>(&v)) return Value{Datetime{static_cast<std::int64_t>(d->days) * 86400}};
            if (auto s = std::get_if<std::string>(&v)) {
                if (auto dt = parse::iso_datetime(*s)) return Value{*dt};
                if (auto d = parse::date_literal(*s)) return Value{Datetime{static_cast<std::int64_t>(d->days) * 86400}};
            }
            return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace tabot
