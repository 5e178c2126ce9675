#include "tabot/parse.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>

#include "tabot/text.hpp"

namespace tabot::parse {

namespace {

auto all_digits(std::string_view s) -> bool {
    if (s.empty()) return false;
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

// Strips a valid thousands grouping from the integral part. Returns nullopt
// when separators are present but not in groups of three.
auto strip_grouping(std::string_view digits, char sep) -> std::optional<std::string> {
    if (digits.find(sep) == std::string_view::npos) {
        return all_digits(digits) ? std::optional<std::string>(std::string(digits)) : std::nullopt;
    }
    std::string out;
    std::size_t first = digits.find(sep);
    if (first == 0 || first > 3 || !all_digits(digits.substr(0, first))) return std::nullopt;
    out.append(digits.substr(0, first));
    std::size_t pos = first;
    while (pos < digits.size()) {
        if (digits[pos] != sep) return std::nullopt;
        auto group = digits.substr(pos + 1, 3);
        if (group.size() != 3 || !all_digits(group)) return std::nullopt;
        out.append(group);
        pos += 4;
    }
    return out;
}

auto to_int(std::string_view s, int& out) -> bool {
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

auto boolean(std::string_view s) -> std::optional<bool> {
    std::string f = text::fold(text::trim(s));
    if (f == "true" || f == "yes" || f == "si") return true;
    if (f == "false" || f == "no") return false;
    return std::nullopt;
}

auto integer(std::string_view s, bool comma_decimal) -> std::optional<std::int64_t> {
    s = text::trim(s);
    bool negative = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    auto digits = strip_grouping(s, comma_decimal ? '.' : ',');
    if (!digits || digits->empty()) return std::nullopt;
    std::int64_t value = 0;
    auto res = std::from_chars(digits->data(), digits->data() + digits->size(), value);
    if (res.ec != std::errc() || res.ptr != digits->data() + digits->size()) return std::nullopt;
    return negative ? -value : value;
}

auto floating(std::string_view s, bool comma_decimal) -> std::optional<double> {
    s = text::trim(s);
    if (s.empty()) return std::nullopt;
    std::string body(s);
    char decimal = comma_decimal ? ',' : '.';
    char group = comma_decimal ? '.' : ',';
    std::string sign;
    if (body.front() == '-' || body.front() == '+') {
        sign = body.substr(0, 1);
        body.erase(0, 1);
    }
    std::string exponent;
    auto epos = body.find_first_of("eE");
    if (epos != std::string::npos) {
        exponent = body.substr(epos);
        body.resize(epos);
        std::string_view e(exponent);
        e.remove_prefix(1);
        if (!e.empty() && (e.front() == '-' || e.front() == '+')) e.remove_prefix(1);
        if (!all_digits(e)) return std::nullopt;
    }
    std::string integral = body;
    std::string fraction;
    auto dpos = body.find(decimal);
    if (dpos != std::string::npos) {
        integral = body.substr(0, dpos);
        fraction = body.substr(dpos + 1);
        if (!fraction.empty() && !all_digits(fraction)) return std::nullopt;
    }
    std::string int_digits;
    if (!integral.empty()) {
        auto stripped = strip_grouping(integral, group);
        if (!stripped) return std::nullopt;
        int_digits = *stripped;
    }
    if (int_digits.empty() && fraction.empty()) return std::nullopt;
    std::string canonical = sign + (int_digits.empty() ? "0" : int_digits);
    if (!fraction.empty()) canonical += "." + fraction;
    canonical += exponent;
    char* end = nullptr;
    double value = std::strtod(canonical.c_str(), &end);
    if (end != canonical.c_str() + canonical.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

auto iso_date(std::string_view s) -> std::optional<Date> {
    s = text::trim(s);
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y = 0, m = 0, d = 0;
    if (!to_int(s.substr(0, 4), y) || !to_int(s.substr(5, 2), m) || !to_int(s.substr(8, 2), d)) {
        return std::nullopt;
    }
    if (!valid_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d))) return std::nullopt;
    return Date{days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d))};
}

namespace {

struct SlashParts {
    int a = 0, b = 0, year = 0;
};

auto split_slash(std::string_view s) -> std::optional<SlashParts> {
    s = text::trim(s);
    auto p1 = s.find('/');
    if (p1 == std::string_view::npos) return std::nullopt;
    auto p2 = s.find('/', p1 + 1);
    if (p2 == std::string_view::npos || s.find('/', p2 + 1) != std::string_view::npos) return std::nullopt;
    auto a = s.substr(0, p1), b = s.substr(p1 + 1, p2 - p1 - 1), y = s.substr(p2 + 1);
    if (a.empty() || a.size() > 2 || b.empty() || b.size() > 2 || y.size() != 4) return std::nullopt;
    SlashParts parts;
    if (!to_int(a, parts.a) || !to_int(b, parts.b) || !to_int(y, parts.year)) return std::nullopt;
    return parts;
}

}  // namespace

auto slash_vote(std::string_view s) -> SlashVote {
    auto parts = split_slash(s);
    if (!parts) return SlashVote::Invalid;
    bool day_first = valid_civil(parts->year, static_cast<unsigned>(parts->b), static_cast<unsigned>(parts->a));
    bool month_first = valid_civil(parts->year, static_cast<unsigned>(parts->a), static_cast<unsigned>(parts->b));
    if (day_first && month_first) return SlashVote::Either;
    if (day_first) return SlashVote::DayFirstOnly;
    if (month_first) return SlashVote::MonthFirstOnly;
    return SlashVote::Invalid;
}

auto slash_date(std::string_view s, SlashOrder order) -> std::optional<Date> {
    auto parts = split_slash(s);
    if (!parts) return std::nullopt;
    int month = order == SlashOrder::DayFirst ? parts->b : parts->a;
    int day = order == SlashOrder::DayFirst ? parts->a : parts->b;
    if (!valid_civil(parts->year, static_cast<unsigned>(month), static_cast<unsigned>(day))) return std::nullopt;
    return Date{days_from_civil(parts->year, static_cast<unsigned>(month), static_cast<unsigned>(day))};
}

auto iso_datetime(std::string_view s) -> std::optional<Datetime> {
    s = text::trim(s);
    if (s.size() < 16 || (s[10] != 'T' && s[10] != ' ')) return std::nullopt;
    auto date = iso_date(s.substr(0, 10));
    if (!date) return std::nullopt;
    auto time = s.substr(11);
    if (time.ends_with('Z')) time.remove_suffix(1);
    int h = 0, m = 0, sec = 0;
    if (time.size() != 5 && time.size() != 8) return std::nullopt;
    if (time[2] != ':' || !to_int(time.substr(0, 2), h) || !to_int(time.substr(3, 2), m)) return std::nullopt;
    if (time.size() == 8 && (time[5] != ':' || !to_int(time.substr(6, 2), sec))) return std::nullopt;
    if (h > 23 || m > 59 || sec > 60) return std::nullopt;
    return Datetime{static_cast<std::int64_t>(date->days) * 86400 + h * 3600 + m * 60 + sec};
}

auto number_literal(std::string_view s) -> std::optional<Value> {
    s = text::trim(s);
    double scale = 1.0;
    if (!s.empty() && (s.back() == 'k' || s.back() == 'K')) {
        scale = 1000.0;
        s.remove_suffix(1);
    }
    if (auto i = integer(s)) {
        return Value{static_cast<std::int64_t>(*i * static_cast<std::int64_t>(scale))};
    }
    if (auto f = floating(s)) {
        double v = *f * scale;
        if (std::floor(v) == v && std::fabs(v) < 9.0e15) return Value{static_cast<std::int64_t>(v)};
        return Value{v};
    }
    return std::nullopt;
}

auto date_literal(std::string_view s) -> std::optional<Date> {
    if (auto d = iso_date(s)) return d;
    switch (slash_vote(s)) {
        case SlashVote::MonthFirstOnly: return slash_date(s, SlashOrder::MonthFirst);
        case SlashVote::DayFirstOnly:
        case SlashVote::Either: return slash_date(s, SlashOrder::DayFirst);
        case SlashVote::Invalid: break;
    }
    return std::nullopt;
}

}  // namespace tabot::parse
