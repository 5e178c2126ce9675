#include <algorithm>
#include <map>
#include <set>
#include <unordered_set>

#include "tabot/error.hpp"
#include "tabot/ingest.hpp"
#include "tabot/parse.hpp"
#include "tabot/text.hpp"

namespace tabot {

namespace {

struct Inference {
    FieldType type = FieldType::Empty;
    parse::SlashOrder slash_order = parse::SlashOrder::DayFirst;
    bool slash_usable = false;
    bool binary_digits = false;  // Boolean because the column is exactly {0, 1}
};

auto is_missing_marker(std::string_view cell, const InferenceOptions& options) -> bool {
    std::string f = text::fold(text::trim(cell));
    for (const auto& marker : options.missing_markers) {
        if (f == text::fold(marker)) return true;
    }
    return false;
}

auto infer(std::span<const std::string> cells, const InferenceOptions& options) -> Inference {
    std::vector<std::string_view> present;
    for (const auto& c : cells) {
        if (!is_missing_marker(c, options)) present.push_back(text::trim(c));
    }
    Inference result;
    if (present.empty()) return result;

    const double needed = options.type_consensus_ratio * static_cast<double>(present.size());
    auto enough = [&](std::size_t hits) { return static_cast<double>(hits) >= needed; };
    auto count_if = [&](auto&& pred) {
        return static_cast<std::size_t>(std::count_if(present.begin(), present.end(), pred));
    };

    std::set<std::string_view> distinct(present.begin(), present.end());
    if (distinct == std::set<std::string_view>{"0", "1"}) {
        result.type = FieldType::Boolean;
        result.binary_digits = true;
        return result;
    }
    if (enough(count_if([](std::string_view s) { return parse::boolean(s).has_value(); }))) {
        result.type = FieldType::Boolean;
        return result;
    }
    if (enough(count_if([&](std::string_view s) { return parse::integer(s, options.comma_decimal).has_value(); }))) {
        result.type = FieldType::Integer;
        return result;
    }
    if (enough(count_if([&](std::string_view s) { return parse::floating(s, options.comma_decimal).has_value(); }))) {
        result.type = FieldType::Float;
        return result;
    }

    // Slash dates: pick day-first or month-first by majority over the cells
    // that only admit one reading. A tie leaves slash dates unusable.
    std::size_t day_only = 0, month_only = 0;
    for (auto s : present) {
        auto vote = parse::slash_vote(s);
        if (vote == parse::SlashVote::DayFirstOnly) ++day_only;
        if (vote == parse::SlashVote::MonthFirstOnly) ++month_only;
    }
    result.slash_usable = day_only != month_only;
    result.slash_order = day_only > month_only ? parse::SlashOrder::DayFirst : parse::SlashOrder::MonthFirst;
    auto is_date = [&](std::string_view s) {
        if (parse::iso_date(s)) return true;
        return result.slash_usable && parse::slash_date(s, result.slash_order).has_value();
    };
    if (enough(count_if(is_date))) {
        result.type = FieldType::Date;
        return result;
    }
    if (enough(count_if([&](std::string_view s) { return parse::iso_datetime(s).has_value() || is_date(s); }))) {
        result.type = FieldType::Datetime;
        return result;
    }
    result.type = FieldType::Text;
    return result;
}

auto convert(std::string_view cell, const Inference& inf, const InferenceOptions& options) -> Value {
    if (is_missing_marker(cell, options)) return Missing{};
    std::string_view s = text::trim(cell);
    switch (inf.type) {
        case FieldType::Empty: return Missing{};
        case FieldType::Text: return std::string(s);
        case FieldType::Boolean:
            if (inf.binary_digits) return s == "1";
            if (auto b = parse::boolean(s)) return *b;
            return Missing{};
        case FieldType::Integer:
            if (auto i = parse::integer(s, options.comma_decimal)) return *i;
            return Missing{};
        case FieldType::Float:
            if (auto f = parse::floating(s, options.comma_decimal)) return *f;
            return Missing{};
        case FieldType::Date:
            if (auto d = parse::iso_date(s)) return *d;
            if (inf.slash_usable) {
                if (auto d = parse::slash_date(s, inf.slash_order)) return *d;
            }
            return Missing{};
        case FieldType::Datetime:
            if (auto dt = parse::iso_datetime(s)) return *dt;
            if (auto d = parse::iso_date(s)) return Datetime{static_cast<std::int64_t>(d->days) * 86400};
            if (inf.slash_usable) {
                if (auto d = parse::slash_date(s, inf.slash_order)) {
                    return Datetime{static_cast<std::int64_t>(d->days) * 86400};
                }
            }
            return Missing{};
    }
    return Missing{};
}

auto key_less(const Value& a, const Value& b) -> bool {
    if (a.index() != b.index()) return a.index() < b.index();
    if (auto sa = std::get_if<std::string>(&a)) {
        return text::fold(*sa) < text::fold(std::get<std::string>(b));
    }
    return a < b;
}

}  // namespace

namespace detail {

auto build_column(std::string name, std::vector<std::string> raw, const InferenceOptions& options) -> Column {
    Inference inf = infer(raw, options);
    Column col;
    col.name = std::move(name);
    col.type = inf.type;
    col.cells.reserve(raw.size());
    for (const auto& cell : raw) col.cells.push_back(convert(cell, inf, options));
    col.raw = std::move(raw);
    return col;
}

}  // namespace detail

auto infer_field_type(std::span<const std::string> cells, const InferenceOptions& options) -> FieldType {
    return infer(cells, options).type;
}

auto canonical_key(const Value& v) -> std::string {
    if (auto s = std::get_if<std::string>(&v)) return text::fold(text::trim(*s));
    return to_string(v);
}

auto compute_field_stats(const Table& table, std::string_view field, std::size_t threshold) -> FieldStats {
    const Column* col = table.find(field);
    if (col == nullptr) throw Error(ErrorCode::UnknownField, "unknown field '" + std::string(field) + "'", std::string(field));

    FieldStats stats;
    stats.inferred_type = col->type;
    std::map<std::string, Value> first_seen;
    for (const auto& cell : col->cells) {
        if (is_missing(cell)) {
            ++stats.missing_count;
            continue;
        }
        first_seen.try_emplace(canonical_key(cell), cell);
    }
    stats.diversity = first_seen.size();
    const std::size_t present = col->cells.size() - stats.missing_count;

    const bool type_eligible = col->type == FieldType::Text || col->type == FieldType::Boolean ||
                               col->type == FieldType::Integer;
    // A column whose every value is unique is an identifier, not a category.
    const bool repeats = col->type == FieldType::Boolean ? present > 0 : stats.diversity < present;
    stats.is_categorical = type_eligible && repeats && stats.diversity <= threshold;

    if (stats.is_categorical) {
        std::vector<Value> values;
        values.reserve(first_seen.size());
        for (auto& [key, value] : first_seen) values.push_back(value);
        std::sort(values.begin(), values.end(), key_less);
        for (const auto& v : values) stats.value_lexicon.push_back(to_string(v));
    }
    return stats;
}

}  // namespace tabot
