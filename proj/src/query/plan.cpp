#include "tabot/plan.hpp"

#include <algorithm>

#include "tabot/error.hpp"

namespace tabot {

using nlohmann::json;

namespace {

auto invalid(const std::string& what, std::string detail = {}) -> Error {
    return Error(ErrorCode::InvalidPlan, what, std::move(detail));
}

template <typename E, std::size_t N>
auto parse_enum(std::string_view s, const std::pair<E, std::string_view> (&table)[N]) -> std::optional<E> {
    for (const auto& [e, name] : table) {
        if (name == s) return e;
    }
    return std::nullopt;
}

template <typename E, std::size_t N>
auto enum_name(E e, const std::pair<E, std::string_view> (&table)[N]) -> std::string_view {
    for (const auto& [v, name] : table) {
        if (v == e) return name;
    }
    return {};
}

constexpr std::pair<ProjectionKind, std::string_view> kProjections[] = {
    {ProjectionKind::All, "all"},
    {ProjectionKind::Fields, "fields"},
    {ProjectionKind::RowCount, "rowCount"},
    {ProjectionKind::ColumnCount, "columnCount"},
    {ProjectionKind::DistinctCount, "distinctCount"},
    {ProjectionKind::DistinctValues, "distinctValues"},
    {ProjectionKind::MetaSource, "metaSource"},
    {ProjectionKind::MetaAge, "metaAge"},
    {ProjectionKind::Help, "help"},
};

constexpr std::pair<AggregateFn, std::string_view> kAggregates[] = {
    {AggregateFn::Count, "count"}, {AggregateFn::Sum, "sum"}, {AggregateFn::Avg, "avg"},
    {AggregateFn::Min, "min"},     {AggregateFn::Max, "max"},
};

constexpr std::pair<GroupPost, std::string_view> kPosts[] = {
    {GroupPost::ArgmaxCount, "argmaxCount"},
    {GroupPost::CompareCounts, "compareCounts"},
    {GroupPost::PerGroupAggregate, "perGroupAggregate"},
};

auto values_to_json(const std::vector<Value>& values) -> json {
    json out = json::array();
    for (const auto& v : values) out.push_back(to_json(v));
    return out;
}

auto values_from_json(const json& j) -> std::vector<Value> {
    std::vector<Value> out;
    if (j.is_null()) return out;
    if (!j.is_array()) throw invalid("values must be an array");
    for (const auto& v : j) out.push_back(value_from_json(v));
    return out;
}

auto string_at(const json& j, const char* key) -> std::string {
    if (!j.contains(key) || !j.at(key).is_string()) throw invalid(std::string("missing string '") + key + "'", key);
    return j.at(key).get<std::string>();
}

/// Type a plan sees for a name: real fields have their own type, composites are Text.
auto name_type(const DataSchema& schema, const std::string& name) -> std::optional<FieldType> {
    if (const auto* f = schema.field(name)) return f->type;
    if (schema.composite(name) != nullptr) return FieldType::Text;
    return std::nullopt;
}

auto require_name(const DataSchema& schema, const std::string& name, bool allow_composite = true) -> FieldType {
    if (schema.group(name) != nullptr) throw invalid("field group '" + name + "' must be resolved to a member", name);
    auto t = name_type(schema, name);
    if (!t || (!allow_composite && schema.field(name) == nullptr)) throw invalid("unknown field '" + name + "'", name);
    return *t;
}

auto operator_class(const Operator& op) -> std::string {
    const auto& ts = op.applicable_types;
    if (ts.empty()) return op.id;
    if (std::all_of(ts.begin(), ts.end(), is_numeric)) return "numeric";
    if (std::all_of(ts.begin(), ts.end(), [](FieldType t) { return t == FieldType::Text; })) return "text";
    if (std::all_of(ts.begin(), ts.end(), is_temporal)) return "date";
    if (std::all_of(ts.begin(), ts.end(), [](FieldType t) { return is_numeric(t) || is_temporal(t); })) {
        return "range";
    }
    return op.id;
}

auto value_less(const Value& a, const Value& b) -> bool {
    auto x = as_double(a);
    auto y = as_double(b);
    if (x && y) return *x < *y;
    return a < b;
}

auto normalize_values(const std::vector<Value>& values, FieldType type, const std::string& field)
    -> std::vector<Value> {
    std::vector<Value> out;
    for (const auto& v : values) {
        if (is_missing(v)) throw invalid("missing value for " + field, field);
        auto c = coerce(v, type);
        if (!c) {
            throw invalid("value '" + to_string(v) + "' is not a valid " + std::string(field_type_name(type)) +
                              " for " + field,
                          field);
        }
        out.push_back(std::move(*c));
    }
    return out;
}

auto normalize_predicate(const Predicate& p, const DataSchema& schema, const std::vector<Operator>& operators)
    -> Predicate {
    FieldType type = require_name(schema, p.field);
    auto it = std::find_if(operators.begin(), operators.end(), [&](const Operator& o) { return o.id == p.op; });
    if (it == operators.end()) throw invalid("unknown operator '" + p.op + "'", p.op);
    const Operator& op = *it;
    if (!op.applies_to(type)) {
        throw invalid(operator_class(op) + " operator on " + std::string(field_type_name(type)) + " field (" +
                          p.field + " " + op.id + ")",
                      p.field);
    }
    if (p.values.size() != static_cast<std::size_t>(op.arity)) {
        throw invalid("operator " + op.id + " expects " + std::to_string(op.arity) + " value(s), got " +
                          std::to_string(p.values.size()) + " (" + p.field + ")",
                      p.field);
    }
    Predicate out{p.field, p.op, normalize_values(p.values, type, p.field)};
    if (op.arity == 2 && value_less(out.values[1], out.values[0])) std::swap(out.values[0], out.values[1]);
    return out;
}

}  // namespace

auto projection_kind_name(ProjectionKind k) -> std::string_view { return enum_name(k, kProjections); }
auto parse_projection_kind(std::string_view s) -> std::optional<ProjectionKind> { return parse_enum(s, kProjections); }
auto aggregate_fn_name(AggregateFn f) -> std::string_view { return enum_name(f, kAggregates); }
auto parse_aggregate_fn(std::string_view s) -> std::optional<AggregateFn> { return parse_enum(s, kAggregates); }
auto group_post_name(GroupPost p) -> std::string_view { return enum_name(p, kPosts); }
auto parse_group_post(std::string_view s) -> std::optional<GroupPost> { return parse_enum(s, kPosts); }

auto result_shape_name(ResultShape s) -> std::string_view {
    switch (s) {
        case ResultShape::Scalar: return "scalar";
        case ResultShape::Rows: return "rows";
        case ResultShape::GroupedPairs: return "groupedPairs";
    }
    return "rows";
}

auto plan_to_json(const QueryPlan& plan) -> json {
    json proj{{"kind", projection_kind_name(plan.projection.kind)}};
    if (!plan.projection.fields.empty()) proj["fields"] = plan.projection.fields;
    if (!plan.projection.field.empty()) proj["field"] = plan.projection.field;
    json j{{"projection", std::move(proj)}};
    if (!plan.filters.empty()) {
        json clauses = json::array();
        for (const auto& clause : plan.filters) {
            json c = json::array();
            for (const auto& p : clause) c.push_back({{"field", p.field}, {"op", p.op}, {"values", values_to_json(p.values)}});
            clauses.push_back(std::move(c));
        }
        j["filters"] = std::move(clauses);
    }
    if (plan.aggregate) j["aggregate"] = {{"fn", aggregate_fn_name(plan.aggregate->fn)}, {"field", plan.aggregate->field}};
    if (plan.group_by) {
        json g{{"field", plan.group_by->field}, {"post", group_post_name(plan.group_by->post)}};
        if (!plan.group_by->values.empty()) g["values"] = values_to_json(plan.group_by->values);
        j["groupBy"] = std::move(g);
    }
    if (plan.order_by) {
        j["orderBy"] = {{"field", plan.order_by->field},
                        {"direction", plan.order_by->direction == Direction::Desc ? "desc" : "asc"}};
    }
    if (plan.limit) j["limit"] = *plan.limit;
    return j;
}

auto plan_from_json(const json& j) -> QueryPlan {
    if (!j.is_object()) throw invalid("plan must be an object");
    QueryPlan plan;
    try {
        const auto& proj = j.at("projection");
        auto kind = parse_projection_kind(string_at(proj, "kind"));
        if (!kind) throw invalid("unknown projection kind", "projection");
        plan.projection.kind = *kind;
        if (proj.contains("fields")) plan.projection.fields = proj.at("fields").get<std::vector<std::string>>();
        if (proj.contains("field")) plan.projection.field = string_at(proj, "field");
        if (j.contains("filters")) {
            for (const auto& clause : j.at("filters")) {
                Clause c;
                for (const auto& p : clause) {
                    if (p.contains("lookup")) throw invalid("unresolved lookup predicate", "filters");
                    c.push_back({string_at(p, "field"), string_at(p, "op"), values_from_json(p.value("values", json()))});
                }
                if (c.empty()) throw invalid("empty filter clause", "filters");
                plan.filters.push_back(std::move(c));
            }
        }
        if (j.contains("aggregate")) {
            const auto& a = j.at("aggregate");
            auto fn = parse_aggregate_fn(string_at(a, "fn"));
            if (!fn) throw invalid("unknown aggregate function", "aggregate");
            plan.aggregate = Aggregate{*fn, string_at(a, "field")};
        }
        if (j.contains("groupBy")) {
            const auto& g = j.at("groupBy");
            auto post = parse_group_post(string_at(g, "post"));
            if (!post) throw invalid("unknown group post-operation", "groupBy");
            plan.group_by = GroupBy{string_at(g, "field"), *post, values_from_json(g.value("values", json()))};
        }
        if (j.contains("orderBy")) {
            const auto& o = j.at("orderBy");
            std::string dir = o.value("direction", "asc");
            if (dir != "asc" && dir != "desc") throw invalid("direction must be asc or desc", "orderBy");
            plan.order_by = OrderBy{string_at(o, "field"), dir == "desc" ? Direction::Desc : Direction::Asc};
        }
        if (j.contains("limit") && !j.at("limit").is_null()) {
            const auto& l = j.at("limit");
            if (!l.is_number_integer() || l.get<std::int64_t>() <= 0) throw invalid("limit must be a positive integer", "limit");
            plan.limit = l.get<std::size_t>();
        }
    } catch (const json::exception& e) {
        throw invalid(std::string("malformed plan: ") + e.what());
    }
    return plan;
}

auto normalize_plan(const QueryPlan& plan, const DataSchema& schema, const std::vector<Operator>& operators)
    -> QueryPlan {
    QueryPlan out = plan;
    switch (plan.projection.kind) {
        case ProjectionKind::Fields:
            if (plan.projection.fields.empty()) throw invalid("field projection needs at least one field", "projection");
            for (const auto& f : plan.projection.fields) require_name(schema, f);
            break;
        case ProjectionKind::DistinctCount:
        case ProjectionKind::DistinctValues: require_name(schema, plan.projection.field); break;
        default: break;
    }
    out.filters.clear();
    for (const auto& clause : plan.filters) {
        if (clause.empty()) throw invalid("empty filter clause", "filters");
        Clause c;
        for (const auto& p : clause) c.push_back(normalize_predicate(p, schema, operators));
        out.filters.push_back(std::move(c));
    }
    if (plan.aggregate) {
        const auto& a = *plan.aggregate;
        FieldType t = require_name(schema, a.field, false);
        bool ok = a.fn == AggregateFn::Count ||
                  ((a.fn == AggregateFn::Sum || a.fn == AggregateFn::Avg) && is_numeric(t)) ||
                  ((a.fn == AggregateFn::Min || a.fn == AggregateFn::Max) && (is_numeric(t) || is_temporal(t)));
        if (!ok) {
            throw invalid("aggregate " + std::string(aggregate_fn_name(a.fn)) + " on " +
                              std::string(field_type_name(t)) + " field (" + a.field + ")",
                          a.field);
        }
    }
    if (plan.group_by) {
        const auto& g = *plan.group_by;
        FieldType t = require_name(schema, g.field, false);
        if (g.post == GroupPost::PerGroupAggregate && !plan.aggregate) {
            throw invalid("perGroupAggregate needs an aggregate", "groupBy");
        }
        if (g.post == GroupPost::CompareCounts) {
            if (g.values.size() < 2) throw invalid("compareCounts needs at least two values", "groupBy");
            out.group_by->values = normalize_values(g.values, t, g.field);
        }
    }
    if (plan.order_by) require_name(schema, plan.order_by->field);
    if (plan.limit && *plan.limit == 0) throw invalid("limit must be positive", "limit");
    return out;
}

auto plan_group_refs(const QueryPlan& plan, const DataSchema& schema) -> std::vector<std::string> {
    std::vector<std::string> out;
    auto note = [&](const std::string& name) {
        if (schema.group(name) != nullptr && std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    };
    for (const auto& f : plan.projection.fields) note(f);
    note(plan.projection.field);
    for (const auto& clause : plan.filters) {
        for (const auto& p : clause) note(p.field);
    }
    if (plan.aggregate) note(plan.aggregate->field);
    if (plan.group_by) note(plan.group_by->field);
    if (plan.order_by) note(plan.order_by->field);
    return out;
}

auto resolve_group(const QueryPlan& plan, std::string_view group, std::string_view member) -> QueryPlan {
    QueryPlan out = plan;
    auto fix = [&](std::string& name) {
        if (name == group) name = std::string(member);
    };
    for (auto& f : out.projection.fields) fix(f);
    fix(out.projection.field);
    for (auto& clause : out.filters) {
        for (auto& p : clause) fix(p.field);
    }
    if (out.aggregate) fix(out.aggregate->field);
    if (out.group_by) fix(out.group_by->field);
    if (out.order_by) fix(out.order_by->field);
    return out;
}

auto ResultSet::scalar() const -> const Value& {
    static const Value kMissing = Missing{};
    if (rows.empty() || rows.front().empty()) return kMissing;
    return rows.front().front();
}

auto result_to_json(const ResultSet& r) -> json {
    json rows = json::array();
    for (const auto& row : r.rows) rows.push_back(values_to_json(row));
    return {{"shape", result_shape_name(r.shape)},
            {"columns", r.columns},
            {"rows", std::move(rows)},
            {"totalRowCount", r.total_row_count},
            {"tieCut", r.tie_cut}};
}

}  // namespace tabot
