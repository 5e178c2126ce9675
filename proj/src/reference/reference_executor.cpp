#include <cmath>

#include "tabot/error.hpp"
#include "tabot/reference.hpp"
#include "tabot/text.hpp"

namespace tabot::reference {

namespace {

auto three_way(long double x, long double y) -> int { return x < y ? -1 : (x > y ? 1 : 0); }

auto seconds_of(const Value& v) -> std::optional<std::int64_t> {
    if (const auto* d = std::get_if<Date>(&v)) return std::int64_t{d->days} * 86400;
    if (const auto* t = std::get_if<Datetime>(&v)) return t->seconds;
    return std::nullopt;
}

auto cell(const Table& table, const DataSchema& schema, const std::string& name, std::size_t row) -> Value {
    if (const auto* comp = schema.composite(name)) {
        std::string out;
        for (std::size_t i = 0; i < comp->parts.size(); ++i) {
            const Value& part = table.find(comp->parts[i])->cells.at(row);
            if (is_missing(part)) return Missing{};
            out += (i == 0 ? "" : comp->separator) + to_string(part);
        }
        return out;
    }
    const Column* col = table.find(name);
    if (col == nullptr) throw Error(ErrorCode::UnknownField, "reference: no column " + name, name);
    return col->cells.at(row);
}

auto folded(const Value& v) -> std::string { return text::fold(to_string(v)); }

auto holds(const Predicate& p, const Value& v) -> bool {
    if (is_missing(v)) return false;
    const std::string& op = p.op;
    if (op == "equals") return compare(v, p.values[0]) == 0;
    if (op == "not_equals") return compare(v, p.values[0]) != 0;
    if (op == "less_than" || op == "before") return compare(v, p.values[0]) < 0;
    if (op == "less_equal") return compare(v, p.values[0]) <= 0;
    if (op == "greater_than" || op == "after") return compare(v, p.values[0]) > 0;
    if (op == "greater_equal") return compare(v, p.values[0]) >= 0;
    if (op == "between") return compare(v, p.values[0]) >= 0 && compare(v, p.values[1]) <= 0;
    std::string hay = folded(v);
    std::string needle = folded(p.values[0]);
    if (op == "contains") return hay.find(needle) != std::string::npos;
    if (op == "starts_with") return hay.rfind(needle, 0) == 0;
    if (op == "ends_with") return hay.size() >= needle.size() && hay.substr(hay.size() - needle.size()) == needle;
    throw Error(ErrorCode::InvalidPlan, "reference: unknown operator " + op, op);
}

auto selected(const QueryPlan& plan, const Table& table, const DataSchema& schema) -> std::vector<std::size_t> {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        bool ok = true;
        for (const auto& clause : plan.filters) {
            bool any = false;
            for (const auto& p : clause) any = any || holds(p, cell(table, schema, p.field, r));
            ok = ok && any;
        }
        if (ok) rows.push_back(r);
    }
    return rows;
}

/// Two group keys are one group when they agree after trimming and folding.
auto same_group(const Value& a, const Value& b) -> bool {
    const auto* x = std::get_if<std::string>(&a);
    const auto* y = std::get_if<std::string>(&b);
    if (x != nullptr && y != nullptr) return text::fold(text::trim(*x)) == text::fold(text::trim(*y));
    return to_string(a) == to_string(b);
}

auto type_of(const DataSchema& schema, const std::string& name) -> FieldType {
    const auto* f = schema.field(name);
    return f != nullptr ? f->type : FieldType::Text;
}

auto aggregate(const Aggregate& a, const Table& table, const DataSchema& schema, const std::vector<std::size_t>& rows)
    -> Value {
    if (a.fn == AggregateFn::Count) return static_cast<std::int64_t>(rows.size());
    std::vector<Value> present;
    for (auto r : rows) {
        Value v = cell(table, schema, a.field, r);
        if (!is_missing(v)) present.push_back(v);
    }
    if (present.empty()) return Missing{};
    if (a.fn == AggregateFn::Min || a.fn == AggregateFn::Max) {
        Value best = present[0];
        for (const auto& v : present) {
            int c = compare(v, best);
            if (a.fn == AggregateFn::Min ? c < 0 : c > 0) best = v;
        }
        return best;
    }
    const bool integer = type_of(schema, a.field) == FieldType::Integer;
    long double sum = 0;
    std::int64_t exact = 0;
    for (const auto& v : present) {
        sum += static_cast<long double>(*as_double(v));
        if (integer) exact += std::get<std::int64_t>(v);
    }
    if (a.fn == AggregateFn::Sum) return integer ? Value{exact} : Value{static_cast<double>(sum)};
    return static_cast<double>(sum / static_cast<long double>(present.size()));
}

auto scalar(const std::string& column, Value v) -> ResultSet {
    ResultSet r;
    r.shape = ResultShape::Scalar;
    r.columns = {column};
    r.rows = {{std::move(v)}};
    r.total_row_count = 1;
    return r;
}

auto label(const Aggregate& a) -> std::string {
    return std::string(aggregate_fn_name(a.fn)) + "(" + a.field + ")";
}

/// Insertion sort: stable, missing keys last in either direction.
auto sort_by_keys(std::vector<std::size_t>& order, const std::vector<Value>& keys, Direction dir) -> void {
    auto before = [&](std::size_t a, std::size_t b) {
        if (is_missing(keys[a])) return false;
        if (is_missing(keys[b])) return true;
        int c = compare(keys[a], keys[b]);
        return dir == Direction::Asc ? c < 0 : c > 0;
    };
    for (std::size_t i = 1; i < order.size(); ++i) {
        for (std::size_t j = i; j > 0 && before(order[j], order[j - 1]); --j) std::swap(order[j], order[j - 1]);
    }
}

auto equal_keys(const Value& a, const Value& b) -> bool {
    if (is_missing(a) || is_missing(b)) return is_missing(a) && is_missing(b);
    return compare(a, b) == 0;
}

/// Keeps the first `limit` rows; `keys` are the ordering keys of the rows in
/// output order (empty when unordered).
auto cut(ResultSet& r, const std::optional<std::size_t>& limit, const std::vector<Value>& keys) -> void {
    r.total_row_count = r.rows.size();
    if (!limit || r.rows.size() <= *limit) return;
    if (!keys.empty() && *limit > 0) r.tie_cut = equal_keys(keys[*limit - 1], keys[*limit]);
    r.rows.erase(r.rows.begin() + static_cast<std::ptrdiff_t>(*limit), r.rows.end());
}

struct Bucket {
    Value key;
    std::vector<std::size_t> rows;
};

auto buckets(const std::string& field, const Table& table, const DataSchema& schema, const std::vector<std::size_t>& rows)
    -> std::vector<Bucket> {
    std::vector<Bucket> out;
    for (auto r : rows) {
        Value v = cell(table, schema, field, r);
        if (is_missing(v)) continue;
        bool placed = false;
        for (auto& b : out) {
            if (same_group(b.key, v)) {
                b.rows.push_back(r);
                placed = true;
                break;
            }
        }
        if (!placed) out.push_back({v, {r}});
    }
    std::vector<std::size_t> order(out.size());
    std::vector<Value> keys;
    for (std::size_t i = 0; i < out.size(); ++i) {
        order[i] = i;
        keys.push_back(out[i].key);
    }
    sort_by_keys(order, keys, Direction::Asc);
    std::vector<Bucket> sorted;
    for (auto i : order) sorted.push_back(out[i]);
    return sorted;
}

auto grouped(const QueryPlan& plan, const Table& table, const DataSchema& schema, const std::vector<std::size_t>& rows)
    -> ResultSet {
    const GroupBy& g = *plan.group_by;
    ResultSet r;
    r.shape = ResultShape::GroupedPairs;
    if (g.post == GroupPost::CompareCounts) {
        r.columns = {g.field, "count"};
        for (const auto& value : g.values) {
            std::int64_t n = 0;
            for (auto row : rows) {
                Value v = cell(table, schema, g.field, row);
                if (!is_missing(v) && compare(v, value) == 0) ++n;
            }
            r.rows.push_back({value, n});
        }
        r.total_row_count = r.rows.size();
        return r;
    }
    auto groups = buckets(g.field, table, schema, rows);
    if (g.post == GroupPost::ArgmaxCount) {
        r.columns = {g.field, "count"};
        r.total_row_count = groups.size();
        std::size_t most = 0;
        for (const auto& b : groups) most = std::max(most, b.rows.size());
        std::size_t winners = 0;
        for (const auto& b : groups) {
            if (b.rows.size() != most) continue;
            if (winners++ == 0) r.rows.push_back({b.key, static_cast<std::int64_t>(most)});
        }
        r.tie_cut = winners > 1;
        return r;
    }
    const Aggregate& a = *plan.aggregate;
    r.columns = {g.field, label(a)};
    std::vector<Value> values;
    std::vector<Value> group_keys;
    for (const auto& b : groups) {
        values.push_back(aggregate(a, table, schema, b.rows));
        group_keys.push_back(b.key);
    }
    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<Value> keys;
    if (plan.order_by) {
        const bool by_value = plan.order_by->field != g.field;
        sort_by_keys(order, by_value ? values : group_keys, plan.order_by->direction);
        if (by_value) {
            for (auto i : order) keys.push_back(values[i]);
        }
    }
    for (auto i : order) r.rows.push_back({group_keys[i], values[i]});
    cut(r, plan.limit, keys);
    return r;
}

auto cells_equal(const Value& a, const Value& b, double tol) -> bool {
    if (a.index() != b.index()) return false;
    if (const auto* x = std::get_if<double>(&a)) {
        double y = std::get<double>(b);
        if (std::isnan(*x) || std::isnan(y)) return std::isnan(*x) && std::isnan(y);
        return std::fabs(*x - y) <= tol * std::max({1e-300, std::fabs(*x), std::fabs(y)}) || *x == y;
    }
    return a == b;
}

}  // namespace

auto compare(const Value& a, const Value& b) -> int {
    const auto* ia = std::get_if<std::int64_t>(&a);
    const auto* ib = std::get_if<std::int64_t>(&b);
    if (ia != nullptr && ib != nullptr) return *ia < *ib ? -1 : (*ia > *ib ? 1 : 0);
    auto da = as_double(a);
    auto db = as_double(b);
    if (da && db) return three_way(*da, *db);
    const auto* sa = std::get_if<std::string>(&a);
    const auto* sb = std::get_if<std::string>(&b);
    if (sa != nullptr && sb != nullptr) {
        std::string x = text::fold(*sa);
        std::string y = text::fold(*sb);
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    auto ta = seconds_of(a);
    auto tb = seconds_of(b);
    if (ta && tb) return *ta < *tb ? -1 : (*ta > *tb ? 1 : 0);
    const auto* ba = std::get_if<bool>(&a);
    const auto* bb = std::get_if<bool>(&b);
    if (ba != nullptr && bb != nullptr) return static_cast<int>(*ba) - static_cast<int>(*bb);
    return a.index() < b.index() ? -1 : (a.index() > b.index() ? 1 : 0);
}

auto execute(const QueryPlan& raw, const Table& table, const DataSchema& schema) -> ResultSet {
    const QueryPlan plan = normalize_plan(raw, schema);
    const auto kind = plan.projection.kind;
    if (kind == ProjectionKind::ColumnCount) return scalar("columns", static_cast<std::int64_t>(table.column_count()));
    if (kind == ProjectionKind::MetaSource) {
        return scalar("source", schema.source.origin.empty() ? Value{} : Value{schema.source.origin});
    }
    if (kind == ProjectionKind::MetaAge) {
        return scalar("importedAt",
                      schema.source.imported_at ? Value{format_timestamp(*schema.source.imported_at)} : Value{});
    }
    if (kind == ProjectionKind::Help) return scalar("help", Missing{});

    const auto rows = selected(plan, table, schema);
    if (plan.group_by) return grouped(plan, table, schema, rows);
    if (plan.aggregate) return scalar(label(*plan.aggregate), aggregate(*plan.aggregate, table, schema, rows));
    if (kind == ProjectionKind::RowCount) return scalar("count", static_cast<std::int64_t>(rows.size()));
    if (kind == ProjectionKind::DistinctCount) {
        return scalar("distinct(" + plan.projection.field + ")",
                      static_cast<std::int64_t>(buckets(plan.projection.field, table, schema, rows).size()));
    }
    ResultSet r;
    if (kind == ProjectionKind::DistinctValues) {
        r.columns = {plan.projection.field};
        for (const auto& b : buckets(plan.projection.field, table, schema, rows)) r.rows.push_back({b.key});
        cut(r, plan.limit, {});
        return r;
    }

    if (kind == ProjectionKind::Fields) {
        r.columns = plan.projection.fields;
    } else {
        for (const auto& f : schema.fields) r.columns.push_back(f.name);
    }
    std::vector<std::size_t> order;
    std::vector<Value> by_position;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        order.push_back(i);
        by_position.push_back(plan.order_by ? cell(table, schema, plan.order_by->field, rows[i]) : Value{});
    }
    std::vector<Value> keys;
    if (plan.order_by) {
        sort_by_keys(order, by_position, plan.order_by->direction);
        for (auto i : order) keys.push_back(by_position[i]);
    }
    for (auto i : order) {
        std::vector<Value> out;
        for (const auto& c : r.columns) out.push_back(cell(table, schema, c, rows[i]));
        r.rows.push_back(std::move(out));
    }
    cut(r, plan.limit, keys);
    return r;
}

auto equivalent(const ResultSet& a, const ResultSet& b, double rel_tol) -> bool {
    if (a.shape != b.shape || a.columns != b.columns || a.rows.size() != b.rows.size()) return false;
    if (a.total_row_count != b.total_row_count || a.tie_cut != b.tie_cut) return false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (a.rows[i].size() != b.rows[i].size()) return false;
        for (std::size_t j = 0; j < a.rows[i].size(); ++j) {
            if (!cells_equal(a.rows[i][j], b.rows[i][j], rel_tol)) return false;
        }
    }
    return true;
}

}  // namespace tabot::reference
