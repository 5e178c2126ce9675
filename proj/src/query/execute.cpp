#include <algorithm>
#include <map>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tabot/error.hpp"
#include "tabot/query.hpp"
#include "tabot/text.hpp"

namespace tabot {

namespace {

enum class Op { Equals, NotEquals, Less, LessEqual, Greater, GreaterEqual, Between, Contains, StartsWith, EndsWith };

auto op_from_id(const std::string& id) -> Op {
    static const std::map<std::string, Op, std::less<>> kOps = {
        {"equals", Op::Equals},         {"not_equals", Op::NotEquals},       {"less_than", Op::Less},
        {"less_equal", Op::LessEqual},  {"greater_than", Op::Greater},       {"greater_equal", Op::GreaterEqual},
        {"between", Op::Between},       {"contains", Op::Contains},          {"starts_with", Op::StartsWith},
        {"ends_with", Op::EndsWith},    {"before", Op::Less},                {"after", Op::Greater},
    };
    auto it = kOps.find(id);
    if (it == kOps.end()) throw Error(ErrorCode::InvalidPlan, "operator '" + id + "' has no evaluator", id);
    return it->second;
}

/// Three-way comparison of two non-missing cells of compatible types. Text
/// compares folded; integers compare exactly, mixed numbers as doubles.
auto compare(const Value& a, const Value& b) -> int {
    auto sign = [](auto x, auto y) { return x < y ? -1 : (y < x ? 1 : 0); };
    if (auto x = std::get_if<std::int64_t>(&a)) {
        if (auto y = std::get_if<std::int64_t>(&b)) return sign(*x, *y);
    }
    if (auto x = as_double(a)) {
        if (auto y = as_double(b)) return sign(*x, *y);
    }
    if (auto x = std::get_if<std::string>(&a)) {
        if (auto y = std::get_if<std::string>(&b)) {
            int c = text::fold(*x).compare(text::fold(*y));
            return c < 0 ? -1 : (c > 0 ? 1 : 0);
        }
    }
    if (auto x = std::get_if<Date>(&a)) {
        if (auto y = std::get_if<Date>(&b)) return sign(x->days, y->days);
        if (auto y = std::get_if<Datetime>(&b)) return sign(std::int64_t{x->days} * 86400, y->seconds);
    }
    if (auto x = std::get_if<Datetime>(&a)) {
        if (auto y = std::get_if<Datetime>(&b)) return sign(x->seconds, y->seconds);
        if (auto y = std::get_if<Date>(&b)) return sign(x->seconds, std::int64_t{y->days} * 86400);
    }
    if (auto x = std::get_if<bool>(&a)) {
        if (auto y = std::get_if<bool>(&b)) return sign(*x, *y);
    }
    return sign(a.index(), b.index());
}

/// Accessor for a real field or a composite (parts joined lazily).
class Cells {
public:
    Cells(const Table& table, const DataSchema& schema, const std::string& name) {
        if (const auto* c = schema.composite(name)) {
            for (const auto& part : c->parts) parts_.push_back(column(table, part));
            separator_ = c->separator;
        } else {
            column_ = column(table, name);
        }
    }

    [[nodiscard]] auto at(std::size_t row) const -> Value {
        if (column_ != nullptr) return column_->cells[row];
        std::string joined;
        for (std::size_t i = 0; i < parts_.size(); ++i) {
            const Value& v = parts_[i]->cells[row];
            if (is_missing(v)) return Missing{};
            if (i > 0) joined += separator_;
            joined += to_string(v);
        }
        return joined;
    }

private:
    static auto column(const Table& table, const std::string& name) -> const Column* {
        const Column* c = table.find(name);
        if (c == nullptr) throw Error(ErrorCode::UnknownField, "table has no column '" + name + "'", name);
        return c;
    }

    const Column* column_ = nullptr;
    std::vector<const Column*> parts_;
    std::string separator_;
};

struct CompiledPredicate {
    Cells cells;
    Op op;
    std::vector<Value> values;
    std::vector<std::string> folded;  ///< folded text of each value, for substring operators

    [[nodiscard]] auto test(std::size_t row) const -> bool {
        Value cell = cells.at(row);
        if (is_missing(cell)) return false;
        switch (op) {
            case Op::Equals: return compare(cell, values[0]) == 0;
            case Op::NotEquals: return compare(cell, values[0]) != 0;
            case Op::Less: return compare(cell, values[0]) < 0;
            case Op::LessEqual: return compare(cell, values[0]) <= 0;
            case Op::Greater: return compare(cell, values[0]) > 0;
            case Op::GreaterEqual: return compare(cell, values[0]) >= 0;
            case Op::Between: return compare(cell, values[0]) >= 0 && compare(cell, values[1]) <= 0;
            case Op::Contains: return text::fold(to_string(cell)).find(folded[0]) != std::string::npos;
            case Op::StartsWith: {
                auto s = text::fold(to_string(cell));
                return s.compare(0, folded[0].size(), folded[0]) == 0;
            }
            case Op::EndsWith: {
                auto s = text::fold(to_string(cell));
                return s.size() >= folded[0].size() &&
                       s.compare(s.size() - folded[0].size(), folded[0].size(), folded[0]) == 0;
            }
        }
        return false;
    }
};

using CompiledFilter = std::vector<std::vector<CompiledPredicate>>;

auto compile(const QueryPlan& plan, const Table& table, const DataSchema& schema) -> CompiledFilter {
    CompiledFilter out;
    for (const auto& clause : plan.filters) {
        std::vector<CompiledPredicate> c;
        for (const auto& p : clause) {
            CompiledPredicate cp{Cells(table, schema, p.field), op_from_id(p.op), p.values, {}};
            for (const auto& v : p.values) cp.folded.push_back(text::fold(to_string(v)));
            c.push_back(std::move(cp));
        }
        out.push_back(std::move(c));
    }
    return out;
}

auto row_passes(const CompiledFilter& filter, std::size_t row) -> bool {
    for (const auto& clause : filter) {
        bool any = false;
        for (const auto& p : clause) {
            if (p.test(row)) {
                any = true;
                break;
            }
        }
        if (!any) return false;
    }
    return true;
}

auto filter_compiled(const CompiledFilter& filter, std::size_t n, const ExecOptions& options)
    -> std::vector<std::size_t> {
    std::vector<std::size_t> out;
#ifdef _OPENMP
    if (options.parallel && n >= options.parallel_min_rows && omp_get_max_threads() > 1) {
        std::vector<std::vector<std::size_t>> local(static_cast<std::size_t>(omp_get_max_threads()));
        const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel
        {
            auto& mine = local[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
            for (std::int64_t r = 0; r < count; ++r) {
                if (row_passes(filter, static_cast<std::size_t>(r))) mine.push_back(static_cast<std::size_t>(r));
            }
        }
        // Static scheduling hands out contiguous chunks in thread order.
        for (auto& part : local) out.insert(out.end(), part.begin(), part.end());
        if (!std::is_sorted(out.begin(), out.end())) std::sort(out.begin(), out.end());
        return out;
    }
#else
    (void)options;
#endif
    for (std::size_t r = 0; r < n; ++r) {
        if (row_passes(filter, r)) out.push_back(r);
    }
    return out;
}

auto aggregate_label(const Aggregate& a) -> std::string {
    return std::string(aggregate_fn_name(a.fn)) + "(" + a.field + ")";
}

auto aggregate(const Aggregate& a, const Cells& cells, FieldType type, const std::vector<std::size_t>& rows) -> Value {
    if (a.fn == AggregateFn::Count) return static_cast<std::int64_t>(rows.size());
    std::size_t n = 0;
    std::int64_t isum = 0;
    double dsum = 0.0;
    Value best = Missing{};
    for (auto r : rows) {
        Value v = cells.at(r);
        if (is_missing(v)) continue;
        ++n;
        switch (a.fn) {
            case AggregateFn::Sum:
            case AggregateFn::Avg:
                if (auto i = std::get_if<std::int64_t>(&v)) {
                    isum += *i;
                } else {
                    dsum += *as_double(v);
                }
                break;
            case AggregateFn::Min:
                if (is_missing(best) || compare(v, best) < 0) best = v;
                break;
            case AggregateFn::Max:
                if (is_missing(best) || compare(v, best) > 0) best = v;
                break;
            case AggregateFn::Count: break;
        }
    }
    if (n == 0) return Missing{};
    switch (a.fn) {
        case AggregateFn::Sum:
            if (type == FieldType::Integer) return isum;
            return dsum + static_cast<double>(isum);
        case AggregateFn::Avg:
            if (type == FieldType::Integer) return static_cast<double>(isum) / static_cast<double>(n);
            return (dsum + static_cast<double>(isum)) / static_cast<double>(n);
        default: return best;
    }
}

/// Orders by `key` (missing last in both directions); ties keep input order.
template <typename KeyFn>
auto order(std::vector<std::size_t>& idx, KeyFn key, Direction dir) -> void {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const Value& x = key(a);
        const Value& y = key(b);
        if (is_missing(x) || is_missing(y)) return !is_missing(x) && is_missing(y);
        int c = compare(x, y);
        return dir == Direction::Asc ? c < 0 : c > 0;
    });
}

auto same_key(const Value& a, const Value& b) -> bool {
    if (is_missing(a) || is_missing(b)) return is_missing(a) && is_missing(b);
    return compare(a, b) == 0;
}

struct Group {
    Value key;
    std::vector<std::size_t> rows;
};

/// Non-missing group keys in ascending order.
auto group_rows(const Cells& cells, const std::vector<std::size_t>& rows) -> std::vector<Group> {
    std::map<std::string, std::size_t> index;
    std::vector<Group> groups;
    for (auto r : rows) {
        Value v = cells.at(r);
        if (is_missing(v)) continue;
        auto [it, fresh] = index.emplace(canonical_key(v), groups.size());
        if (fresh) groups.push_back({v, {}});
        groups[it->second].rows.push_back(r);
    }
    std::stable_sort(groups.begin(), groups.end(),
                     [](const Group& a, const Group& b) { return compare(a.key, b.key) < 0; });
    return groups;
}

auto field_type(const DataSchema& schema, const std::string& name) -> FieldType {
    if (const auto* f = schema.field(name)) return f->type;
    return FieldType::Text;
}

auto scalar(std::string column, Value v) -> ResultSet {
    ResultSet r;
    r.shape = ResultShape::Scalar;
    r.columns = {std::move(column)};
    r.rows = {{std::move(v)}};
    r.total_row_count = 1;
    return r;
}

auto apply_limit(ResultSet& r, std::optional<std::size_t> limit, const std::vector<Value>& keys) -> void {
    r.total_row_count = r.rows.size();
    if (!limit || *limit >= r.rows.size()) return;
    r.tie_cut = !keys.empty() && same_key(keys[*limit - 1], keys[*limit]);
    r.rows.resize(*limit);
}

auto grouped(const QueryPlan& plan, const Table& table, const DataSchema& schema, const std::vector<std::size_t>& rows)
    -> ResultSet {
    const auto& g = *plan.group_by;
    Cells key_cells(table, schema, g.field);
    ResultSet r;
    r.shape = ResultShape::GroupedPairs;
    switch (g.post) {
        case GroupPost::CompareCounts: {
            r.columns = {g.field, "count"};
            for (const auto& value : g.values) {
                std::int64_t n = 0;
                for (auto row : rows) {
                    Value v = key_cells.at(row);
                    if (!is_missing(v) && compare(v, value) == 0) ++n;
                }
                r.rows.push_back({value, n});
            }
            r.total_row_count = r.rows.size();
            return r;
        }
        case GroupPost::ArgmaxCount: {
            r.columns = {g.field, "count"};
            auto groups = group_rows(key_cells, rows);
            r.total_row_count = groups.size();
            if (groups.empty()) return r;
            std::size_t best = 0;
            for (std::size_t i = 1; i < groups.size(); ++i) {
                if (groups[i].rows.size() > groups[best].rows.size()) best = i;
            }
            for (std::size_t i = 0; i < groups.size(); ++i) {
                if (i != best && groups[i].rows.size() == groups[best].rows.size()) r.tie_cut = true;
            }
            r.rows.push_back({groups[best].key, static_cast<std::int64_t>(groups[best].rows.size())});
            return r;
        }
        case GroupPost::PerGroupAggregate: {
            const auto& a = *plan.aggregate;
            Cells agg_cells(table, schema, a.field);
            FieldType type = field_type(schema, a.field);
            r.columns = {g.field, aggregate_label(a)};
            auto groups = group_rows(key_cells, rows);
            std::vector<Value> values;
            for (const auto& grp : groups) values.push_back(aggregate(a, agg_cells, type, grp.rows));
            std::vector<std::size_t> idx(groups.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::vector<Value> keys;
            if (plan.order_by && plan.order_by->field != g.field) {
                order(idx, [&](std::size_t i) -> const Value& { return values[i]; }, plan.order_by->direction);
                for (auto i : idx) keys.push_back(values[i]);
            } else if (plan.order_by) {
                order(idx, [&](std::size_t i) -> const Value& { return groups[i].key; }, plan.order_by->direction);
            }
            for (auto i : idx) r.rows.push_back({groups[i].key, values[i]});
            apply_limit(r, plan.limit, keys);
            return r;
        }
    }
    return r;
}

}  // namespace

auto filter_rows(const QueryPlan& plan, const Table& table, const DataSchema& schema, const ExecOptions& options)
    -> std::vector<std::size_t> {
    return filter_compiled(compile(plan, table, schema), table.row_count(), options);
}

auto execute(const QueryPlan& raw, const Table& table, const DataSchema& schema, const ExecOptions& options)
    -> ResultSet {
    const QueryPlan plan = normalize_plan(raw, schema);
    switch (plan.projection.kind) {
        case ProjectionKind::ColumnCount:
            return scalar("columns", static_cast<std::int64_t>(table.column_count()));
        case ProjectionKind::MetaSource:
            return scalar("source", schema.source.origin.empty() ? Value{Missing{}} : Value{schema.source.origin});
        case ProjectionKind::MetaAge:
            return scalar("importedAt", schema.source.imported_at ? Value{format_timestamp(*schema.source.imported_at)}
                                                                  : Value{Missing{}});
        case ProjectionKind::Help: return scalar("help", Missing{});
        default: break;
    }

    const auto rows = filter_rows(plan, table, schema, options);
    if (plan.group_by) return grouped(plan, table, schema, rows);
    if (plan.aggregate) {
        Cells cells(table, schema, plan.aggregate->field);
        return scalar(aggregate_label(*plan.aggregate),
                      aggregate(*plan.aggregate, cells, field_type(schema, plan.aggregate->field), rows));
    }

    switch (plan.projection.kind) {
        case ProjectionKind::RowCount: return scalar("count", static_cast<std::int64_t>(rows.size()));
        case ProjectionKind::DistinctCount: {
            Cells cells(table, schema, plan.projection.field);
            std::vector<std::string> keys;
            for (auto r : rows) {
                Value v = cells.at(r);
                if (!is_missing(v)) keys.push_back(canonical_key(v));
            }
            std::sort(keys.begin(), keys.end());
            keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
            return scalar("distinct(" + plan.projection.field + ")", static_cast<std::int64_t>(keys.size()));
        }
        case ProjectionKind::DistinctValues: {
            Cells cells(table, schema, plan.projection.field);
            ResultSet r;
            r.columns = {plan.projection.field};
            for (const auto& grp : group_rows(cells, rows)) r.rows.push_back({grp.key});
            apply_limit(r, plan.limit, {});
            return r;
        }
        default: break;
    }

    ResultSet r;
    std::vector<std::string> names;
    if (plan.projection.kind == ProjectionKind::Fields) {
        names = plan.projection.fields;
    } else {
        for (const auto& f : schema.fields) names.push_back(f.name);
    }
    std::vector<Cells> columns;
    for (const auto& n : names) columns.emplace_back(table, schema, n);
    r.columns = names;

    std::vector<std::size_t> idx = rows;
    std::vector<Value> keys;
    if (plan.order_by) {
        Cells key_cells(table, schema, plan.order_by->field);
        std::vector<Value> by_row(table.row_count());
        for (auto row : idx) by_row[row] = key_cells.at(row);
        order(idx, [&](std::size_t row) -> const Value& { return by_row[row]; }, plan.order_by->direction);
        for (auto row : idx) keys.push_back(by_row[row]);
    }
    for (auto row : idx) {
        std::vector<Value> out;
        out.reserve(columns.size());
        for (const auto& c : columns) out.push_back(c.at(row));
        r.rows.push_back(std::move(out));
    }
    apply_limit(r, plan.limit, keys);
    return r;
}

}  // namespace tabot
