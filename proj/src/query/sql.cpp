#include <algorithm>
#include <cctype>

#include "tabot/error.hpp"
#include "tabot/query.hpp"
#include "tabot/text.hpp"

namespace tabot {

namespace {

auto quote(std::string_view id) -> std::string {
    std::string out = "\"";
    for (char c : id) {
        out += c;
        if (c == '"') out += '"';
    }
    return out + "\"";
}

auto like_escape(const std::string& s) -> std::string {
    std::string out;
    for (char c : s) {
        if (c == '%' || c == '_' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

auto plain_identifier(std::string_view id) -> bool {
    if (id.empty() || std::isdigit(static_cast<unsigned char>(id[0])) != 0) return false;
    return std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; });
}

class Renderer {
public:
    Renderer(const DataSchema& schema, SqlDialect dialect, std::string_view table)
        : schema_(schema), dialect_(dialect), table_(plain_identifier(table) ? std::string(table) : quote(table)) {}

    auto render(const QueryPlan& plan) -> SqlRendering {
        SqlRendering out;
        switch (plan.projection.kind) {
            case ProjectionKind::ColumnCount:
            case ProjectionKind::MetaSource:
            case ProjectionKind::MetaAge:
            case ProjectionKind::Help:
                out.representable = false;
                out.reason = "answered from dataset metadata, not from rows";
                return out;
            default: break;
        }
        if (plan.group_by && plan.group_by->post == GroupPost::CompareCounts) {
            out.representable = false;
            out.reason = "compareCounts needs one statement per compared value";
            const auto& g = *plan.group_by;
            for (const auto& v : g.values) {
                params_.clear();
                std::string where = where_clause(plan);
                std::string cond = comparable(g.field) + " = ?";
                params_.push_back(param(g.field, v));
                where = where.empty() ? " WHERE " + cond : where + " AND " + cond;
                out.statements.push_back({"SELECT COUNT(*) FROM " + table_ + where, params_});
            }
            return out;
        }
        params_.clear();
        std::string select;
        std::string where = where_clause(plan);
        std::string tail;
        if (plan.group_by) {
            const auto& g = *plan.group_by;
            std::string key = quote(g.field);
            std::string metric = g.post == GroupPost::ArgmaxCount ? "COUNT(*)" : aggregate_expr(*plan.aggregate);
            select = "SELECT " + key + ", " + metric;
            std::string not_null = key + " IS NOT NULL";
            where = where.empty() ? " WHERE " + not_null : where + " AND " + not_null;
            // Groups order like the engine does: by the folded key.
            std::string order_key = comparable(g.field);
            tail = " GROUP BY " + order_key;
            if (g.post == GroupPost::ArgmaxCount) {
                tail += " ORDER BY 2 DESC, " + order_key + " ASC LIMIT 1";
            } else {
                if (plan.order_by && plan.order_by->field != g.field) {
                    tail += " ORDER BY " + nulls_last("2") + "2 " + direction(plan.order_by->direction) + ", " + order_key +
                            " ASC";
                } else {
                    tail += " ORDER BY " + order_key + " " + (plan.order_by ? direction(plan.order_by->direction) : "ASC");
                }
                if (plan.limit) tail += " LIMIT " + std::to_string(*plan.limit);
            }
            return single(select + " FROM " + table_ + where + tail);
        }
        if (plan.aggregate) {
            return single("SELECT " + aggregate_expr(*plan.aggregate) + " FROM " + table_ + where);
        }
        switch (plan.projection.kind) {
            case ProjectionKind::RowCount: return single("SELECT COUNT(*) FROM " + table_ + where);
            case ProjectionKind::DistinctCount:
                return single("SELECT COUNT(DISTINCT " + comparable(plan.projection.field) + ") FROM " + table_ + where);
            case ProjectionKind::DistinctValues: {
                std::string f = value_expr(plan.projection.field);
                std::string not_null = f + " IS NOT NULL";
                where = where.empty() ? " WHERE " + not_null : where + " AND " + not_null;
                tail = " ORDER BY " + comparable(plan.projection.field);
                if (plan.limit) tail += " LIMIT " + std::to_string(*plan.limit);
                return single("SELECT DISTINCT " + f + " FROM " + table_ + where + tail);
            }
            case ProjectionKind::Fields: {
                std::vector<std::string> cols;
                for (const auto& f : plan.projection.fields) cols.push_back(value_expr(f));
                select = "SELECT " + text::join(cols, ", ");
                break;
            }
            default: select = "SELECT *"; break;
        }
        if (plan.order_by) {
            std::string key = comparable(plan.order_by->field);
            tail = " ORDER BY " + nulls_last(value_expr(plan.order_by->field)) + key + " " +
                   direction(plan.order_by->direction);
            if (dialect_ == SqlDialect::Sqlite) tail += ", rowid ASC";
        }
        if (plan.limit) tail += " LIMIT " + std::to_string(*plan.limit);
        return single(select + " FROM " + table_ + where + tail);
    }

private:
    auto single(std::string sql) -> SqlRendering {
        SqlRendering out;
        out.statements.push_back({std::move(sql), params_});
        return out;
    }

    static auto direction(Direction d) -> std::string { return d == Direction::Desc ? "DESC" : "ASC"; }

    static auto nulls_last(const std::string& expr) -> std::string {
        return "CASE WHEN " + expr + " IS NULL THEN 1 ELSE 0 END, ";
    }

    auto type_of(const std::string& name) const -> FieldType {
        if (const auto* f = schema_.field(name)) return f->type;
        return FieldType::Text;
    }

    /// Column or composite concatenation.
    auto value_expr(const std::string& name) -> std::string {
        const auto* c = schema_.composite(name);
        if (c == nullptr) return quote(name);
        std::string out = "(";
        for (std::size_t i = 0; i < c->parts.size(); ++i) {
            if (i > 0) out += " || '" + sql_literal_separator(c->separator) + "' || ";
            out += quote(c->parts[i]);
        }
        return out + ")";
    }

    /// Separators come from the schema, never from user input; quotes are doubled.
    static auto sql_literal_separator(const std::string& sep) -> std::string {
        std::string out;
        for (char ch : sep) {
            out += ch;
            if (ch == '\'') out += '\'';
        }
        return out;
    }

    /// Expression compared against parameters: text is lower-cased on both sides.
    auto comparable(const std::string& name) -> std::string {
        if (type_of(name) == FieldType::Text) return "LOWER(" + value_expr(name) + ")";
        return value_expr(name);
    }

    auto param(const std::string& field, const Value& v) const -> Value {
        if (type_of(field) == FieldType::Text) return text::fold(to_string(v));
        if (std::holds_alternative<Date>(v) || std::holds_alternative<Datetime>(v)) return to_string(v);
        return v;
    }

    auto aggregate_expr(const Aggregate& a) -> std::string {
        if (a.fn == AggregateFn::Count) return "COUNT(*)";
        std::string fn = a.fn == AggregateFn::Sum ? "SUM" : a.fn == AggregateFn::Avg ? "AVG" : a.fn == AggregateFn::Min ? "MIN" : "MAX";
        std::string arg = quote(a.field);
        if (a.fn == AggregateFn::Avg && dialect_ == SqlDialect::Ansi) arg = "CAST(" + arg + " AS DOUBLE PRECISION)";
        return fn + "(" + arg + ")";
    }

    auto predicate(const Predicate& p) -> std::string {
        std::string lhs = comparable(p.field);
        auto bind = [&](const Value& v) {
            params_.push_back(param(p.field, v));
            return std::string("?");
        };
        auto like = [&](const std::string& pattern) {
            params_.push_back(pattern);
            return lhs + " LIKE ? ESCAPE '\\'";
        };
        const std::string v0 = p.values.empty() ? std::string{} : text::fold(to_string(p.values[0]));
        if (p.op == "equals") return lhs + " = " + bind(p.values[0]);
        if (p.op == "not_equals") return lhs + " <> " + bind(p.values[0]);
        if (p.op == "less_than" || p.op == "before") return lhs + " < " + bind(p.values[0]);
        if (p.op == "less_equal") return lhs + " <= " + bind(p.values[0]);
        if (p.op == "greater_than" || p.op == "after") return lhs + " > " + bind(p.values[0]);
        if (p.op == "greater_equal") return lhs + " >= " + bind(p.values[0]);
        if (p.op == "between") {
            std::string lo = bind(p.values[0]);
            return lhs + " BETWEEN " + lo + " AND " + bind(p.values[1]);
        }
        if (p.op == "contains") return like("%" + like_escape(v0) + "%");
        if (p.op == "starts_with") return like(like_escape(v0) + "%");
        if (p.op == "ends_with") return like("%" + like_escape(v0));
        throw Error(ErrorCode::InvalidPlan, "operator '" + p.op + "' has no SQL form", p.op);
    }

    auto where_clause(const QueryPlan& plan) -> std::string {
        std::vector<std::string> clauses;
        for (const auto& clause : plan.filters) {
            std::vector<std::string> parts;
            for (const auto& p : clause) parts.push_back(predicate(p));
            clauses.push_back(parts.size() == 1 ? parts[0] : "(" + text::join(parts, " OR ") + ")");
        }
        if (clauses.empty()) return {};
        return " WHERE " + text::join(clauses, " AND ");
    }

    const DataSchema& schema_;
    SqlDialect dialect_;
    std::string table_;
    std::vector<Value> params_;
};

}  // namespace

auto render_sql(const QueryPlan& plan, const DataSchema& schema, SqlDialect dialect, std::string_view table)
    -> SqlRendering {
    return Renderer(schema, dialect, table).render(normalize_plan(plan, schema));
}

}  // namespace tabot
