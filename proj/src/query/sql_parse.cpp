#include <algorithm>
#include <cctype>
#include <memory>

#include "tabot/error.hpp"
#include "tabot/parse.hpp"
#include "tabot/query.hpp"
#include "tabot/text.hpp"

namespace tabot {

namespace {

auto bad(const std::string& what) -> Error { return Error(ErrorCode::InvalidSql, "unsupported SQL: " + what, what); }

enum class Tok { Ident, Keyword, Number, String, Symbol, End };

struct Token {
    Tok kind;
    std::string text;  ///< keywords upper-cased; identifiers unquoted
    bool quoted = false;
};

auto is_keyword(const std::string& upper) -> bool {
    static const char* kKeywords[] = {"SELECT", "DISTINCT", "FROM",  "WHERE", "AND",  "OR",   "NOT",   "BETWEEN",
                                      "LIKE",   "GROUP",    "BY",    "ORDER", "ASC",  "DESC", "LIMIT", "COUNT",
                                      "SUM",    "AVG",      "MIN",   "MAX",   "LOWER", "UPPER", "TRUE", "FALSE",
                                      "DATE",   "AS",       "ESCAPE", "IS",   "NULL", "JOIN",  "UNION", "INSERT",
                                      "UPDATE", "DELETE",   "DROP",  "HAVING", "OFFSET", "IN"};
    return std::any_of(std::begin(kKeywords), std::end(kKeywords), [&](const char* k) { return upper == k; });
}

auto lex(std::string_view sql) -> std::vector<Token> {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < sql.size()) {
        char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c)) != 0) {
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') throw bad("comments");
        if (std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_') {
            std::size_t j = i;
            while (j < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[j])) != 0 || sql[j] == '_')) ++j;
            std::string word(sql.substr(i, j - i));
            std::string upper = word;
            std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
            if (is_keyword(upper)) {
                out.push_back({Tok::Keyword, upper});
            } else {
                out.push_back({Tok::Ident, word});
            }
            i = j;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) != 0 ||
            (c == '.' && i + 1 < sql.size() && std::isdigit(static_cast<unsigned char>(sql[i + 1])) != 0)) {
            std::size_t j = i;
            while (j < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[j])) != 0 || sql[j] == '.')) ++j;
            out.push_back({Tok::Number, std::string(sql.substr(i, j - i))});
            i = j;
            continue;
        }
        if (c == '\'' || c == '"') {
            std::string value;
            std::size_t j = i + 1;
            bool closed = false;
            while (j < sql.size()) {
                if (sql[j] == c) {
                    if (j + 1 < sql.size() && sql[j + 1] == c) {
                        value += c;
                        j += 2;
                        continue;
                    }
                    closed = true;
                    ++j;
                    break;
                }
                value += sql[j++];
            }
            if (!closed) throw bad("unterminated quote");
            out.push_back({c == '\'' ? Tok::String : Tok::Ident, value, c == '"'});
            i = j;
            continue;
        }
        static const std::string_view kTwo[] = {"<=", ">=", "<>", "!="};
        bool matched = false;
        for (auto two : kTwo) {
            if (sql.substr(i, 2) == two) {
                out.push_back({Tok::Symbol, std::string(two)});
                i += 2;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (std::string_view("*(),=<>;").find(c) != std::string_view::npos) {
            out.push_back({Tok::Symbol, std::string(1, c)});
            ++i;
            continue;
        }
        throw bad(std::string("character '") + c + "'");
    }
    out.push_back({Tok::End, ""});
    return out;
}

struct Cond {
    enum class Kind { And, Or, Leaf } kind = Kind::Leaf;
    std::vector<std::unique_ptr<Cond>> children;
    Predicate predicate;
};

struct SelectItem {
    enum class Kind { Star, Column, CountStar, CountDistinct, Aggregate } kind = Kind::Column;
    std::string field;
    AggregateFn fn = AggregateFn::Count;
};

class Parser {
public:
    Parser(std::vector<Token> tokens, const DataSchema& schema) : t_(std::move(tokens)), schema_(schema) {}

    auto parse() -> QueryPlan {
        expect_kw("SELECT");
        bool distinct = accept_kw("DISTINCT");
        std::vector<SelectItem> items;
        do {
            items.push_back(select_item());
        } while (accept_sym(","));
        expect_kw("FROM");
        if (peek().kind != Tok::Ident) throw bad("expected a table name");
        next();
        if (peek().kind == Tok::Ident) next();  // table alias

        QueryPlan plan;
        if (accept_kw("WHERE")) {
            auto cond = disjunction();
            plan.filters = to_cnf(*cond);
        }
        std::optional<std::string> group;
        if (accept_kw("GROUP")) {
            expect_kw("BY");
            group = column_ref();
        }
        struct Order {
            std::optional<std::size_t> position;
            std::optional<SelectItem> item;
            Direction dir = Direction::Asc;
        };
        std::optional<Order> order;
        if (accept_kw("ORDER")) {
            expect_kw("BY");
            Order o;
            if (peek().kind == Tok::Number) {
                o.position = static_cast<std::size_t>(std::stoul(next().text));
            } else {
                o.item = select_item();
            }
            if (accept_kw("DESC")) {
                o.dir = Direction::Desc;
            } else {
                accept_kw("ASC");
            }
            if (peek().kind == Tok::Symbol && peek().text == ",") throw bad("more than one ORDER BY key");
            order = o;
        }
        if (accept_kw("LIMIT")) {
            if (peek().kind != Tok::Number) throw bad("LIMIT needs a number");
            auto n = parse::integer(next().text);
            if (!n || *n <= 0) throw bad("LIMIT must be positive");
            plan.limit = static_cast<std::size_t>(*n);
        }
        accept_sym(";");
        if (peek().kind != Tok::End) throw bad("trailing input near '" + peek().text + "'");

        auto order_target = [&]() -> std::optional<SelectItem> {
            if (!order) return std::nullopt;
            if (order->position) {
                if (*order->position == 0 || *order->position > items.size()) throw bad("ORDER BY position out of range");
                return items[*order->position - 1];
            }
            return order->item;
        };

        if (group) {
            if (items.size() != 2 || items[0].kind != SelectItem::Kind::Column || items[0].field != *group) {
                throw bad("GROUP BY must select the group column and one aggregate");
            }
            const auto& metric = items[1];
            plan.projection.kind = ProjectionKind::All;
            if (metric.kind == SelectItem::Kind::CountStar) {
                plan.aggregate = Aggregate{AggregateFn::Count, *group};
            } else if (metric.kind == SelectItem::Kind::Aggregate) {
                plan.aggregate = Aggregate{metric.fn, metric.field};
            } else {
                throw bad("GROUP BY needs an aggregate");
            }
            plan.group_by = GroupBy{*group, GroupPost::PerGroupAggregate, {}};
            if (auto target = order_target()) {
                bool by_key = target->kind == SelectItem::Kind::Column && target->field == *group;
                plan.order_by = OrderBy{by_key ? *group : plan.aggregate->field, order->dir};
                if (!by_key && target->kind == SelectItem::Kind::Column) throw bad("ORDER BY must use the group or the aggregate");
            }
            return plan;
        }

        if (items.size() == 1 && items[0].kind == SelectItem::Kind::Star) {
            plan.projection.kind = ProjectionKind::All;
        } else if (items.size() == 1 && items[0].kind == SelectItem::Kind::CountStar) {
            plan.projection.kind = ProjectionKind::RowCount;
        } else if (items.size() == 1 && items[0].kind == SelectItem::Kind::CountDistinct) {
            plan.projection = {ProjectionKind::DistinctCount, {}, items[0].field};
        } else if (items.size() == 1 && items[0].kind == SelectItem::Kind::Aggregate) {
            plan.aggregate = Aggregate{items[0].fn, items[0].field};
        } else if (distinct && items.size() == 1 && items[0].kind == SelectItem::Kind::Column) {
            plan.projection = {ProjectionKind::DistinctValues, {}, items[0].field};
        } else {
            for (const auto& item : items) {
                if (item.kind != SelectItem::Kind::Column) throw bad("mixing columns and aggregates without GROUP BY");
                plan.projection.fields.push_back(item.field);
            }
            plan.projection.kind = ProjectionKind::Fields;
        }
        if (distinct && plan.projection.kind != ProjectionKind::DistinctValues) throw bad("DISTINCT here");
        if (auto target = order_target()) {
            if (target->kind != SelectItem::Kind::Column) throw bad("ORDER BY an aggregate without GROUP BY");
            plan.order_by = OrderBy{target->field, order->dir};
        }
        return plan;
    }

private:
    auto peek() const -> const Token& { return t_[pos_]; }
    auto next() -> const Token& { return t_[pos_ < t_.size() - 1 ? pos_++ : pos_]; }
    auto accept_kw(const char* kw) -> bool {
        if (peek().kind == Tok::Keyword && peek().text == kw) {
            next();
            return true;
        }
        return false;
    }
    auto expect_kw(const char* kw) -> void {
        if (!accept_kw(kw)) throw bad(std::string("expected ") + kw + " near '" + peek().text + "'");
    }
    auto accept_sym(const char* s) -> bool {
        if (peek().kind == Tok::Symbol && peek().text == s) {
            next();
            return true;
        }
        return false;
    }
    auto expect_sym(const char* s) -> void {
        if (!accept_sym(s)) throw bad(std::string("expected '") + s + "' near '" + peek().text + "'");
    }

    auto resolve(const std::string& name) const -> std::string {
        if (schema_.field(name) != nullptr || schema_.composite(name) != nullptr) return name;
        auto key = text::normalize_name(name);
        for (const auto& f : schema_.fields) {
            if (text::normalize_name(f.name) == key) return f.name;
        }
        for (const auto& c : schema_.composites) {
            if (text::normalize_name(c.name) == key) return c.name;
        }
        throw Error(ErrorCode::InvalidSql, "unknown field '" + name + "'", name);
    }

    /// Column, optionally wrapped in LOWER()/UPPER() (comparison is case-insensitive anyway).
    auto column_ref() -> std::string {
        if (accept_kw("LOWER") || accept_kw("UPPER")) {
            expect_sym("(");
            auto c = column_ref();
            expect_sym(")");
            return c;
        }
        if (peek().kind != Tok::Ident) throw bad("expected a column near '" + peek().text + "'");
        return resolve(next().text);
    }

    auto select_item() -> SelectItem {
        SelectItem item;
        if (accept_sym("*")) {
            item.kind = SelectItem::Kind::Star;
            return item;
        }
        static const std::pair<const char*, AggregateFn> kFns[] = {
            {"COUNT", AggregateFn::Count}, {"SUM", AggregateFn::Sum}, {"AVG", AggregateFn::Avg},
            {"MIN", AggregateFn::Min},     {"MAX", AggregateFn::Max}};
        for (const auto& [kw, fn] : kFns) {
            if (!accept_kw(kw)) continue;
            expect_sym("(");
            if (fn == AggregateFn::Count && accept_sym("*")) {
                item.kind = SelectItem::Kind::CountStar;
            } else if (fn == AggregateFn::Count && accept_kw("DISTINCT")) {
                item.kind = SelectItem::Kind::CountDistinct;
                item.field = column_ref();
            } else if (fn == AggregateFn::Count) {
                throw bad("COUNT(column); use COUNT(*)");
            } else {
                item.kind = SelectItem::Kind::Aggregate;
                item.fn = fn;
                item.field = column_ref();
            }
            expect_sym(")");
            skip_alias();
            return item;
        }
        item.field = column_ref();
        skip_alias();
        return item;
    }

    auto skip_alias() -> void {
        if (accept_kw("AS")) {
            if (peek().kind != Tok::Ident) throw bad("expected an alias");
            next();
        }
    }

    auto literal() -> Value {
        const Token& tok = peek();
        if (tok.kind == Tok::Number) {
            next();
            auto v = parse::number_literal(tok.text);
            if (!v) throw bad("number '" + tok.text + "'");
            return *v;
        }
        if (tok.kind == Tok::String) {
            next();
            return tok.text;
        }
        if (accept_kw("TRUE")) return true;
        if (accept_kw("FALSE")) return false;
        if (accept_kw("DATE")) {
            if (peek().kind != Tok::String) throw bad("DATE needs a string");
            return next().text;
        }
        throw bad("expected a literal near '" + tok.text + "'");
    }

    auto disjunction() -> std::unique_ptr<Cond> {
        auto left = conjunction();
        if (!(peek().kind == Tok::Keyword && peek().text == "OR")) return left;
        auto node = std::make_unique<Cond>();
        node->kind = Cond::Kind::Or;
        node->children.push_back(std::move(left));
        while (accept_kw("OR")) node->children.push_back(conjunction());
        return node;
    }

    auto conjunction() -> std::unique_ptr<Cond> {
        auto left = term();
        if (!(peek().kind == Tok::Keyword && peek().text == "AND")) return left;
        auto node = std::make_unique<Cond>();
        node->kind = Cond::Kind::And;
        node->children.push_back(std::move(left));
        while (accept_kw("AND")) node->children.push_back(term());
        return node;
    }

    auto term() -> std::unique_ptr<Cond> {
        if (accept_sym("(")) {
            auto inner = disjunction();
            expect_sym(")");
            return inner;
        }
        if (peek().kind == Tok::Keyword && peek().text == "NOT") throw bad("NOT");
        auto leaf = std::make_unique<Cond>();
        leaf->predicate = comparison();
        return leaf;
    }

    auto comparison() -> Predicate {
        // literal op column is flipped to column op' literal
        if (peek().kind == Tok::Number || peek().kind == Tok::String) {
            Value v = literal();
            std::string op = comparator();
            std::string field = column_ref();
            static const std::pair<const char*, const char*> kFlip[] = {
                {"equals", "equals"},        {"not_equals", "not_equals"}, {"less_than", "greater_than"},
                {"less_equal", "greater_equal"}, {"greater_than", "less_than"}, {"greater_equal", "less_equal"}};
            for (const auto& [a, b] : kFlip) {
                if (op == a) return {field, b, {v}};
            }
        }
        std::string field = column_ref();
        if (accept_kw("BETWEEN")) {
            Value lo = literal();
            expect_kw("AND");
            Value hi = literal();
            return {field, "between", {lo, hi}};
        }
        if (accept_kw("LIKE")) {
            if (peek().kind != Tok::String) throw bad("LIKE needs a string pattern");
            std::string pattern = next().text;
            if (accept_kw("ESCAPE")) {
                if (peek().kind != Tok::String) throw bad("ESCAPE needs a string");
                next();
            }
            return like(field, pattern);
        }
        if (accept_kw("NOT") || accept_kw("IS") || accept_kw("IN")) throw bad("NOT/IS/IN conditions");
        std::string op = comparator();
        return {field, op, {literal()}};
    }

    auto comparator() -> std::string {
        static const std::pair<const char*, const char*> kOps[] = {{"=", "equals"},     {"<>", "not_equals"},
                                                                   {"!=", "not_equals"}, {"<=", "less_equal"},
                                                                   {">=", "greater_equal"}, {"<", "less_than"},
                                                                   {">", "greater_than"}};
        for (const auto& [sym, op] : kOps) {
            if (accept_sym(sym)) return op;
        }
        throw bad("expected a comparison near '" + peek().text + "'");
    }

    static auto like(const std::string& field, const std::string& pattern) -> Predicate {
        std::string body;
        bool lead = !pattern.empty() && pattern.front() == '%';
        bool trail = pattern.size() > 1 && pattern.back() == '%' && pattern[pattern.size() - 2] != '\\';
        std::size_t from = lead ? 1 : 0;
        std::size_t to = pattern.size() - (trail ? 1 : 0);
        for (std::size_t i = from; i < to; ++i) {
            char c = pattern[i];
            if (c == '\\' && i + 1 < to) {
                body += pattern[++i];
                continue;
            }
            if (c == '%' || c == '_') throw bad("LIKE wildcard in the middle of a pattern");
            body += c;
        }
        const char* op = lead && trail ? "contains" : lead ? "ends_with" : trail ? "starts_with" : "equals";
        return {field, op, {Value{body}}};
    }

    /// AND of (OR of comparisons); anything else is not in CNF and is rejected.
    static auto to_cnf(const Cond& c) -> std::vector<Clause> {
        std::vector<Clause> out;
        auto clause_of = [](const Cond& d) -> Clause {
            if (d.kind == Cond::Kind::Leaf) return {d.predicate};
            if (d.kind == Cond::Kind::And) throw bad("WHERE must be a conjunction of disjunctions");
            Clause clause;
            for (const auto& child : d.children) {
                if (child->kind != Cond::Kind::Leaf) throw bad("WHERE must be a conjunction of disjunctions");
                clause.push_back(child->predicate);
            }
            return clause;
        };
        if (c.kind == Cond::Kind::And) {
            for (const auto& child : c.children) {
                if (child->kind == Cond::Kind::And) {
                    for (auto& nested : to_cnf(*child)) out.push_back(std::move(nested));
                } else {
                    out.push_back(clause_of(*child));
                }
            }
        } else {
            out.push_back(clause_of(c));
        }
        return out;
    }

    std::vector<Token> t_;
    std::size_t pos_ = 0;
    const DataSchema& schema_;
};

}  // namespace

auto parse_sql(std::string_view sql, const DataSchema& schema) -> QueryPlan {
    QueryPlan plan = Parser(lex(sql), schema).parse();
    try {
        return normalize_plan(plan, schema);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidSql, std::string("invalid query: ") + e.what(), e.detail());
    }
}

}  // namespace tabot
