#pragma once

#include <string>
#include <vector>

#include "tabot/engine.hpp"
#include "tabot/ingest.hpp"
#include "tabot/plan.hpp"

namespace tabot {

/// Substitutes the match's bindings into its intent's plan template. Lookup
/// predicates become equality on the owning field (categorical values) or a
/// disjunction over text-like fields (free literals); free categorical
/// mentions become extra equality filters. Throws UnboundSlot when a required
/// slot is empty. The result may still name a field group.
auto build_plan(const MatchResult& match, const BotBundle& bundle) -> QueryPlan;

/// Interpretation notes of the matched intent ("by average salary").
auto interpretation_notes(const MatchResult& match, const BotBundle& bundle, std::string_view locale = "en")
    -> std::vector<std::string>;

struct ExecOptions {
    bool parallel = true;
    /// Tables smaller than this are filtered serially even when `parallel`.
    std::size_t parallel_min_rows = 4096;
};

/// Evaluates a plan over the table. The plan is normalized first, so invalid
/// plans throw InvalidPlan.
auto execute(const QueryPlan& plan, const Table& table, const DataSchema& schema, const ExecOptions& options = {})
    -> ResultSet;

/// Row indices satisfying every filter clause, ascending.
auto filter_rows(const QueryPlan& plan, const Table& table, const DataSchema& schema,
                 const ExecOptions& options = {}) -> std::vector<std::size_t>;

enum class SqlDialect { Ansi, Sqlite };

struct SqlStatement {
    std::string sql;
    std::vector<Value> params;
};

struct SqlRendering {
    std::vector<SqlStatement> statements;
    /// False when the plan needs more than one statement (compareCounts) or has
    /// no SQL equivalent (meta questions); `statements` then holds the fallback.
    bool representable = true;
    std::string reason;
};

auto render_sql(const QueryPlan& plan, const DataSchema& schema, SqlDialect dialect = SqlDialect::Ansi,
                std::string_view table = "t") -> SqlRendering;

/// Guarded SQL subset: one SELECT over one table, WHERE in conjunctive normal
/// form, optional GROUP BY / ORDER BY / LIMIT. Everything else, and any
/// unknown column, throws InvalidSql.
auto parse_sql(std::string_view sql, const DataSchema& schema) -> QueryPlan;

}  // namespace tabot
