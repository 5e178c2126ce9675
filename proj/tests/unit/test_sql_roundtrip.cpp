#include <doctest.h>

#include <sqlite3.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tabot/query.hpp"
#include "tabot/text.hpp"

using namespace tabot;

// The rendered SQL, run by SQLite over the same rows, must give the engine's
// answer. This checks the SQL view of a plan against an independent executor.

namespace {

class Db {
public:
    Db() { REQUIRE(sqlite3_open(":memory:", &db_) == SQLITE_OK); }
    ~Db() { sqlite3_close(db_); }
    Db(const Db&) = delete;
    auto operator=(const Db&) -> Db& = delete;

    auto exec(const std::string& sql) -> void {
        char* err = nullptr;
        int rc = sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err);
        std::string msg = err != nullptr ? err : "";
        sqlite3_free(err);
        REQUIRE_MESSAGE(rc == SQLITE_OK, msg);
    }

    auto load(const Table& table) -> void {
        std::string ddl = "CREATE TABLE t (";
        std::string ins = "INSERT INTO t VALUES (";
        for (std::size_t c = 0; c < table.column_count(); ++c) {
            ddl += (c ? ", " : "") + std::string("\"") + table.columns()[c].name + "\"";
            ins += c ? ", ?" : "?";
        }
        exec(ddl + ")");
        sqlite3_stmt* stmt = nullptr;
        REQUIRE(sqlite3_prepare_v2(db_, (ins + ")").c_str(), -1, &stmt, nullptr) == SQLITE_OK);
        for (std::size_t r = 0; r < table.row_count(); ++r) {
            sqlite3_reset(stmt);
            for (std::size_t c = 0; c < table.column_count(); ++c) bind(stmt, static_cast<int>(c + 1), table.columns()[c].cells[r]);
            REQUIRE(sqlite3_step(stmt) == SQLITE_DONE);
        }
        sqlite3_finalize(stmt);
    }

    /// Rows as values; text comes back as text, numbers as int64/double.
    auto query(const SqlStatement& s) -> std::vector<std::vector<Value>> {
        sqlite3_stmt* stmt = nullptr;
        int rc = sqlite3_prepare_v2(db_, s.sql.c_str(), -1, &stmt, nullptr);
        REQUIRE_MESSAGE(rc == SQLITE_OK, sqlite3_errmsg(db_) << " in " << s.sql);
        for (std::size_t i = 0; i < s.params.size(); ++i) bind(stmt, static_cast<int>(i + 1), s.params[i]);
        std::vector<std::vector<Value>> out;
        while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
            std::vector<Value> row;
            for (int c = 0; c < sqlite3_column_count(stmt); ++c) {
                switch (sqlite3_column_type(stmt, c)) {
                    case SQLITE_NULL: row.emplace_back(Missing{}); break;
                    case SQLITE_INTEGER: row.emplace_back(static_cast<std::int64_t>(sqlite3_column_int64(stmt, c))); break;
                    case SQLITE_FLOAT: row.emplace_back(sqlite3_column_double(stmt, c)); break;
                    default:
                        row.emplace_back(std::string(reinterpret_cast<const char*>(sqlite3_column_text(stmt, c))));
                        break;
                }
            }
            out.push_back(std::move(row));
        }
        REQUIRE(rc == SQLITE_DONE);
        sqlite3_finalize(stmt);
        return out;
    }

private:
    static auto bind(sqlite3_stmt* stmt, int i, const Value& v) -> void {
        if (is_missing(v)) {
            sqlite3_bind_null(stmt, i);
        } else if (const auto* n = std::get_if<std::int64_t>(&v)) {
            sqlite3_bind_int64(stmt, i, *n);
        } else if (const auto* d = std::get_if<double>(&v)) {
            sqlite3_bind_double(stmt, i, *d);
        } else if (const auto* b = std::get_if<bool>(&v)) {
            sqlite3_bind_int(stmt, i, *b ? 1 : 0);
        } else {
            std::string s = to_string(v);
            sqlite3_bind_text(stmt, i, s.c_str(), static_cast<int>(s.size()), SQLITE_TRANSIENT);
        }
    }

    sqlite3* db_ = nullptr;
};

/// Dates travel as ISO text through SQLite; text compares folded.
auto canonical(const Value& v) -> std::string {
    if (is_missing(v)) return "<null>";
    if (std::holds_alternative<std::string>(v)) return "s:" + text::fold(std::get<std::string>(v));
    if (std::holds_alternative<Date>(v) || std::holds_alternative<Datetime>(v)) return "s:" + to_string(v);
    return "n:" + to_string(v);
}

auto same(const Value& engine, const Value& db) -> bool {
    auto a = as_double(engine);
    auto b = as_double(db);
    if (a && b) return *a == *b || std::fabs(*a - *b) <= 1e-9 * std::max(std::fabs(*a), std::fabs(*b));
    return canonical(engine) == canonical(db);
}

auto same_rows(const std::vector<std::vector<Value>>& engine, const std::vector<std::vector<Value>>& db) -> bool {
    if (engine.size() != db.size()) return false;
    for (std::size_t r = 0; r < engine.size(); ++r) {
        if (engine[r].size() != db[r].size()) return false;
        for (std::size_t c = 0; c < engine[r].size(); ++c) {
            if (!same(engine[r][c], db[r][c])) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("SQLite agrees with the engine on rendered plans") {
    std::mt19937_64 rng(99);
    int compared = 0;
    for (int i = 0; i < 400; ++i) {
        auto table = testing::random_table(1 + rng() % 50, 6, rng);
        auto schema = build_default_schema(table);
        auto plan = testing::random_plan(schema, table, rng);
        auto rendering = render_sql(plan, schema, SqlDialect::Sqlite);
        auto result = execute(plan, table, schema);
        Db db;
        db.load(table);
        INFO(plan_to_json(plan).dump());
        if (!rendering.representable) {
            // compareCounts: one COUNT statement per value.
            REQUIRE(plan.group_by);
            REQUIRE(rendering.statements.size() == result.rows.size());
            for (std::size_t k = 0; k < rendering.statements.size(); ++k) {
                auto rows = db.query(rendering.statements[k]);
                CHECK(same(result.rows[k][1], rows.at(0).at(0)));
            }
            ++compared;
            continue;
        }
        REQUIRE(rendering.statements.size() == 1);
        INFO(rendering.statements[0].sql);
        auto rows = db.query(rendering.statements[0]);
        if (result.shape == ResultShape::Scalar) {
            REQUIRE(rows.size() == 1);
            CHECK(same(result.scalar(), rows[0][0]));
        } else {
            CHECK(same_rows(result.rows, rows));
        }
        ++compared;
    }
    CHECK(compared == 400);
}
