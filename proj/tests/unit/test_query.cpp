#include <doctest.h>

#include <random>

#include "support.hpp"
#include "tabot/engine.hpp"
#include "tabot/error.hpp"
#include "tabot/query.hpp"
#include "tabot/reference.hpp"

using namespace tabot;

namespace {

auto f1() -> const std::pair<Table, DataSchema>& {
    static const std::pair<Table, DataSchema> data{testing::f1_table(), testing::f1_schema()};
    return data;
}

auto run(const QueryPlan& p) -> ResultSet { return execute(p, f1().first, f1().second); }

auto pred(std::string field, std::string op, std::vector<Value> values) -> Clause {
    return {Predicate{std::move(field), std::move(op), std::move(values)}};
}

auto i64(std::int64_t v) -> Value { return Value{v}; }
auto str(const char* s) -> Value { return Value{std::string(s)}; }

auto column_of(const ResultSet& r, const std::string& name) -> std::vector<Value> {
    std::size_t c = 0;
    while (c < r.columns.size() && r.columns[c] != name) ++c;
    REQUIRE(c < r.columns.size());
    std::vector<Value> out;
    for (const auto& row : r.rows) out.push_back(row[c]);
    return out;
}

}  // namespace

TEST_CASE("filters on the officials table") {
    QueryPlan p;
    p.filters.push_back(pred("salary", "greater_than", {i64(120000)}));
    auto r = run(p);
    CHECK(r.shape == ResultShape::Rows);
    CHECK(column_of(r, "first_name") == std::vector<Value>{str("Ada"), str("Laia")});

    QueryPlan between;
    between.filters.push_back(pred("salary", "between", {i64(80000), i64(100000)}));
    CHECK(column_of(run(between), "first_name") == std::vector<Value>{str("Jordi"), str("Joan"), str("Nuria")});

    QueryPlan both;
    both.filters.push_back(pred("age", "less_than", {i64(30)}));
    both.filters.push_back(pred("salary", "greater_than", {i64(50000)}));
    CHECK(column_of(run(both), "first_name") == std::vector<Value>{str("Elena")});

    QueryPlan women;
    women.projection.kind = ProjectionKind::RowCount;
    women.filters.push_back(pred("gender", "equals", {str("f")}));
    CHECK(run(women).scalar() == i64(4));

    QueryPlan composite;
    composite.projection = {ProjectionKind::Fields, {"salary"}, {}};
    composite.filters.push_back(pred("full_name", "equals", {str("Ada Colau")}));
    CHECK(run(composite).rows == std::vector<std::vector<Value>>{{i64(130000)}});
}

TEST_CASE("aggregates and groups on the officials table") {
    QueryPlan avg;
    avg.aggregate = Aggregate{AggregateFn::Avg, "salary"};
    avg.filters.push_back(pred("political_party", "equals", {str("BComu")}));
    auto a = run(avg);
    CHECK(a.shape == ResultShape::Scalar);
    CHECK(std::get<double>(a.scalar()) == doctest::Approx(319000.0 / 3.0));

    QueryPlan sum;
    sum.aggregate = Aggregate{AggregateFn::Sum, "salary"};
    sum.filters.push_back(pred("political_party", "equals", {str("PP")}));
    CHECK(run(sum).scalar() == i64(76000));

    QueryPlan distinct;
    distinct.projection = {ProjectionKind::DistinctCount, {}, "political_party"};
    CHECK(run(distinct).scalar() == i64(4));

    QueryPlan most;
    most.group_by = GroupBy{"political_party", GroupPost::ArgmaxCount, {}};
    auto m = run(most);
    REQUIRE(m.rows.size() == 1);
    CHECK(m.rows[0][0] == str("BComu"));
    CHECK(m.rows[0][1] == i64(3));
    CHECK_FALSE(m.tie_cut);

    QueryPlan top;
    top.aggregate = Aggregate{AggregateFn::Avg, "salary"};
    top.group_by = GroupBy{"political_party", GroupPost::PerGroupAggregate, {}};
    top.order_by = OrderBy{"salary", Direction::Desc};
    top.limit = 3;
    auto t = run(top);
    CHECK(t.shape == ResultShape::GroupedPairs);
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0][0] == str("PSC"));
    CHECK(t.rows[1][0] == str("BComu"));
    CHECK(t.rows[2][0] == str("PP"));
    CHECK(t.total_row_count == 4);

    QueryPlan vs;
    vs.group_by = GroupBy{"gender", GroupPost::CompareCounts, {str("F"), str("M")}};
    auto v = run(vs);
    REQUIRE(v.rows.size() == 2);
    CHECK(v.rows[0][1] == i64(4));
    CHECK(v.rows[1][1] == i64(4));
}

TEST_CASE("limit keeps the total and reports ties") {
    QueryPlan top;
    top.order_by = OrderBy{"salary", Direction::Desc};
    top.limit = 3;
    auto r = run(top);
    CHECK(r.total_row_count == 8);
    CHECK(column_of(r, "salary") == std::vector<Value>{i64(130000), i64(121000), i64(101000)});
    CHECK_FALSE(r.tie_cut);

    QueryPlan party;
    party.order_by = OrderBy{"political_party", Direction::Asc};
    party.limit = 1;
    auto p = run(party);
    CHECK(p.total_row_count == 8);
    CHECK(p.tie_cut);  // three BComu rows share the first key
}

TEST_CASE("meta questions answer from the table header") {
    QueryPlan cols;
    cols.projection.kind = ProjectionKind::ColumnCount;
    CHECK(run(cols).scalar() == i64(6));
    QueryPlan src;
    src.projection.kind = ProjectionKind::MetaSource;
    CHECK(run(src).scalar() == str("officials.csv"));
}

TEST_CASE("invalid plans are rejected") {
    QueryPlan p;
    p.filters.push_back(pred("first_name", "greater_than", {i64(1000)}));
    try {
        (void)run(p);
        FAIL("expected InvalidPlan");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidPlan);
        CHECK(std::string(e.what()).find("numeric operator on Text field") != std::string::npos);
    }
    QueryPlan unknown;
    unknown.filters.push_back(pred("height", "equals", {i64(1)}));
    CHECK_THROWS_AS(run(unknown), Error);
    QueryPlan avg_text;
    avg_text.aggregate = Aggregate{AggregateFn::Avg, "last_name"};
    CHECK_THROWS_AS(run(avg_text), Error);
}

TEST_CASE("plan documents round-trip") {
    QueryPlan p;
    p.filters.push_back(pred("salary", "between", {i64(1), i64(2)}));
    p.aggregate = Aggregate{AggregateFn::Avg, "salary"};
    p.group_by = GroupBy{"gender", GroupPost::PerGroupAggregate, {}};
    p.order_by = OrderBy{"salary", Direction::Desc};
    p.limit = 2;
    CHECK(plan_from_json(plan_to_json(p)) == p);
}

TEST_CASE("build_plan substitutes slot bindings") {
    auto bundle = std::make_shared<const BotBundle>(generate(testing::f1_schema(), catalog(), Strategy::Generic));
    IntentEngine e(bundle);
    auto u = e.understand("What is the average salary of BComu?");
    REQUIRE(u.match.accepted(bundle->matcher.accept_threshold));
    auto plan = normalize_plan(build_plan(u.match, *bundle), bundle->schema);
    REQUIRE(plan.aggregate);
    CHECK(plan.aggregate->fn == AggregateFn::Avg);
    CHECK(plan.aggregate->field == "salary");
    REQUIRE(plan.filters.size() == 1);
    CHECK(plan.filters[0][0] == Predicate{"political_party", "equals", {str("BComu")}});

    MatchResult empty;
    empty.intent = "field_operator_value";
    CHECK_THROWS_AS(build_plan(empty, *bundle), Error);
}

TEST_CASE("SQL rendering of representative plans") {
    const auto& schema = f1().second;
    QueryPlan p;
    p.filters.push_back(pred("salary", "greater_than", {i64(120000)}));
    auto r = render_sql(p, schema);
    REQUIRE(r.representable);
    REQUIRE(r.statements.size() == 1);
    CHECK(r.statements[0].sql == R"(SELECT * FROM t WHERE "salary" > ?)");
    CHECK(r.statements[0].params == std::vector<Value>{i64(120000)});

    QueryPlan w;
    w.projection.kind = ProjectionKind::RowCount;
    w.filters.push_back(pred("gender", "equals", {str("F")}));
    auto wr = render_sql(w, schema);
    CHECK(wr.statements[0].sql == R"(SELECT COUNT(*) FROM t WHERE LOWER("gender") = ?)");
    CHECK(wr.statements[0].params == std::vector<Value>{str("f")});

    QueryPlan like;
    like.filters.push_back(pred("last_name", "contains", {str("50%_")}));
    auto lr = render_sql(like, schema);
    CHECK(lr.statements[0].sql == R"(SELECT * FROM t WHERE LOWER("last_name") LIKE ? ESCAPE '\')");
    CHECK(lr.statements[0].params == std::vector<Value>{str("%50\\%\\_%")});

    QueryPlan vs;
    vs.group_by = GroupBy{"gender", GroupPost::CompareCounts, {str("F"), str("M")}};
    auto vr = render_sql(vs, schema);
    CHECK_FALSE(vr.representable);
    CHECK(vr.statements.size() == 2);

    QueryPlan cols;
    cols.projection.kind = ProjectionKind::ColumnCount;
    CHECK_FALSE(render_sql(cols, schema).representable);
}

TEST_CASE("guarded SQL subset") {
    const auto& schema = f1().second;
    auto p = parse_sql("SELECT COUNT(*) FROM officials WHERE gender = 'F' AND (age < 30 OR salary >= 100000)", schema);
    CHECK(p.projection.kind == ProjectionKind::RowCount);
    REQUIRE(p.filters.size() == 2);
    CHECK(p.filters[1].size() == 2);
    CHECK(run(p).scalar() == i64(3));

    auto g = parse_sql("SELECT political_party, AVG(salary) FROM t GROUP BY political_party ORDER BY 2 DESC LIMIT 1", schema);
    auto gr = run(g);
    REQUIRE(gr.rows.size() == 1);
    CHECK(gr.rows[0][0] == str("PSC"));

    for (const char* bad : {"DELETE FROM t", "SELECT * FROM t; DROP TABLE t", "SELECT * FROM a JOIN b",
                            "SELECT height FROM t", "SELECT * FROM t WHERE salary > (SELECT 1)", ""}) {
        try {
            (void)parse_sql(bad, schema);
            FAIL("accepted: " << bad);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidSql);
        }
    }
}

TEST_CASE("engine agrees with the brute-force reference") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 300; ++i) {
        auto table = testing::random_table(1 + rng() % 60, 4 + rng() % 5, rng);
        auto schema = build_default_schema(table);
        auto plan = testing::random_plan(schema, table, rng);
        INFO(plan_to_json(plan).dump());
        auto expected = reference::execute(plan, table, schema);
        CHECK(reference::equivalent(execute(plan, table, schema), expected));
        ExecOptions serial;
        serial.parallel = false;
        ExecOptions eager;
        eager.parallel_min_rows = 0;
        CHECK(execute(plan, table, schema, serial) == execute(plan, table, schema, eager));
        CHECK(filter_rows(plan, table, schema, serial) == filter_rows(plan, table, schema, eager));
    }
}
