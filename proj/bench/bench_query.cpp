#include <map>
#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "tabot/query.hpp"
#include "tabot/reference.hpp"

using namespace tabot;

namespace {

/// Synthetic people table: id, dept (12 values), salary, age, start date.
auto make_table(std::size_t rows) -> Table {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> dept(0, 11);
    std::uniform_real_distribution<double> salary(20000, 150000);
    std::uniform_int_distribution<int> age(18, 70);
    std::uniform_int_distribution<int> day(15000, 19000);
    std::vector<Column> cols(5);
    cols[0] = {"id", FieldType::Integer, {}, {}};
    cols[1] = {"dept", FieldType::Text, {}, {}};
    cols[2] = {"salary", FieldType::Float, {}, {}};
    cols[3] = {"age", FieldType::Integer, {}, {}};
    cols[4] = {"started", FieldType::Date, {}, {}};
    for (std::size_t r = 0; r < rows; ++r) {
        Value row[] = {static_cast<std::int64_t>(r), "d" + std::to_string(dept(rng)), salary(rng),
                       static_cast<std::int64_t>(age(rng)), Date{day(rng)}};
        for (std::size_t c = 0; c < 5; ++c) {
            cols[c].raw.push_back(to_string(row[c]));
            cols[c].cells.push_back(row[c]);
        }
    }
    return Table(std::move(cols), rows, SourceMeta{"bench", 0});
}

struct Fixture {
    Table table;
    DataSchema schema;
    QueryPlan filter_plan;
    QueryPlan group_plan;

    explicit Fixture(std::size_t rows) : table(make_table(rows)), schema(build_default_schema(table)) {
        filter_plan.projection.kind = ProjectionKind::RowCount;
        filter_plan.filters = {{{"salary", "greater_than", {80000.0}}}, {{"age", "between", {std::int64_t{25}, std::int64_t{45}}}}};
        group_plan.aggregate = Aggregate{AggregateFn::Avg, "salary"};
        group_plan.group_by = GroupBy{"dept", GroupPost::PerGroupAggregate, {}};
        group_plan.order_by = OrderBy{"salary", Direction::Desc};
        group_plan.limit = 3;
    }
};

auto fixture(std::size_t rows) -> const Fixture& {
    static std::map<std::size_t, std::unique_ptr<Fixture>> cache;
    auto& f = cache[rows];
    if (!f) f = std::make_unique<Fixture>(rows);
    return *f;
}

void BM_FilterParallel(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    ExecOptions o;
    o.parallel = true;
    o.parallel_min_rows = 0;
    for (auto _ : state) benchmark::DoNotOptimize(execute(f.filter_plan, f.table, f.schema, o));
}

void BM_FilterSerial(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    ExecOptions o;
    o.parallel = false;
    for (auto _ : state) benchmark::DoNotOptimize(execute(f.filter_plan, f.table, f.schema, o));
}

void BM_FilterReference(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(reference::execute(f.filter_plan, f.table, f.schema));
}

void BM_GroupParallel(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    ExecOptions o;
    o.parallel_min_rows = 0;
    for (auto _ : state) benchmark::DoNotOptimize(execute(f.group_plan, f.table, f.schema, o));
}

void BM_GroupSerial(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    ExecOptions o;
    o.parallel = false;
    for (auto _ : state) benchmark::DoNotOptimize(execute(f.group_plan, f.table, f.schema, o));
}

}  // namespace

BENCHMARK(BM_FilterParallel)->Arg(10000)->Arg(200000);
BENCHMARK(BM_FilterSerial)->Arg(10000)->Arg(200000);
BENCHMARK(BM_FilterReference)->Arg(10000);
BENCHMARK(BM_GroupParallel)->Arg(10000)->Arg(200000);
BENCHMARK(BM_GroupSerial)->Arg(10000)->Arg(200000);

BENCHMARK_MAIN();
