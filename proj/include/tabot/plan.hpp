#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tabot/patterns.hpp"
#include "tabot/schema.hpp"
#include "tabot/value.hpp"

namespace tabot {

enum class ProjectionKind {
    All,
    Fields,
    RowCount,
    ColumnCount,
    DistinctCount,
    DistinctValues,
    MetaSource,
    MetaAge,
    Help,
};

auto projection_kind_name(ProjectionKind k) -> std::string_view;
auto parse_projection_kind(std::string_view s) -> std::optional<ProjectionKind>;

struct Projection {
    ProjectionKind kind = ProjectionKind::All;
    std::vector<std::string> fields;  ///< Fields
    std::string field;                ///< DistinctCount, DistinctValues

    auto operator==(const Projection&) const -> bool = default;
};

/// `field op values`. `field` is a real field or a composite.
struct Predicate {
    std::string field;
    std::string op;
    std::vector<Value> values;

    auto operator==(const Predicate&) const -> bool = default;
};

/// Disjunction of predicates; a plan's filters are a conjunction of clauses.
using Clause = std::vector<Predicate>;

enum class AggregateFn { Count, Sum, Avg, Min, Max };

auto aggregate_fn_name(AggregateFn f) -> std::string_view;
auto parse_aggregate_fn(std::string_view s) -> std::optional<AggregateFn>;

struct Aggregate {
    AggregateFn fn = AggregateFn::Count;
    std::string field;

    auto operator==(const Aggregate&) const -> bool = default;
};

enum class GroupPost { ArgmaxCount, CompareCounts, PerGroupAggregate };

auto group_post_name(GroupPost p) -> std::string_view;
auto parse_group_post(std::string_view s) -> std::optional<GroupPost>;

struct GroupBy {
    std::string field;
    GroupPost post = GroupPost::ArgmaxCount;
    std::vector<Value> values;  ///< CompareCounts: the values to compare

    auto operator==(const GroupBy&) const -> bool = default;
};

enum class Direction { Asc, Desc };

struct OrderBy {
    std::string field;
    Direction direction = Direction::Asc;

    auto operator==(const OrderBy&) const -> bool = default;
};

struct QueryPlan {
    Projection projection;
    std::vector<Clause> filters;
    std::optional<Aggregate> aggregate;
    std::optional<GroupBy> group_by;
    std::optional<OrderBy> order_by;
    std::optional<std::size_t> limit;

    auto operator==(const QueryPlan&) const -> bool = default;
};

auto plan_to_json(const QueryPlan& plan) -> nlohmann::json;
/// Throws InvalidPlan. Values stay loosely typed until normalize_plan.
auto plan_from_json(const nlohmann::json& j) -> QueryPlan;

/// Checks every invariant against the schema and returns the plan with values
/// coerced to their field types and `between` bounds in ascending order.
/// Throws InvalidPlan; type errors read like
/// "numeric operator on Text field (first_name greater_than)".
auto normalize_plan(const QueryPlan& plan, const DataSchema& schema,
                    const std::vector<Operator>& operators = catalog().operators) -> QueryPlan;

/// Field-group ids the plan still refers to (they must be resolved to a member
/// before execution).
auto plan_group_refs(const QueryPlan& plan, const DataSchema& schema) -> std::vector<std::string>;
auto resolve_group(const QueryPlan& plan, std::string_view group, std::string_view member) -> QueryPlan;

enum class ResultShape { Scalar, Rows, GroupedPairs };

auto result_shape_name(ResultShape s) -> std::string_view;

struct ResultSet {
    ResultShape shape = ResultShape::Rows;
    std::vector<std::string> columns;
    std::vector<std::vector<Value>> rows;
    /// Rows (or groups) before the limit was applied.
    std::size_t total_row_count = 0;
    /// The limit separated rows whose ordering key was equal.
    bool tie_cut = false;

    [[nodiscard]] auto scalar() const -> const Value&;
    auto operator==(const ResultSet&) const -> bool = default;
};

auto result_to_json(const ResultSet& r) -> nlohmann::json;

}  // namespace tabot
