#pragma once

#include "tabot/ingest.hpp"
#include "tabot/plan.hpp"

namespace tabot::reference {

/// Brute-force evaluator used as a test oracle. It shares no evaluation code
/// with the engine: every predicate is re-read per row, groups are found by
/// linear scan and sums accumulate in long double. Slow on purpose.
auto execute(const QueryPlan& plan, const Table& table, const DataSchema& schema) -> ResultSet;

/// Three-way comparison used by the oracle.
auto compare(const Value& a, const Value& b) -> int;

/// True when two results agree: identical shape, columns, counts and cells,
/// with Float cells equal within `rel_tol` relative error.
auto equivalent(const ResultSet& a, const ResultSet& b, double rel_tol = 1e-9) -> bool;

}  // namespace tabot::reference
