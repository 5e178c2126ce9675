#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "tabot/value.hpp"

namespace tabot::parse {

/// true/false, yes/no, si/no (accents folded). "1"/"0" are handled at column
/// level because they are only boolean when a column holds nothing else.
auto boolean(std::string_view s) -> std::optional<bool>;

/// Optional sign, digits, optional thousands grouping ("130,000"; "130.000"
/// when `comma_decimal`).
auto integer(std::string_view s, bool comma_decimal = false) -> std::optional<std::int64_t>;

/// Decimal or scientific notation, thousands grouping allowed.
auto floating(std::string_view s, bool comma_decimal = false) -> std::optional<double>;

enum class SlashOrder { DayFirst, MonthFirst };
enum class SlashVote { Invalid, DayFirstOnly, MonthFirstOnly, Either };

/// yyyy-mm-dd.
auto iso_date(std::string_view s) -> std::optional<Date>;
/// Which interpretations of a dd/mm/yyyy-or-mm/dd/yyyy cell are valid.
auto slash_vote(std::string_view s) -> SlashVote;
auto slash_date(std::string_view s, SlashOrder order) -> std::optional<Date>;
/// yyyy-mm-ddTHH:MM[:SS] or with a space separator.
auto iso_datetime(std::string_view s) -> std::optional<Datetime>;

/// Numeric literal typed by a user: "120000", "120,000", "1.5", "120k".
/// Integral results are Integer, everything else Float.
auto number_literal(std::string_view s) -> std::optional<Value>;

/// ISO or slash date typed by a user (day-first when ambiguous).
auto date_literal(std::string_view s) -> std::optional<Date>;

}  // namespace tabot::parse
