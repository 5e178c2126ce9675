#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tabot {

enum class ErrorCode {
    MalformedCsv,
    DuplicateColumnName,
    EmptyInput,
    UnknownField,
    SynonymCollision,
    GroupMembershipConflict,
    CompositeShadowsField,
    SchemaVersionMismatch,
    IntegrityViolation,
    InvalidCommand,
    InvalidCatalog,
    InvalidBundle,
    EmptyUtterance,
    UnboundSlot,
    InvalidPlan,
    InvalidChoice,
    UnknownTurn,
    FallbackUnavailable,
    InvalidSql,
    UnknownDataset,
    NoActiveBundle,
    GenerationInProgress,
    Io,
};

auto error_code_name(ErrorCode code) -> std::string_view;

/// Every failure raised by the library carries a machine-readable code; the
/// HTTP layer maps codes to status codes and never leaks anything else.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string detail = {})
        : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

    [[nodiscard]] auto code() const noexcept -> ErrorCode { return code_; }
    /// Offending element: a row index, a field name, a document path.
    [[nodiscard]] auto detail() const noexcept -> const std::string& { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

class MalformedCsv : public Error {
public:
    MalformedCsv(std::size_t row, const std::string& reason)
        : Error(ErrorCode::MalformedCsv, "row " + std::to_string(row) + ": " + reason,
                std::to_string(row)),
          row_(row), reason_(reason) {}

    [[nodiscard]] auto row() const noexcept -> std::size_t { return row_; }
    [[nodiscard]] auto reason() const noexcept -> const std::string& { return reason_; }

private:
    std::size_t row_;
    std::string reason_;
};

}  // namespace tabot
