#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabot/value.hpp"

namespace tabot {

/// Where a table came from. `imported_at` is Unix seconds; absent when unknown.
struct SourceMeta {
    std::string origin;
    std::optional<std::int64_t> imported_at;

    auto operator==(const SourceMeta&) const -> bool = default;
};

/// One column: homogeneous typed cells plus the original text of every cell.
/// Cells that did not parse as the column type are Missing; `raw` keeps what
/// the file actually said.
struct Column {
    std::string name;
    FieldType type = FieldType::Empty;
    std::vector<Value> cells;
    std::vector<std::string> raw;
};

class Table {
public:
    Table() = default;
    Table(std::vector<Column> columns, std::size_t row_count, SourceMeta meta);

    [[nodiscard]] auto columns() const noexcept -> const std::vector<Column>& { return columns_; }
    [[nodiscard]] auto row_count() const noexcept -> std::size_t { return row_count_; }
    [[nodiscard]] auto column_count() const noexcept -> std::size_t { return columns_.size(); }
    [[nodiscard]] auto source_meta() const noexcept -> const SourceMeta& { return meta_; }

    /// Lookup by name, case-folded and trimmed.
    [[nodiscard]] auto find(std::string_view name) const -> const Column*;
    [[nodiscard]] auto index_of(std::string_view name) const -> std::optional<std::size_t>;

private:
    std::vector<Column> columns_;
    std::size_t row_count_ = 0;
    SourceMeta meta_;
};

struct InferenceOptions {
    /// Cells (case-insensitive, trimmed) read as Missing.
    std::vector<std::string> missing_markers{"", "NA", "N/A", "null"};
    /// Share of non-missing cells that must parse for a type to win.
    double type_consensus_ratio = 0.97;
    /// Locale hint: "1.234,5" style numbers.
    bool comma_decimal = false;
};

enum class Encoding { Utf8, Latin1 };

struct CsvOptions {
    char delimiter = ',';
    bool header = true;
    Encoding encoding = Encoding::Utf8;
    InferenceOptions inference;
    SourceMeta source;
};

/// RFC 4180 reader. Throws MalformedCsv (1-based data row; 0 is the header),
/// Error{DuplicateColumnName} or Error{EmptyInput}.
auto load_csv(std::string_view bytes, const CsvOptions& options = {}) -> Table;
auto load_csv_file(const std::filesystem::path& path, CsvOptions options = {}) -> Table;

/// Most specific type on the ladder Boolean → Integer → Float → Date →
/// Datetime → Text that enough non-missing cells parse as.
auto infer_field_type(std::span<const std::string> cells, const InferenceOptions& options = {}) -> FieldType;

struct FieldStats {
    FieldType inferred_type = FieldType::Empty;
    std::size_t diversity = 0;
    std::size_t missing_count = 0;
    bool is_categorical = false;
    /// Distinct values in display form; filled only for categorical fields.
    std::vector<std::string> value_lexicon;

    auto operator==(const FieldStats&) const -> bool = default;
};

constexpr std::size_t kDefaultCategoricalThreshold = 10;

/// Canonical distinctness key of a cell: folded text, or the value's string form.
auto canonical_key(const Value& v) -> std::string;

/// Throws Error{UnknownField}.
auto compute_field_stats(const Table& table, std::string_view field,
                         std::size_t threshold = kDefaultCategoricalThreshold) -> FieldStats;

}  // namespace tabot
