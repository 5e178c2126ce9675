#include <fstream>
#include <set>
#include <sstream>

#include "tabot/error.hpp"
#include "tabot/ingest.hpp"
#include "tabot/text.hpp"

namespace tabot {

namespace detail {
// Defined in infer.cpp.
auto build_column(std::string name, std::vector<std::string> raw, const InferenceOptions& options) -> Column;
}  // namespace detail

namespace {

auto latin1_to_utf8(std::string_view bytes) -> std::string {
    std::string out;
    out.reserve(bytes.size());
    for (unsigned char c : bytes) text::encode_utf8(c, out);
    return out;
}

/// Splits the input into records, numbering non-blank records from
/// `first_index` (0 when a header is present so data rows start at 1).
class RecordReader {
public:
    RecordReader(std::string_view data, char delimiter, std::size_t first_index)
        : data_(data), delimiter_(delimiter), record_(first_index) {}

    auto next(std::vector<std::string>& fields) -> bool {
        fields.clear();
        while (pos_ < data_.size()) {
            // Skip blank lines between records.
            if (data_[pos_] == '\n') {
                ++pos_;
                continue;
            }
            if (data_[pos_] == '\r' && pos_ + 1 < data_.size() && data_[pos_ + 1] == '\n') {
                pos_ += 2;
                continue;
            }
            break;
        }
        if (pos_ >= data_.size()) return false;

        std::string field;
        bool quoted = false;
        bool field_started_quoted = false;
        bool after_closing_quote = false;
        while (pos_ < data_.size()) {
            char c = data_[pos_];
            if (quoted) {
                if (c == '"') {
                    if (pos_ + 1 < data_.size() && data_[pos_ + 1] == '"') {
                        field.push_back('"');
                        pos_ += 2;
                        continue;
                    }
                    quoted = false;
                    after_closing_quote = true;
                    ++pos_;
                    continue;
                }
                field.push_back(c);
                ++pos_;
                continue;
            }
            if (c == delimiter_) {
                fields.push_back(std::move(field));
                field.clear();
                field_started_quoted = false;
                after_closing_quote = false;
                ++pos_;
                continue;
            }
            if (c == '\n' || (c == '\r' && pos_ + 1 < data_.size() && data_[pos_ + 1] == '\n')) {
                pos_ += c == '\r' ? 2 : 1;
                fields.push_back(std::move(field));
                ++record_;
                return true;
            }
            if (after_closing_quote) {
                throw MalformedCsv(record_, "unexpected character after closing quote");
            }
            if (c == '"') {
                if (!field.empty() || field_started_quoted) {
                    throw MalformedCsv(record_, "stray quote in unquoted field");
                }
                quoted = true;
                field_started_quoted = true;
                ++pos_;
                continue;
            }
            field.push_back(c);
            ++pos_;
        }
        if (quoted) throw MalformedCsv(record_, "unterminated quoted field");
        fields.push_back(std::move(field));
        ++record_;
        return true;
    }

private:
    std::string_view data_;
    char delimiter_;
    std::size_t pos_ = 0;
    std::size_t record_;
};

}  // namespace

Table::Table(std::vector<Column> columns, std::size_t row_count, SourceMeta meta)
    : columns_(std::move(columns)), row_count_(row_count), meta_(std::move(meta)) {}

auto Table::index_of(std::string_view name) const -> std::optional<std::size_t> {
    std::string key = text::normalize_name(name);
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (text::normalize_name(columns_[i].name) == key) return i;
    }
    return std::nullopt;
}

auto Table::find(std::string_view name) const -> const Column* {
    auto idx = index_of(name);
    return idx ? &columns_[*idx] : nullptr;
}

auto load_csv(std::string_view bytes, const CsvOptions& options) -> Table {
    std::string converted;
    if (options.encoding == Encoding::Latin1) {
        converted = latin1_to_utf8(bytes);
        bytes = converted;
    }
    if (bytes.starts_with("\xEF\xBB\xBF")) bytes.remove_prefix(3);
    if (text::trim(bytes).empty()) throw Error(ErrorCode::EmptyInput, "empty CSV input");

    RecordReader reader(bytes, options.delimiter, options.header ? 0 : 1);
    std::vector<std::string> record;
    std::vector<std::string> names;
    std::vector<std::vector<std::string>> raw_columns;
    std::size_t rows = 0;

    auto check_utf8 = [&](const std::vector<std::string>& fields, std::size_t row) {
        for (const auto& f : fields) {
            if (!text::is_valid_utf8(f)) throw MalformedCsv(row, "invalid UTF-8");
        }
    };

    if (options.header) {
        if (!reader.next(record)) throw Error(ErrorCode::EmptyInput, "empty CSV input");
        check_utf8(record, 0);
        std::set<std::string> seen;
        for (auto& name : record) {
            std::string trimmed(text::trim(name));
            std::string key = text::normalize_name(trimmed);
            if (key.empty()) throw MalformedCsv(0, "empty column name");
            if (!seen.insert(key).second) {
                throw Error(ErrorCode::DuplicateColumnName, "duplicate column name '" + trimmed + "'", trimmed);
            }
            names.push_back(std::move(trimmed));
        }
        raw_columns.resize(names.size());
    }

    while (reader.next(record)) {
        std::size_t row = rows + 1;
        if (names.empty()) {
            for (std::size_t i = 0; i < record.size(); ++i) names.push_back("column_" + std::to_string(i + 1));
            raw_columns.resize(names.size());
        }
        if (record.size() != names.size()) {
            throw MalformedCsv(row, "arity mismatch");
        }
        check_utf8(record, row);
        for (std::size_t i = 0; i < record.size(); ++i) raw_columns[i].push_back(std::move(record[i]));
        ++rows;
    }

    std::vector<Column> columns;
    columns.reserve(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        columns.push_back(detail::build_column(names[i], std::move(raw_columns[i]), options.inference));
    }
    return Table(std::move(columns), rows, options.source);
}

auto load_csv_file(const std::filesystem::path& path, CsvOptions options) -> Table {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string(), path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (options.source.origin.empty()) options.source.origin = path.string();
    return load_csv(buf.str(), options);
}

}  // namespace tabot
