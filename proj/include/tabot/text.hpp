#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tabot::text {

/// Lower-case and strip diacritics from Latin-script UTF-8 text. Code points
/// outside the folding table pass through unchanged.
auto fold(std::string_view utf8) -> std::string;

auto trim(std::string_view s) -> std::string_view;

/// Folded, trimmed, inner whitespace collapsed, underscores read as spaces.
/// Used for column-name uniqueness and lexicon keys.
auto normalize_name(std::string_view s) -> std::string;

/// Matching key for a single folded word: drops a possessive "'s" and folds
/// regular English plurals ("salaries" → "salary", "rows" → "row").
auto stem(std::string_view folded_word) -> std::string;

enum class TokenKind { Word, Number, Quoted, Symbol };

struct Token {
    TokenKind kind = TokenKind::Word;
    std::string surface;  ///< raw text (inner text, unescaped, for quoted tokens)
    std::string norm;     ///< folded surface
    std::string key;      ///< matching key: stemmed for words, canonical for symbols
    std::size_t begin = 0;  ///< byte offsets into the source text
    std::size_t end = 0;
    bool capitalized = false;
};

/// Segment text into words, numbers (including dates and "120k"), quoted
/// phrases and comparison symbols. Other punctuation is dropped. Spans are
/// ordered and non-overlapping.
auto tokenize(std::string_view utf8) -> std::vector<Token>;

/// Matching keys of a phrase, as `tokenize` would produce them.
auto phrase_keys(std::string_view phrase) -> std::vector<std::string>;

auto join(const std::vector<std::string>& parts, std::string_view sep) -> std::string;

/// Decode one UTF-8 code point starting at `pos`; advances `pos`. Invalid
/// bytes decode as U+FFFD and consume one byte.
auto decode_utf8(std::string_view s, std::size_t& pos) -> char32_t;
auto encode_utf8(char32_t cp, std::string& out) -> void;
auto is_valid_utf8(std::string_view s) -> bool;

}  // namespace tabot::text
