#include "tabot/text.hpp"

#include <array>
#include <cctype>

namespace tabot::text {

namespace {

using namespace std::string_view_literals;

// Folding for U+00C0..U+017F. Each entry is the ASCII lower-case base letter,
// or 0 when the code point has no single-letter base (e.g. multiplication sign).
constexpr std::string_view kLatin1Fold =
    // C0-CF
    "aaaaaaaceeeeiiii"
    // D0-DF
    "dnooooo\0ouuuuyts"
    // E0-EF
    "aaaaaaaceeeeiiii"
    // F0-FF
    "dnooooo\0ouuuuyty"sv;

constexpr std::string_view kLatinExtAFold =
    // 0100-010F
    "aaaaaaccccccccdd"
    // 0110-011F
    "ddeeeeeeeeeegggg"
    // 0120-012F
    "gggghhhhiiiiiiii"
    // 0130-013F
    "iiiijjjjkkklllll"
    // 0140-014F
    "lllnnnnnnnnnoooo"
    // 0150-015F
    "oooorrrrrrssssss"
    // 0160-016F
    "sssstttttuuuuuuu"
    // 0170-017F
    "uuuuwwyyyzzzzzzs"sv;

auto fold_code_point(char32_t cp, std::string& out) -> void {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(cp))));
        return;
    }
    if (cp >= 0xC0 && cp <= 0xFF) {
        char base = kLatin1Fold[cp - 0xC0];
        if (base != '\0') {
            out.push_back(base);
            if (cp == 0xC6 || cp == 0xE6) out.push_back('e');  // æ
            return;
        }
    } else if (cp >= 0x100 && cp <= 0x17F) {
        out.push_back(kLatinExtAFold[cp - 0x100]);
        return;
    } else if (cp == 0x2019 || cp == 0x2018) {
        out.push_back('\'');
        return;
    }
    encode_utf8(cp, out);
}

}  // namespace

auto decode_utf8(std::string_view s, std::size_t& pos) -> char32_t {
    auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    unsigned char lead = byte(pos);
    if (lead < 0x80) {
        ++pos;
        return lead;
    }
    int extra = 0;
    char32_t cp = 0;
    if ((lead & 0xE0) == 0xC0) {
        extra = 1;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        extra = 2;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        extra = 3;
        cp = lead & 0x07;
    } else {
        ++pos;
        return 0xFFFD;
    }
    for (int i = 1; i <= extra; ++i) {
        if (pos + i >= s.size() || (byte(pos + i) & 0xC0) != 0x80) {
            ++pos;
            return 0xFFFD;
        }
        cp = (cp << 6) | (byte(pos + i) & 0x3F);
    }
    pos += extra + 1;
    return cp;
}

auto encode_utf8(char32_t cp, std::string& out) -> void {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

auto is_valid_utf8(std::string_view s) -> bool {
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t before = pos;
        char32_t cp = decode_utf8(s, pos);
        if (cp == 0xFFFD && pos == before + 1 && static_cast<unsigned char>(s[before]) >= 0x80) {
            return false;
        }
    }
    return true;
}

auto fold(std::string_view utf8) -> std::string {
    std::string out;
    out.reserve(utf8.size());
    std::size_t pos = 0;
    while (pos < utf8.size()) {
        fold_code_point(decode_utf8(utf8, pos), out);
    }
    return out;
}

auto trim(std::string_view s) -> std::string_view {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

auto normalize_name(std::string_view s) -> std::string {
    std::string folded = fold(trim(s));
    std::string out;
    out.reserve(folded.size());
    bool pending_space = false;
    for (char c : folded) {
        if (c == '_' || c == ' ' || c == '\t') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

auto stem(std::string_view token) -> std::string {
    std::string s(token);
    if (s.size() > 2 && (s.ends_with("'s") || s.ends_with("s'"))) {
        s.resize(s.size() - (s.ends_with("'s") ? 2 : 1));
    }
    bool alpha = !s.empty();
    for (char c : s) {
        if (!std::isalpha(static_cast<unsigned char>(c))) {
            alpha = false;
            break;
        }
    }
    if (!alpha || s.size() < 4) return s;
    if (s.ends_with("ies") && s.size() > 4) {
        s.resize(s.size() - 3);
        s.push_back('y');
    } else if (s.ends_with("s") && !s.ends_with("ss") && !s.ends_with("us") && !s.ends_with("is")) {
        s.pop_back();
    }
    return s;
}

namespace {

auto is_word_cp(char32_t cp) -> bool {
    if (cp < 0x80) return std::isalnum(static_cast<int>(cp)) != 0;
    // Letters from the Latin supplements and beyond; punctuation blocks excluded.
    return cp >= 0xC0 && cp != 0xD7 && cp != 0xF7 && !(cp >= 0x2000 && cp <= 0x206F);
}

auto is_digit_at(std::string_view s, std::size_t i) -> bool {
    return i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])) != 0;
}

auto is_upper_start(std::string_view surface) -> bool {
    if (surface.empty()) return false;
    std::size_t pos = 0;
    char32_t cp = decode_utf8(surface, pos);
    if (cp < 0x80) return std::isupper(static_cast<int>(cp)) != 0;
    return (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) || (cp >= 0x100 && cp <= 0x17F && cp % 2 == 0);
}

auto is_quote(char32_t cp) -> bool {
    return cp == '\'' || cp == '"' || cp == 0x2018 || cp == 0x2019 || cp == 0x201C || cp == 0x201D;
}

auto closing_quote_for(char32_t open) -> char32_t {
    switch (open) {
        case 0x2018: return 0x2019;
        case 0x201C: return 0x201D;
        default: return open;
    }
}

// Symbols the tokenizer keeps; keys are their ASCII canonical spellings.
auto symbol_key(char32_t cp) -> std::string_view {
    switch (cp) {
        case '<': return "<";
        case '>': return ">";
        case '=': return "=";
        case '!': return "!";
        case 0x2260: return "!=";
        case 0x2264: return "<=";
        case 0x2265: return ">=";
        default: return {};
    }
}

}  // namespace

auto tokenize(std::string_view s) -> std::vector<Token> {
    std::vector<Token> tokens;
    std::size_t pos = 0;
    auto at_boundary = [&](std::size_t p) {
        if (p == 0) return true;
        unsigned char prev = static_cast<unsigned char>(s[p - 1]);
        return std::isspace(prev) != 0 || prev == '(' || prev == '[' || prev == ',' || prev == ':';
    };
    while (pos < s.size()) {
        std::size_t start = pos;
        std::size_t next = pos;
        char32_t cp = decode_utf8(s, next);

        if (cp < 0x80 && std::isspace(static_cast<int>(cp))) {
            pos = next;
            continue;
        }

        if (is_quote(cp) && at_boundary(start)) {
            // Quoted phrase; a doubled closing quote inside is an escaped quote.
            char32_t close = closing_quote_for(cp);
            std::string inner;
            std::size_t p = next;
            bool closed = false;
            while (p < s.size()) {
                std::size_t q = p;
                char32_t c = decode_utf8(s, q);
                if (c == close || (close == '\'' && c == 0x2019)) {
                    std::size_t r = q;
                    if (r < s.size()) {
                        std::size_t r2 = r;
                        char32_t after = decode_utf8(s, r2);
                        if (after == c) {
                            encode_utf8(c == 0x2019 ? U'\'' : c, inner);
                            p = r2;
                            continue;
                        }
                        if (is_word_cp(after)) {
                            // Apostrophe inside a word ("People's").
                            encode_utf8(c == 0x2019 ? U'\'' : c, inner);
                            p = q;
                            continue;
                        }
                    }
                    p = q;
                    closed = true;
                    break;
                }
                encode_utf8(c, inner);
                p = q;
            }
            std::string_view trimmed = trim(inner);
            if (closed && !trimmed.empty()) {
                Token t;
                t.kind = TokenKind::Quoted;
                t.surface = std::string(trimmed);
                t.norm = fold(trimmed);
                t.key = normalize_name(trimmed);
                t.begin = start;
                t.end = p;
                t.capitalized = is_upper_start(t.surface);
                tokens.push_back(std::move(t));
                pos = p;
                continue;
            }
            pos = next;
            continue;
        }

        bool negative = cp == '-' && is_digit_at(s, next) && at_boundary(start);
        if ((cp < 0x80 && std::isdigit(static_cast<int>(cp))) || negative) {
            std::size_t p = negative ? next : start;
            while (p < s.size()) {
                char c = s[p];
                if (std::isdigit(static_cast<unsigned char>(c))) {
                    ++p;
                } else if ((c == ',' || c == '.' || c == '/' || c == '-' || c == ':' || c == 'T') &&
                           is_digit_at(s, p + 1)) {
                    ++p;
                } else {
                    break;
                }
            }
            if (p < s.size() && (s[p] == 'k' || s[p] == 'K') &&
                (p + 1 >= s.size() || !is_word_cp(static_cast<unsigned char>(s[p + 1])))) {
                ++p;
            }
            bool glued_to_word = false;
            if (p < s.size()) {
                std::size_t q = p;
                char32_t after = decode_utf8(s, q);
                glued_to_word = is_word_cp(after);
            }
            if (!glued_to_word) {
                Token t;
                t.kind = TokenKind::Number;
                t.surface = std::string(s.substr(start, p - start));
                t.norm = fold(t.surface);
                t.key = t.norm;
                t.begin = start;
                t.end = p;
                tokens.push_back(std::move(t));
                pos = p;
                continue;
            }
            // Fall through: something like "x14" or "3rd" is a word.
        }

        if (is_word_cp(cp)) {
            std::size_t p = start;
            while (p < s.size()) {
                std::size_t q = p;
                char32_t c = decode_utf8(s, q);
                if (is_word_cp(c)) {
                    p = q;
                    continue;
                }
                if ((c == '\'' || c == 0x2019 || c == '-') && q < s.size()) {
                    std::size_t r = q;
                    char32_t after = decode_utf8(s, r);
                    if (is_word_cp(after)) {
                        p = q;
                        continue;
                    }
                    if ((c == '\'' || c == 0x2019) && p > start && (s[p - 1] == 's' || s[p - 1] == 'S')) {
                        p = q;  // plural possessive "officials'"
                    }
                } else if ((c == '\'' || c == 0x2019) && q >= s.size() && p > start &&
                           (s[p - 1] == 's' || s[p - 1] == 'S')) {
                    p = q;
                }
                break;
            }
            Token t;
            t.kind = TokenKind::Word;
            t.surface = std::string(s.substr(start, p - start));
            t.norm = fold(t.surface);
            t.key = stem(t.norm);
            t.begin = start;
            t.end = p;
            t.capitalized = is_upper_start(t.surface);
            tokens.push_back(std::move(t));
            pos = p;
            continue;
        }

        std::string_view sym = symbol_key(cp);
        if (!sym.empty()) {
            std::string key(sym);
            std::size_t p = next;
            if (p < s.size() && key.size() == 1) {
                char c2 = s[p];
                if ((key == "<" && (c2 == '=' || c2 == '>')) || (key == ">" && c2 == '=') ||
                    (key == "!" && c2 == '=') || (key == "=" && c2 == '=')) {
                    key.push_back(c2);
                    ++p;
                }
            }
            if (key == "<>") key = "!=";
            if (key == "==") key = "=";
            if (key != "!") {
                Token t;
                t.kind = TokenKind::Symbol;
                t.surface = std::string(s.substr(start, p - start));
                t.norm = key;
                t.key = key;
                t.begin = start;
                t.end = p;
                tokens.push_back(std::move(t));
            }
            pos = p;
            continue;
        }

        pos = next;  // other punctuation
    }
    return tokens;
}

auto phrase_keys(std::string_view phrase) -> std::vector<std::string> {
    std::vector<std::string> keys;
    for (auto& t : tokenize(phrase)) {
        if (t.kind == TokenKind::Quoted) {
            for (auto& inner : phrase_keys(t.surface)) keys.push_back(std::move(inner));
        } else {
            keys.push_back(std::move(t.key));
        }
    }
    return keys;
}

auto join(const std::vector<std::string>& parts, std::string_view sep) -> std::string {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

}  // namespace tabot::text
