#include <algorithm>

#include "tabot/engine.hpp"
#include "tabot/error.hpp"
#include "tabot/parse.hpp"

namespace tabot {

using nlohmann::json;

namespace {

auto priority(MentionKind k) -> int {
    switch (k) {
        case MentionKind::Field: return 0;
        case MentionKind::CategoricalValue: return 1;
        case MentionKind::Operator: return 2;
        case MentionKind::RowAlias: return 3;
        default: return 4;
    }
}

auto closed_kind(EntityKind k) -> std::optional<MentionKind> {
    switch (k) {
        case EntityKind::FieldEntity: return MentionKind::Field;
        case EntityKind::OperatorEntity: return MentionKind::Operator;
        case EntityKind::CategoricalValueEntity: return MentionKind::CategoricalValue;
        case EntityKind::RowAliasEntity: return MentionKind::RowAlias;
        default: return std::nullopt;
    }
}

auto make_closed(const Lexicon::Entry& e, const Utterance& u, std::size_t first, std::size_t last) -> EntityMention {
    EntityMention m;
    m.kind = e.kind;
    m.entity = e.entity;
    m.value = e.value;
    m.typed = e.value;
    m.field = e.field;
    m.first_token = first;
    m.last_token = last;
    m.begin = u.tokens[first].begin;
    m.end = u.tokens[last - 1].end;
    return m;
}

auto make_literal(MentionKind kind, std::string entity, std::string value, Value typed, const Utterance& u,
                  std::size_t first, std::size_t last) -> EntityMention {
    EntityMention m;
    m.kind = kind;
    m.entity = std::move(entity);
    m.value = std::move(value);
    m.typed = std::move(typed);
    m.first_token = first;
    m.last_token = last;
    m.begin = u.tokens[first].begin;
    m.end = u.tokens[last - 1].end;
    return m;
}

auto number_or_date(const text::Token& t, const Utterance& u, std::size_t i) -> std::optional<EntityMention> {
    const std::string& s = t.surface;
    bool date_like = s.find('-', 1) != std::string::npos || s.find('/') != std::string::npos;
    if (date_like) {
        if (auto dt = parse::iso_datetime(s)) {
            return make_literal(MentionKind::Date, std::string(kDateEntity), s, *dt, u, i, i + 1);
        }
        if (auto d = parse::date_literal(s)) {
            return make_literal(MentionKind::Date, std::string(kDateEntity), format_date(*d), *d, u, i, i + 1);
        }
    }
    if (auto n = parse::number_literal(s)) {
        return make_literal(MentionKind::Number, std::string(kNumberEntity), to_string(*n), *n, u, i, i + 1);
    }
    return std::nullopt;
}

auto overlaps(const EntityMention& a, const EntityMention& b) -> bool {
    return a.first_token < b.last_token && b.first_token < a.last_token;
}

}  // namespace

auto mention_kind_name(MentionKind k) -> std::string_view {
    switch (k) {
        case MentionKind::Field: return "field";
        case MentionKind::Operator: return "operator";
        case MentionKind::CategoricalValue: return "categoricalValue";
        case MentionKind::RowAlias: return "rowAlias";
        case MentionKind::Number: return "number";
        case MentionKind::Date: return "date";
        case MentionKind::Text: return "text";
    }
    return "text";
}

auto mention_to_json(const EntityMention& m) -> json {
    json j{{"kind", mention_kind_name(m.kind)},
           {"entity", m.entity},
           {"value", m.value},
           {"typed", to_json(m.typed)},
           {"span", {m.begin, m.end}}};
    if (!m.field.empty()) j["field"] = m.field;
    if (m.synthetic) j["synthetic"] = true;
    return j;
}

auto tokenize_utterance(std::string_view raw, std::string_view locale) -> Utterance {
    Utterance u;
    u.raw = std::string(raw);
    u.locale = locale.empty() ? "en" : std::string(locale);
    u.tokens = text::tokenize(raw);
    if (u.tokens.empty()) throw Error(ErrorCode::EmptyUtterance, "empty utterance");
    return u;
}

Lexicon::Lexicon(const BotBundle& bundle) {
    for (const auto& e : bundle.entities) {
        auto kind = closed_kind(e.kind);
        if (!kind) continue;
        bool integer_values = false;
        if (*kind == MentionKind::CategoricalValue) {
            const auto* f = bundle.schema.field(e.field);
            integer_values = f != nullptr && f->type == FieldType::Integer;
        }
        for (const auto& [value, phrases] : e.lexicon) {
            for (const auto& phrase : phrases) {
                auto keys = text::phrase_keys(phrase);
                if (keys.empty()) continue;
                // Bare numbers are literals, never values of an Integer lexicon.
                if (integer_values && keys.size() == 1 && parse::number_literal(phrase)) continue;
                auto& bucket = by_first_[keys.front()];
                bool dup = std::any_of(bucket.begin(), bucket.end(), [&](const Entry& x) {
                    return x.keys == keys && x.kind == *kind && x.value == value && x.entity == e.name;
                });
                if (!dup) bucket.push_back({keys, *kind, e.name, value, e.field});
            }
        }
    }
    for (auto& [key, bucket] : by_first_) {
        std::stable_sort(bucket.begin(), bucket.end(), [](const Entry& a, const Entry& b) {
            if (a.keys.size() != b.keys.size()) return a.keys.size() > b.keys.size();
            return priority(a.kind) < priority(b.kind);
        });
    }
}

auto Lexicon::starting_with(const std::string& key) const -> const std::vector<Entry>* {
    auto it = by_first_.find(key);
    return it == by_first_.end() ? nullptr : &it->second;
}

auto Lexicon::exact(const std::vector<std::string>& keys) const -> const Entry* {
    if (keys.empty()) return nullptr;
    const auto* bucket = starting_with(keys.front());
    if (bucket == nullptr) return nullptr;
    for (const auto& e : *bucket) {
        if (e.keys == keys) return &e;  // buckets are ordered by priority within a length
    }
    return nullptr;
}

auto Lexicon::known_key(const std::string& key) const -> bool {
    for (const auto& [first, bucket] : by_first_) {
        for (const auto& e : bucket) {
            if (std::find(e.keys.begin(), e.keys.end(), key) != e.keys.end()) return true;
        }
    }
    return false;
}

auto recognize_entities(const Utterance& u, const BotBundle& bundle) -> std::vector<EntityMention> {
    return recognize_entities(u, bundle, Lexicon(bundle));
}

auto recognize_entities(const Utterance& u, const BotBundle& /*bundle*/, const Lexicon& lexicon)
    -> std::vector<EntityMention> {
    std::vector<EntityMention> candidates;
    const auto& tokens = u.tokens;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        if (t.kind == text::TokenKind::Quoted) {
            if (const auto* e = lexicon.exact(text::phrase_keys(t.surface))) {
                candidates.push_back(make_closed(*e, u, i, i + 1));
            } else {
                candidates.push_back(
                    make_literal(MentionKind::Text, std::string(kTextEntity), t.surface, t.surface, u, i, i + 1));
            }
            continue;
        }
        if (t.kind == text::TokenKind::Number) {
            if (auto m = number_or_date(t, u, i)) candidates.push_back(std::move(*m));
            continue;
        }
        const auto* bucket = lexicon.starting_with(t.key);
        if (bucket == nullptr) continue;
        for (const auto& e : *bucket) {
            if (i + e.keys.size() > tokens.size()) continue;
            bool ok = true;
            for (std::size_t k = 0; k < e.keys.size() && ok; ++k) {
                const auto& tk = tokens[i + k];
                ok = tk.kind != text::TokenKind::Quoted && tk.key == e.keys[k];
            }
            if (ok) candidates.push_back(make_closed(e, u, i, i + e.keys.size()));
        }
    }

    std::stable_sort(candidates.begin(), candidates.end(), [](const EntityMention& a, const EntityMention& b) {
        auto la = a.last_token - a.first_token;
        auto lb = b.last_token - b.first_token;
        if (la != lb) return la > lb;
        if (a.closed() != b.closed()) return a.closed();
        if (priority(a.kind) != priority(b.kind)) return priority(a.kind) < priority(b.kind);
        return a.first_token < b.first_token;
    });
    std::vector<EntityMention> accepted;
    for (auto& c : candidates) {
        bool clash = std::any_of(accepted.begin(), accepted.end(), [&](const EntityMention& a) { return overlaps(a, c); });
        if (!clash) accepted.push_back(std::move(c));
    }

    // Capitalized runs outside every other mention are free literals ("Ada Colau").
    std::vector<bool> covered(tokens.size(), false);
    for (const auto& m : accepted) {
        for (auto k = m.first_token; k < m.last_token; ++k) covered[k] = true;
    }
    std::size_t i = 0;
    while (i < tokens.size()) {
        if (covered[i] || tokens[i].kind != text::TokenKind::Word || !tokens[i].capitalized) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < tokens.size() && !covered[j] && tokens[j].kind == text::TokenKind::Word && tokens[j].capitalized) ++j;
        bool lone_opening = i == 0 && j == 1;
        bool single_letter = j == i + 1 && tokens[i].surface.size() == 1;
        if (!lone_opening && !single_letter) {
            std::string value = u.raw.substr(tokens[i].begin, tokens[j - 1].end - tokens[i].begin);
            accepted.push_back(make_literal(MentionKind::Text, std::string(kTextEntity), value, value, u, i, j));
        }
        i = j;
    }

    std::sort(accepted.begin(), accepted.end(),
              [](const EntityMention& a, const EntityMention& b) { return a.first_token < b.first_token; });
    return accepted;
}

}  // namespace tabot
