#include <algorithm>
#include <cmath>
#include <set>

#include "tabot/engine.hpp"
#include "tabot/error.hpp"
#include "tabot/query.hpp"

namespace tabot {

using nlohmann::json;

namespace {

constexpr std::string_view kRowsMarker = "\xE2\x9F\xA8rows\xE2\x9F\xA9";  // ⟨rows⟩

struct Key {
    std::string key;
    bool replaceable = true;  ///< may be read as part of a row alias
};

/// Articles, copulas and pronouns carry no intent; left in, they let any
/// "what is the ..." question score against every "what is the ..." sentence.
/// Question words, "many", "and" and "with" stay: they separate intents.
auto function_word(const std::string& key) -> bool {
    static const std::set<std::string> words = {"a",  "an", "the", "is", "are", "be", "of", "to",  "in", "on",
                                                "at", "me", "my",  "i",  "it", "please"};
    return words.contains(key);
}

auto sorted_unique(std::vector<std::string> keys) -> std::vector<std::string> {
    keys.erase(std::remove_if(keys.begin(), keys.end(), function_word), keys.end());
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

/// Collapses row-alias phrases (longest first) into one marker.
auto collapse_rows(const std::vector<Key>& seq, const std::vector<std::vector<std::string>>& phrases)
    -> std::vector<std::string> {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < seq.size()) {
        std::size_t matched = 0;
        if (seq[i].replaceable) {
            for (const auto& p : phrases) {
                if (i + p.size() > seq.size()) continue;
                bool ok = true;
                for (std::size_t k = 0; k < p.size() && ok; ++k) {
                    ok = seq[i + k].replaceable && seq[i + k].key == p[k];
                }
                if (ok) {
                    matched = p.size();
                    break;
                }
            }
        }
        if (matched > 0) {
            out.emplace_back(kRowsMarker);
            i += matched;
        } else {
            out.push_back(seq[i].key);
            ++i;
        }
    }
    return out;
}

auto cosine(const std::vector<std::string>& a, const std::vector<std::string>& b) -> double {
    if (a.empty() && b.empty()) return 1.0;
    if (a.empty() || b.empty()) return 0.0;
    std::size_t common = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(common) / std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

auto synthetic(MentionKind kind, std::string entity, const std::string& value) -> EntityMention {
    EntityMention m;
    m.kind = kind;
    m.entity = std::move(entity);
    m.value = value;
    m.typed = value;
    m.synthetic = true;
    return m;
}

auto fixed_mention(const std::string& slot, const std::string& value) -> EntityMention {
    if (slot == "FIELD") return synthetic(MentionKind::Field, std::string(kFieldEntity), value);
    if (slot == "OPERATOR") return synthetic(MentionKind::Operator, std::string(kOperatorEntity), value);
    return synthetic(MentionKind::Text, "variant", value);
}

auto field_type_of(const BotBundle& bundle, const std::string& name) -> std::optional<FieldType> {
    if (auto view = field_view(bundle.schema, name)) return view->type;
    return std::nullopt;
}

auto categorical_fits(const IntentSlot& slot, const EntityMention& m, const std::map<std::string, EntityMention>& bound,
                      const BotBundle& bundle) -> bool {
    if (m.kind != MentionKind::CategoricalValue) return false;
    const auto& c = slot.constraints;
    if (c.max_diversity) {
        const auto* f = bundle.schema.field(m.field);
        if (f == nullptr || f->stats.diversity > *c.max_diversity) return false;
    }
    if (c.same_field_as) {
        auto it = bound.find(*c.same_field_as);
        if (it != bound.end() && it->second.field != m.field) return false;
    }
    if (c.distinct_from) {
        auto it = bound.find(*c.distinct_from);
        if (it != bound.end() && it->second.field == m.field && it->second.value == m.value) return false;
    }
    return true;
}

/// A literal typed by a bound field must be readable as that field's type.
auto typed_literal_fits(const IntentSlot& slot, const EntityMention& m, const std::map<std::string, EntityMention>& bound,
                        const BotBundle& bundle) -> bool {
    if (!slot.constraints.typed_by) return true;
    auto it = bound.find(*slot.constraints.typed_by);
    if (it == bound.end()) return true;
    auto type = field_type_of(bundle, it->second.value);
    if (!type) return true;
    if (is_numeric(*type)) {
        return m.kind == MentionKind::Number || (m.kind == MentionKind::CategoricalValue && m.field == it->second.value);
    }
    if (is_temporal(*type)) return m.kind == MentionKind::Date;
    return true;
}

struct SlotBinding {
    std::map<std::string, EntityMention> slots;
    std::vector<bool> used;
};

auto bind(const Intent& intent, const std::vector<EntityMention>& mentions, const BotBundle& bundle) -> SlotBinding {
    SlotBinding b;
    b.used.assign(mentions.size(), false);
    for (const auto& [slot, value] : intent.fixed) b.slots[slot] = fixed_mention(slot, value);
    for (const auto& slot : intent.slots) {
        if (b.slots.count(slot.name) != 0) continue;
        for (std::size_t i = 0; i < mentions.size(); ++i) {
            if (b.used[i] || !mention_fits(intent, slot, mentions[i], b.slots, bundle)) continue;
            b.used[i] = true;
            b.slots[slot.name] = mentions[i];
            break;
        }
        if (intent.field_from && *intent.field_from == slot.name && b.slots.count("FIELD") == 0) {
            auto it = b.slots.find(slot.name);
            if (it != b.slots.end()) b.slots["FIELD"] = synthetic(MentionKind::Field, std::string(kFieldEntity), it->second.field);
        }
    }
    return b;
}

auto bound_value(const std::map<std::string, EntityMention>& slots, const std::string& name) -> const std::string* {
    auto it = slots.find(name);
    return it == slots.end() ? nullptr : &it->second.value;
}

auto demoted(MatchResult r, const std::string& why, double threshold) -> MatchResult {
    r.violation = why;
    r.confidence = std::min(r.confidence * 0.5, threshold - 0.01);
    return r;
}

auto partial_check(const MatchResult& r, const BotBundle& bundle) -> std::optional<std::string> {
    const auto* field = bound_value(r.slots, "FIELD");
    const auto* op_id = bound_value(r.slots, "OPERATOR");
    std::optional<FieldType> type;
    if (field != nullptr) type = field_type_of(bundle, *field);
    if (type && op_id != nullptr) {
        const auto* op = bundle.op(*op_id);
        if (op != nullptr && !op->applies_to(*type)) {
            return "operator " + *op_id + " does not apply to " + std::string(field_type_name(*type)) + " field " + *field;
        }
    }
    if (type) {
        for (const char* slot : {"VALUE", "VALUE2"}) {
            auto it = r.slots.find(slot);
            if (it == r.slots.end() || it->second.kind == MentionKind::CategoricalValue) continue;
            if (!coerce(it->second.typed, *type)) {
                return "'" + it->second.value + "' is not a " + std::string(field_type_name(*type)) + " value for " + *field;
            }
        }
    }
    return std::nullopt;
}

}  // namespace

auto mention_fits(const Intent& intent, const IntentSlot& slot, const EntityMention& m,
                  const std::map<std::string, EntityMention>& bound, const BotBundle& bundle) -> bool {
    const std::string& e = slot.entity;
    if (e == kNumberEntity) {
        if (m.kind != MentionKind::Number) return false;
        if (slot.constraints.positive_integer) {
            const auto* n = std::get_if<std::int64_t>(&m.typed);
            return n != nullptr && *n >= 1 && *n <= 1000;
        }
        return typed_literal_fits(slot, m, bound, bundle);
    }
    if (e == kDateEntity) return m.kind == MentionKind::Date;
    if (e == kTextEntity) return m.kind == MentionKind::Text;
    if (e == kLiteralEntity) {
        bool literal = m.kind == MentionKind::Number || m.kind == MentionKind::Date || m.kind == MentionKind::Text ||
                       m.kind == MentionKind::CategoricalValue;
        return literal && typed_literal_fits(slot, m, bound, bundle);
    }
    if (e == kFieldEntity) {
        if (m.kind != MentionKind::Field) return false;
        if (!slot.constraints.field) return true;
        auto view = field_view(bundle.schema, m.value);
        return view && satisfies(*slot.constraints.field, *view, bundle.schema);
    }
    if (e == kOperatorEntity) {
        if (m.kind != MentionKind::Operator) return false;
        // Arity must match the slots the intent offers for values.
        const auto* op = bundle.op(m.value);
        if (op == nullptr) return false;
        bool two_values = intent.slot("VALUE2") != nullptr && intent.slot("FIELD2") == nullptr;
        return two_values ? op->arity == 2 : op->arity == 1;
    }
    if (e == kRowAliasEntity) return m.kind == MentionKind::RowAlias;
    if (e == kCategoricalValueRef) return categorical_fits(slot, m, bound, bundle);
    return m.kind == MentionKind::CategoricalValue && m.entity == e && categorical_fits(slot, m, bound, bundle);
}

LexicalMatcher::LexicalMatcher(const BotBundle& bundle) : bundle_(bundle) {
    std::set<std::vector<std::string>> phrases{{"row"}, {"record"}};
    if (const auto* rows = bundle.entity(kRowAliasEntity)) {
        for (const auto& [value, list] : rows->lexicon) {
            for (const auto& phrase : list) {
                auto keys = text::phrase_keys(phrase);
                if (!keys.empty()) phrases.insert(std::move(keys));
            }
        }
    }
    row_alias_phrases_.assign(phrases.begin(), phrases.end());
    std::stable_sort(row_alias_phrases_.begin(), row_alias_phrases_.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });

    index_.resize(bundle.intents.size());
    for (std::size_t i = 0; i < bundle.intents.size(); ++i) {
        const auto& intent = bundle.intents[i];
        std::set<std::string> fragments{"FIELD", "OPERATOR"};
        for (const auto& s : intent.slots) fragments.insert(s.fragment);
        for (const auto& [locale, sentences] : intent.training_sentences) {
            auto& set = index_[i][locale];
            for (const auto& sentence : sentences) {
                std::vector<Key> seq;
                for (const auto& t : text::tokenize(sentence)) {
                    if (fragments.count(t.surface) != 0) continue;
                    seq.push_back({t.key, true});
                }
                set.sentences.push_back(sorted_unique(collapse_rows(seq, row_alias_phrases_)));
            }
        }
    }
}

auto LexicalMatcher::score_one(std::size_t index, const Utterance& u, const std::vector<EntityMention>& mentions) const
    -> MatchResult {
    const auto& intent = bundle_.intents[index];
    const auto& cfg = bundle_.matcher;
    SlotBinding b = bind(intent, mentions, bundle_);

    MatchResult r;
    r.intent = intent.name;
    r.slots = b.slots;

    // Tokens that stay in the bag of words.
    std::vector<int> token_role(u.tokens.size(), 0);  // 0 keep, 1 drop, 2 keep but never a row alias
    bool conflict = false;
    for (std::size_t i = 0; i < mentions.size(); ++i) {
        const auto& m = mentions[i];
        int role = 0;
        if (b.used[i]) {
            role = 1;
        } else {
            switch (m.kind) {
                case MentionKind::CategoricalValue:
                    role = 1;
                    r.extra_filters.push_back(m);
                    break;
                case MentionKind::Field:
                case MentionKind::Operator: {
                    const char* slot = m.kind == MentionKind::Field ? "FIELD" : "OPERATOR";
                    const auto* fixed = bound_value(b.slots, slot);
                    auto it = b.slots.find(slot);
                    bool matches_fixed = fixed != nullptr && it->second.synthetic && *fixed == m.value;
                    if (!matches_fixed) conflict = true;
                    role = 2;
                    break;
                }
                case MentionKind::Number:
                case MentionKind::Date: conflict = true; break;
                default: break;
            }
        }
        for (auto k = m.first_token; k < m.last_token && k < token_role.size(); ++k) token_role[k] = role;
    }
    // Two values of one field as conjoined equalities can never both hold.
    std::map<std::string, std::set<std::string>> equalities;
    for (const auto& [name, m] : b.slots) {
        if (m.kind == MentionKind::CategoricalValue && !r.extra_filters.empty()) equalities[m.field].insert(m.value);
    }
    for (const auto& m : r.extra_filters) {
        auto& values = equalities[m.field];
        values.insert(m.value);
        if (values.size() > 1) conflict = true;
    }

    std::vector<Key> seq;
    for (std::size_t k = 0; k < u.tokens.size(); ++k) {
        if (token_role[k] == 1) continue;
        seq.push_back({u.tokens[k].key, token_role[k] == 0});
    }
    auto bag = sorted_unique(collapse_rows(seq, row_alias_phrases_));

    const auto& by_locale = index_[index];
    auto it = by_locale.find(u.locale);
    if (it == by_locale.end()) it = by_locale.find("en");
    double lex = 0.0;
    if (it != by_locale.end()) {
        for (const auto& s : it->second.sentences) lex = std::max(lex, cosine(bag, s));
    }

    std::size_t expected = 0;
    std::size_t filled = 0;
    for (const auto& slot : intent.slots) {
        if (!slot.required) continue;
        ++expected;
        auto s = b.slots.find(slot.name);
        if (s != b.slots.end()) {
            if (!s->second.synthetic) ++filled;
        } else {
            r.missing_required.push_back(slot.name);
        }
    }
    for (const auto& name : intent.spelled) {
        ++expected;
        auto fixed = intent.fixed.find(name);
        MentionKind kind = name == "FIELD" ? MentionKind::Field : MentionKind::Operator;
        bool written = std::any_of(mentions.begin(), mentions.end(), [&](const EntityMention& m) {
            return m.kind == kind && fixed != intent.fixed.end() && m.value == fixed->second;
        });
        if (written) {
            ++filled;
        } else if (name == "FIELD") {
            // Bound to a field the user never named: only a guess.
            conflict = true;
        }
    }
    // With nothing to fill, coverage carries no evidence of its own and follows the wording.
    double cov = expected == 0 ? lex : static_cast<double>(filled) / static_cast<double>(expected);

    r.lexical = lex;
    if (conflict) {
        r.coverage = 0.0;
        r.confidence = 0.5 * cfg.w_lex * lex;
    } else {
        r.coverage = cov;
        r.confidence = cfg.w_lex * lex + cfg.w_slot * cov;
    }
    return r;
}

namespace {

auto rank(std::vector<MatchResult>& results) -> void {
    std::sort(results.begin(), results.end(), [](const MatchResult& a, const MatchResult& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.intent < b.intent;
    });
}

}  // namespace

auto LexicalMatcher::score(const Utterance& u, const std::vector<EntityMention>& mentions) const
    -> std::vector<MatchResult> {
    const auto n = static_cast<std::ptrdiff_t>(bundle_.intents.size());
    std::vector<MatchResult> out(bundle_.intents.size());
#pragma omp parallel for schedule(dynamic, 8) if (n >= 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = score_one(static_cast<std::size_t>(i), u, mentions);
    }
    rank(out);
    return out;
}

auto LexicalMatcher::score_serial(const Utterance& u, const std::vector<EntityMention>& mentions) const
    -> std::vector<MatchResult> {
    std::vector<MatchResult> out;
    out.reserve(bundle_.intents.size());
    for (std::size_t i = 0; i < bundle_.intents.size(); ++i) out.push_back(score_one(i, u, mentions));
    rank(out);
    return out;
}

auto validate_type_consistency(const MatchResult& result, const BotBundle& bundle) -> MatchResult {
    const double threshold = bundle.matcher.accept_threshold;
    if (!result.missing_required.empty()) {
        if (auto why = partial_check(result, bundle)) return demoted(result, *why, threshold);
        return result;
    }
    try {
        QueryPlan plan = build_plan(result, bundle);
        for (const auto& group : plan_group_refs(plan, bundle.schema)) {
            const auto* g = bundle.schema.group(group);
            if (g == nullptr || g->members.empty()) continue;
            const std::string& member = g->default_member ? *g->default_member : g->members.front();
            plan = resolve_group(plan, group, member);
        }
        (void)normalize_plan(plan, bundle.schema, bundle.operators);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::InvalidPlan && e.code() != ErrorCode::UnboundSlot) throw;
        return demoted(result, e.what(), threshold);
    }
    return result;
}

auto select_consistent(std::vector<MatchResult> ranked, const BotBundle& bundle) -> MatchResult {
    const double threshold = bundle.matcher.accept_threshold;
    if (ranked.empty()) return {};
    std::optional<std::size_t> chosen;
    for (std::size_t i = 0; i < ranked.size() && ranked[i].confidence >= threshold; ++i) {
        ranked[i] = validate_type_consistency(ranked[i], bundle);
        if (!ranked[i].violation) {
            chosen = i;
            break;
        }
    }
    if (!chosen) {
        rank(ranked);
        chosen = 0;
    }
    MatchResult best = ranked[*chosen];
    ranked.erase(ranked.begin() + static_cast<std::ptrdiff_t>(*chosen));
    rank(ranked);
    for (std::size_t i = 0; i < ranked.size() && best.alternates.size() < 5; ++i) {
        best.alternates.push_back({ranked[i].intent, ranked[i].confidence});
    }
    return best;
}

auto match_intent(const Utterance& u, const std::vector<EntityMention>& mentions, const BotBundle& bundle)
    -> MatchResult {
    return select_consistent(LexicalMatcher(bundle).score(u, mentions), bundle);
}

auto match_to_json(const MatchResult& m) -> json {
    json slots = json::object();
    for (const auto& [name, mention] : m.slots) slots[name] = mention_to_json(mention);
    json alternates = json::array();
    for (const auto& a : m.alternates) alternates.push_back({{"intent", a.intent}, {"confidence", a.confidence}});
    json extra = json::array();
    for (const auto& e : m.extra_filters) extra.push_back(mention_to_json(e));
    json j{{"intent", m.intent},
           {"confidence", m.confidence},
           {"lexical", m.lexical},
           {"coverage", m.coverage},
           {"slots", std::move(slots)},
           {"missingRequired", m.missing_required},
           {"alternates", std::move(alternates)},
           {"extraFilters", std::move(extra)}};
    j["violation"] = m.violation ? json(*m.violation) : json();
    return j;
}

IntentEngine::IntentEngine(std::shared_ptr<const BotBundle> bundle)
    : bundle_(std::move(bundle)), lexicon_(*bundle_), matcher_(*bundle_) {}

auto IntentEngine::recognize(const Utterance& u) const -> std::vector<EntityMention> {
    return recognize_entities(u, *bundle_, lexicon_);
}

auto IntentEngine::match(const Utterance& u, const std::vector<EntityMention>& mentions) const -> MatchResult {
    return select_consistent(matcher_.score(u, mentions), *bundle_);
}

auto IntentEngine::understand(std::string_view text, std::string_view locale) const -> Understanding {
    Understanding out;
    out.utterance = tokenize_utterance(text, locale);
    out.mentions = recognize(out.utterance);
    out.match = match(out.utterance, out.mentions);
    return out;
}

}  // namespace tabot
