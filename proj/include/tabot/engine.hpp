#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabot/generator.hpp"
#include "tabot/text.hpp"
#include "tabot/value.hpp"

namespace tabot {

struct Utterance {
    std::string raw;
    std::string locale = "en";
    std::vector<text::Token> tokens;
};

/// Throws EmptyUtterance when the text holds no tokens.
auto tokenize_utterance(std::string_view raw, std::string_view locale = "en") -> Utterance;

enum class MentionKind { Field, Operator, CategoricalValue, RowAlias, Number, Date, Text };

auto mention_kind_name(MentionKind k) -> std::string_view;

struct EntityMention {
    MentionKind kind = MentionKind::Text;
    std::string entity;  ///< entity name in the bundle
    /// Canonical value: field name, operator id, lexicon value, row alias, or
    /// the literal's text.
    std::string value;
    Value typed;         ///< Number/Date: parsed value; otherwise the value as text
    std::string field;   ///< owning field of a categorical value
    std::size_t first_token = 0;  ///< token span [first_token, last_token)
    std::size_t last_token = 0;
    std::size_t begin = 0;  ///< byte span in the raw text
    std::size_t end = 0;
    double score = 1.0;
    /// Synthesized from a fixed intent binding rather than read from the text.
    bool synthetic = false;

    [[nodiscard]] auto closed() const -> bool {
        return kind == MentionKind::Field || kind == MentionKind::Operator || kind == MentionKind::CategoricalValue ||
               kind == MentionKind::RowAlias;
    }
    [[nodiscard]] auto literal() const -> bool {
        return kind == MentionKind::Number || kind == MentionKind::Date || kind == MentionKind::Text;
    }
    auto operator==(const EntityMention&) const -> bool = default;
};

auto mention_to_json(const EntityMention& m) -> nlohmann::json;

/// Closed-lexicon index over a bundle, built once and shared by recognizers.
class Lexicon {
public:
    explicit Lexicon(const BotBundle& bundle);

    struct Entry {
        std::vector<std::string> keys;
        MentionKind kind;
        std::string entity;
        std::string value;
        std::string field;
    };

    [[nodiscard]] auto starting_with(const std::string& key) const -> const std::vector<Entry>*;
    /// Entry whose phrase is exactly `keys`, preferring the higher-priority kind.
    [[nodiscard]] auto exact(const std::vector<std::string>& keys) const -> const Entry*;
    [[nodiscard]] auto known_key(const std::string& key) const -> bool;

private:
    std::map<std::string, std::vector<Entry>> by_first_;
};

auto recognize_entities(const Utterance& utterance, const BotBundle& bundle) -> std::vector<EntityMention>;
auto recognize_entities(const Utterance& utterance, const BotBundle& bundle, const Lexicon& lexicon)
    -> std::vector<EntityMention>;

struct Alternate {
    std::string intent;
    double confidence = 0.0;
};

struct MatchResult {
    std::string intent;
    double confidence = 0.0;
    double lexical = 0.0;
    double coverage = 0.0;
    /// Slot name → mention. Fixed bindings (FIELD, OPERATOR, VARIANT) appear as
    /// synthetic mentions.
    std::map<std::string, EntityMention> slots;
    std::vector<std::string> missing_required;
    std::vector<Alternate> alternates;
    /// Categorical values mentioned but not bound to any slot; they become
    /// equality filters on their owning field.
    std::vector<EntityMention> extra_filters;
    std::optional<std::string> violation;

    [[nodiscard]] auto accepted(double threshold) const -> bool { return !intent.empty() && confidence >= threshold; }
};

auto match_to_json(const MatchResult& m) -> nlohmann::json;

/// Scoring contract. Implementations score every intent and return the best
/// with alternates; type consistency is enforced separately.
class Matcher {
public:
    virtual ~Matcher() = default;
    [[nodiscard]] virtual auto score(const Utterance& utterance, const std::vector<EntityMention>& mentions) const
        -> std::vector<MatchResult> = 0;
};

/// Token-set cosine against training sentences plus slot coverage.
class LexicalMatcher final : public Matcher {
public:
    explicit LexicalMatcher(const BotBundle& bundle);
    [[nodiscard]] auto score(const Utterance& utterance, const std::vector<EntityMention>& mentions) const
        -> std::vector<MatchResult> override;

    /// Serial loop, kept as the reference for the parallel one.
    [[nodiscard]] auto score_serial(const Utterance& utterance, const std::vector<EntityMention>& mentions) const
        -> std::vector<MatchResult>;

private:
    struct SentenceSet {
        std::vector<std::vector<std::string>> sentences;  ///< sorted unique keys
    };
    [[nodiscard]] auto score_one(std::size_t intent, const Utterance& utterance,
                                 const std::vector<EntityMention>& mentions) const -> MatchResult;

    const BotBundle& bundle_;
    std::vector<std::map<std::string, SentenceSet>> index_;  ///< per intent, per locale
    std::vector<std::vector<std::string>> row_alias_phrases_;  ///< longest first
};

/// Can `m` fill `slot` of `intent`, given the slots bound so far?
auto mention_fits(const Intent& intent, const IntentSlot& slot, const EntityMention& m,
                  const std::map<std::string, EntityMention>& bound, const BotBundle& bundle) -> bool;

/// Builds the plan the match implies and checks operator/type/arity. A
/// violation demotes the match below the accept threshold and records why.
auto validate_type_consistency(const MatchResult& result, const BotBundle& bundle) -> MatchResult;

/// Ranks, type-checks the leading candidates and returns the best consistent one.
auto match_intent(const Utterance& utterance, const std::vector<EntityMention>& mentions, const BotBundle& bundle)
    -> MatchResult;

struct Understanding {
    Utterance utterance;
    std::vector<EntityMention> mentions;
    MatchResult match;
};

/// Recognizer + matcher over one bundle; immutable and shareable.
class IntentEngine {
public:
    explicit IntentEngine(std::shared_ptr<const BotBundle> bundle);

    [[nodiscard]] auto bundle() const -> const BotBundle& { return *bundle_; }
    [[nodiscard]] auto bundle_ptr() const -> const std::shared_ptr<const BotBundle>& { return bundle_; }
    [[nodiscard]] auto lexicon() const -> const Lexicon& { return lexicon_; }
    [[nodiscard]] auto recognize(const Utterance& utterance) const -> std::vector<EntityMention>;
    [[nodiscard]] auto match(const Utterance& utterance, const std::vector<EntityMention>& mentions) const
        -> MatchResult;
    /// Throws EmptyUtterance.
    [[nodiscard]] auto understand(std::string_view text, std::string_view locale = "en") const -> Understanding;

private:
    std::shared_ptr<const BotBundle> bundle_;
    Lexicon lexicon_;
    LexicalMatcher matcher_;
};

/// Runs the ranked candidates through the type check, best first.
auto select_consistent(std::vector<MatchResult> ranked, const BotBundle& bundle) -> MatchResult;

}  // namespace tabot
