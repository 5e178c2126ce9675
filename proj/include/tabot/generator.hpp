#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabot/patterns.hpp"
#include "tabot/schema.hpp"

namespace tabot {

enum class Strategy { Expanded, Generic };

auto strategy_name(Strategy s) -> std::string_view;
auto parse_strategy(std::string_view s) -> std::optional<Strategy>;

enum class EntityKind {
    SystemNumber,
    SystemDate,
    SystemText,
    FieldEntity,
    OperatorEntity,
    CategoricalValueEntity,
    RowAliasEntity,
};

auto entity_kind_name(EntityKind k) -> std::string_view;

// Entity references used by slots.
inline constexpr std::string_view kNumberEntity = "number";
inline constexpr std::string_view kDateEntity = "date";
inline constexpr std::string_view kTextEntity = "text";
/// Any literal: number, date, free text or a categorical value.
inline constexpr std::string_view kLiteralEntity = "literalEntity";
inline constexpr std::string_view kFieldEntity = "fieldEntity";
inline constexpr std::string_view kOperatorEntity = "operatorEntity";
inline constexpr std::string_view kRowAliasEntity = "rowAliasEntity";
/// Reserved reference: a value of any categorical entity. Resolves even when
/// the schema has no categorical fields (the slot then simply never binds).
inline constexpr std::string_view kCategoricalValueRef = "categoricalValue";

/// Name of the closed entity holding a categorical field's values.
auto categorical_entity_name(std::string_view field) -> std::string;

struct EntityDef {
    std::string name;
    EntityKind kind = EntityKind::SystemText;
    /// canonical value → phrases that denote it (canonical first)
    std::map<std::string, std::vector<std::string>> lexicon;
    std::string field;  ///< owning field of a categorical entity

    auto operator==(const EntityDef&) const -> bool = default;
};

struct IntentSlot : SlotSpec {
    std::string fragment;  ///< placeholder token in training sentences
};

struct Intent {
    std::string name;
    LocalizedList training_sentences;
    std::vector<IntentSlot> slots;
    /// Bindings fixed at generation time: FIELD, OPERATOR, VARIANT.
    std::map<std::string, std::string> fixed;
    nlohmann::json plan_template;
    std::string source_pattern;
    std::optional<std::string> bound_field;
    PatternCategory category = PatternCategory::DatasetLevel;
    /// Generic intents whose field comes from a categorical slot.
    std::optional<std::string> field_from;
    std::map<std::string, std::string> interpretation;
    /// Fixed bindings whose words are written out in the training sentences.
    std::vector<std::string> spelled;

    [[nodiscard]] auto slot(std::string_view name) const -> const IntentSlot*;
};

struct MatcherConfig {
    double w_lex = 0.6;
    double w_slot = 0.4;
    double accept_threshold = 0.55;
};

inline constexpr int kBundleFormatVersion = 1;
inline constexpr std::string_view kGeneratorVersion = "tabot-gen/1";

struct BotBundle {
    DataSchema schema;
    Strategy strategy = Strategy::Expanded;
    std::vector<Intent> intents;
    std::vector<EntityDef> entities;
    std::vector<Operator> operators;
    std::string generator_version{kGeneratorVersion};
    std::vector<std::string> locales;
    MatcherConfig matcher;

    [[nodiscard]] auto intent(std::string_view name) const -> const Intent*;
    [[nodiscard]] auto entity(std::string_view name) const -> const EntityDef*;
    [[nodiscard]] auto op(std::string_view id) const -> const Operator*;
};

struct GeneratorConfig {
    std::size_t max_expanded_intents = 500;
    std::optional<Strategy> force;
    MatcherConfig matcher;
};

auto generate_expanded(const DataSchema& schema, const Catalog& catalog, const MatcherConfig& matcher = {})
    -> BotBundle;
auto generate_generic(const DataSchema& schema, const Catalog& catalog, const MatcherConfig& matcher = {})
    -> BotBundle;

/// Number of intents generate_expanded would produce, without building them.
auto predicted_expanded_count(const DataSchema& schema, const Catalog& catalog) -> std::size_t;
auto select_strategy(const DataSchema& schema, const Catalog& catalog, const GeneratorConfig& config = {})
    -> Strategy;
auto generate(const DataSchema& schema, const Catalog& catalog, Strategy strategy, const MatcherConfig& matcher = {})
    -> BotBundle;

auto save_bundle(const BotBundle& bundle) -> nlohmann::json;
/// Throws InvalidBundle.
auto load_bundle(const nlohmann::json& document) -> BotBundle;

/// Structural self-check: unique names, every slot entity resolves.
auto validate_bundle(const BotBundle& bundle) -> void;

}  // namespace tabot
