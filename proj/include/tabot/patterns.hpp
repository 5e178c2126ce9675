#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tabot/schema.hpp"
#include "tabot/value.hpp"

namespace tabot {

enum class PatternCategory { DatasetLevel, FieldLevel, CellValueLevel, Aggregation, Meta };

auto pattern_category_name(PatternCategory c) -> std::string_view;
auto parse_pattern_category(std::string_view s) -> std::optional<PatternCategory>;

struct Operator {
    std::string id;
    int arity = 1;
    std::vector<FieldType> applicable_types;
    LocalizedList surface_forms;
    /// Wording used in clarification prompts ("greater than").
    std::map<std::string, std::string> prompt_forms;

    [[nodiscard]] auto applies_to(FieldType t) const -> bool;
};

/// Static predicate over a field (or a field-like name such as a composite).
struct Applicability {
    std::vector<FieldType> types;  ///< empty: any non-Empty type
    std::optional<bool> categorical;
    std::optional<std::size_t> max_diversity;
    bool composites = false;  ///< composite fields qualify (treated as Text)
    /// The schema must also contain a categorical field (group-by patterns).
    bool needs_categorical_field = false;
};

enum class VariantKind { None, Operator, Aggregate, Direction };

struct PatternVariant {
    std::string id;
    LocalizedList forms;
    std::string value;  ///< what `$VARIANT` becomes in the plan template
    std::vector<FieldType> types;  ///< narrows the pattern's applicability; empty: no narrowing
};

struct SlotConstraints {
    std::optional<std::string> typed_by;       ///< VALUE parsed as the type of this slot's field
    std::optional<std::string> same_field_as;  ///< categorical value of the same field as another slot
    std::optional<std::string> distinct_from; ///< must not bind the same value as another slot
    /// For field-valued slots: the field must satisfy this predicate.
    std::optional<Applicability> field;
    /// For categorical-value slots: the owning field's diversity bound.
    std::optional<std::size_t> max_diversity;
    bool positive_integer = false;
};

struct SlotSpec {
    std::string name;    ///< also the placeholder token in templates (VALUE, K, ...)
    std::string entity;  ///< entity reference; see generator.hpp for the built-in names
    bool required = true;
    SlotConstraints constraints;
    std::optional<nlohmann::json> default_value;
    /// Clarification question, with {field} and {operator} substituted.
    std::map<std::string, std::string> prompt;
};

enum class Binding { None, Field };

struct ConversationPattern {
    std::string id;
    PatternCategory category = PatternCategory::DatasetLevel;
    Binding binding = Binding::None;
    /// Intent name; {field}, {operator} and {variant} are substituted.
    std::string name_template;
    Applicability applies;
    /// Unbound patterns with a declared predicate are only instantiated when
    /// some field satisfies it.
    bool applies_declared = false;
    /// Under the generic strategy the bound field comes from this slot's
    /// categorical value instead of a FIELD slot.
    std::optional<std::string> field_from;
    VariantKind variant_kind = VariantKind::None;
    std::vector<PatternVariant> variants;  ///< Aggregate/Direction only
    /// Operator forced for every instance (between).
    std::optional<std::string> fixed_operator;
    std::vector<SlotSpec> slots;
    LocalizedList templates;
    nlohmann::json plan_template;
    /// Note shown with answers ("by average salary").
    std::map<std::string, std::string> interpretation;

    [[nodiscard]] auto slot(std::string_view name) const -> const SlotSpec*;
};

struct Catalog {
    int version = 1;
    std::vector<Operator> operators;
    std::vector<ConversationPattern> patterns;

    [[nodiscard]] auto op(std::string_view id) const -> const Operator*;
    [[nodiscard]] auto pattern(std::string_view id) const -> const ConversationPattern*;
};

/// The built-in catalog, parsed and validated once.
auto catalog() -> const Catalog&;

/// Throws InvalidCatalog naming the offending element.
auto load_catalog(const nlohmann::json& document) -> Catalog;
auto save_catalog(const Catalog& catalog) -> nlohmann::json;
auto validate_catalog(const Catalog& catalog) -> void;

/// Patterns and operators of `extension` replace those with the same id and
/// are otherwise appended. The result is validated.
auto merge_catalog(const Catalog& base, const nlohmann::json& extension) -> Catalog;

// Element-level serialization, shared with the bundle format. Errors are
// InvalidCatalog with `path` prefixed.
auto operator_to_json(const Operator& op) -> nlohmann::json;
auto operator_from_json(const nlohmann::json& j, const std::string& path) -> Operator;
auto slot_to_json(const SlotSpec& slot) -> nlohmann::json;
auto slot_from_json(const nlohmann::json& j, const std::string& path) -> SlotSpec;

/// A field-like name as the catalog sees it. Groups are typed by their default
/// (or first) member; composites are Text and never categorical.
struct FieldView {
    std::string name;
    FieldType type = FieldType::Empty;
    const FieldStats* stats = nullptr;  ///< null for composites
    bool is_composite = false;
    bool is_group = false;
};

auto field_views(const DataSchema& schema) -> std::vector<FieldView>;
auto field_view(const DataSchema& schema, std::string_view name) -> std::optional<FieldView>;

auto satisfies(const Applicability& a, const FieldView& field, const DataSchema& schema) -> bool;

/// Patterns bound to a field whose predicate accepts `field`.
auto applicable_patterns(const std::vector<ConversationPattern>& patterns, const FieldView& field,
                         const DataSchema& schema) -> std::vector<const ConversationPattern*>;
/// Operators a pattern with operator variants instantiates for `field`.
auto operator_variants(const Catalog& catalog, const FieldView& field) -> std::vector<const Operator*>;

}  // namespace tabot
