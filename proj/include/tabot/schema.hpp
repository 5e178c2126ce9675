#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tabot/ingest.hpp"

namespace tabot {

/// locale tag → phrases
using LocalizedList = std::map<std::string, std::vector<std::string>>;

struct FieldDescriptor {
    std::string name;
    std::map<std::string, std::string> display_names;
    LocalizedList synonyms;
    FieldType type = FieldType::Empty;
    FieldStats stats;
    /// Set when the field is a member of a group; derived from DataSchema::groups.
    std::optional<std::string> group;
    /// Alternative wordings for categorical values ("women" for "F"),
    /// keyed by the lexicon value.
    std::map<std::string, LocalizedList> value_synonyms;

    auto operator==(const FieldDescriptor&) const -> bool = default;
};

/// Virtual field whose value is its parts joined by `separator`; never stored.
struct CompositeField {
    std::string name;
    std::vector<std::string> parts;
    std::string separator = " ";
    std::map<std::string, std::string> display_names;
    LocalizedList synonyms;

    auto operator==(const CompositeField&) const -> bool = default;
};

/// Related fields the user may refer to by one name; the bot asks which one.
struct FieldGroup {
    std::string id;
    std::vector<std::string> members;
    std::optional<std::string> default_member;
    LocalizedList synonyms;

    auto operator==(const FieldGroup&) const -> bool = default;
};

constexpr int kSchemaFormatVersion = 1;

struct DataSchema {
    std::vector<FieldDescriptor> fields;
    LocalizedList row_aliases;
    std::vector<CompositeField> composites;
    std::vector<FieldGroup> groups;
    SourceMeta source;
    std::string language = "en";

    [[nodiscard]] auto field(std::string_view name) const -> const FieldDescriptor*;
    [[nodiscard]] auto composite(std::string_view name) const -> const CompositeField*;
    [[nodiscard]] auto group(std::string_view id) const -> const FieldGroup*;

    auto operator==(const DataSchema&) const -> bool = default;
};

struct SchemaConfig {
    std::size_t categorical_threshold = kDefaultCategoricalThreshold;
};

auto build_default_schema(const Table& table, const SchemaConfig& config = {}) -> DataSchema;

namespace enrich {

struct AddSynonym {
    std::string field;  ///< real field, composite or group
    std::string locale; ///< empty: the schema's language
    std::string synonym;
};
struct RemoveSynonym {
    std::string field;
    std::string locale;
    std::string synonym;
};
struct SetDisplayName {
    std::string field;
    std::string locale;
    std::string name;
};
struct AddValueSynonym {
    std::string field;
    std::string value;
    std::string locale;
    std::string synonym;
};
struct RemoveValueSynonym {
    std::string field;
    std::string value;
    std::string locale;
    std::string synonym;
};
struct AddComposite {
    std::string name;
    std::vector<std::string> parts;
    std::string separator = " ";
};
struct RemoveComposite {
    std::string name;
};
struct AddGroup {
    std::string id;
    std::vector<std::string> members;
    std::optional<std::string> default_member;
};
struct RemoveGroup {
    std::string id;
};
struct AddRowAlias {
    std::string locale;
    std::string alias;
};
struct RemoveRowAlias {
    std::string locale;
    std::string alias;
};

}  // namespace enrich

using EnrichmentCommand =
    std::variant<enrich::AddSynonym, enrich::RemoveSynonym, enrich::SetDisplayName, enrich::AddValueSynonym,
                 enrich::RemoveValueSynonym, enrich::AddComposite, enrich::RemoveComposite, enrich::AddGroup,
                 enrich::RemoveGroup, enrich::AddRowAlias, enrich::RemoveRowAlias>;

/// Returns a new schema with `command` applied and every invariant rechecked.
/// Throws UnknownField, SynonymCollision, GroupMembershipConflict,
/// CompositeShadowsField or IntegrityViolation.
auto apply_enrichment(const DataSchema& schema, const EnrichmentCommand& command) -> DataSchema;

/// Full invariant check; throws with `Error::detail()` naming the offending
/// element as a document path (e.g. "/groups/0/members/1").
auto validate_schema(const DataSchema& schema) -> void;

auto command_from_json(const nlohmann::json& j) -> EnrichmentCommand;
auto command_to_json(const EnrichmentCommand& command) -> nlohmann::json;

auto save_schema(const DataSchema& schema) -> nlohmann::json;
/// Throws SchemaVersionMismatch or IntegrityViolation.
auto load_schema(const nlohmann::json& document) -> DataSchema;

auto format_timestamp(std::int64_t unix_seconds) -> std::string;
auto parse_timestamp(std::string_view iso) -> std::optional<std::int64_t>;

/// Every phrase a user may use for a field-like name (canonical, display names,
/// synonyms), for all locales, canonical first.
auto surface_forms(const FieldDescriptor& field) -> std::vector<std::string>;
auto surface_forms(const CompositeField& composite) -> std::vector<std::string>;
auto surface_forms(const FieldGroup& group) -> std::vector<std::string>;
/// Human-readable name: display name for `locale`, else canonical with
/// underscores as spaces.
auto display_name(const DataSchema& schema, std::string_view name, std::string_view locale) -> std::string;

}  // namespace tabot
