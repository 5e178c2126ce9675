#include "tabot/schema.hpp"

#include <algorithm>
#include <set>

#include "tabot/error.hpp"
#include "tabot/text.hpp"

namespace tabot {

namespace {

auto same_name(std::string_view a, std::string_view b) -> bool {
    return text::normalize_name(a) == text::normalize_name(b);
}

auto humanize(std::string_view name) -> std::string {
    std::string out(name);
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

auto collect_forms(std::string_view canonical, const std::map<std::string, std::string>& displays,
                   const LocalizedList& synonyms) -> std::vector<std::string> {
    std::vector<std::string> forms{humanize(canonical)};
    for (const auto& [locale, name] : displays) forms.push_back(name);
    for (const auto& [locale, list] : synonyms) {
        forms.insert(forms.end(), list.begin(), list.end());
    }
    return forms;
}

auto index_path(std::string_view base, std::size_t i) -> std::string {
    return std::string(base) + "/" + std::to_string(i);
}

auto lexicon_contains(const FieldDescriptor& f, std::string_view value) -> std::optional<std::string> {
    for (const auto& v : f.stats.value_lexicon) {
        if (text::fold(v) == text::fold(value)) return v;
    }
    return std::nullopt;
}

auto add_unique(std::vector<std::string>& list, std::string value) -> void {
    for (const auto& existing : list) {
        if (same_name(existing, value)) return;
    }
    list.push_back(std::move(value));
}

auto remove_matching(std::vector<std::string>& list, std::string_view value) -> bool {
    auto before = list.size();
    std::erase_if(list, [&](const std::string& s) { return same_name(s, value); });
    return list.size() != before;
}

/// Mutable handle to whatever a field-like name refers to.
struct NamedTarget {
    std::map<std::string, std::string>* displays = nullptr;
    LocalizedList* synonyms = nullptr;
};

auto find_target(DataSchema& s, std::string_view name) -> NamedTarget {
    for (auto& f : s.fields) {
        if (same_name(f.name, name)) return {&f.display_names, &f.synonyms};
    }
    for (auto& c : s.composites) {
        if (same_name(c.name, name)) return {&c.display_names, &c.synonyms};
    }
    for (auto& g : s.groups) {
        if (same_name(g.id, name)) return {nullptr, &g.synonyms};
    }
    throw Error(ErrorCode::UnknownField, "unknown field '" + std::string(name) + "'", std::string(name));
}

auto mutable_field(DataSchema& s, std::string_view name) -> FieldDescriptor& {
    for (auto& f : s.fields) {
        if (same_name(f.name, name)) return f;
    }
    throw Error(ErrorCode::UnknownField, "unknown field '" + std::string(name) + "'", std::string(name));
}

auto canonical_field_name(const DataSchema& s, std::string_view name) -> std::string {
    if (const auto* f = s.field(name)) return f->name;
    throw Error(ErrorCode::UnknownField, "unknown field '" + std::string(name) + "'", std::string(name));
}

auto locale_or_default(const DataSchema& s, const std::string& locale) -> std::string {
    return locale.empty() ? s.language : locale;
}

auto sync_group_membership(DataSchema& s) -> void {
    for (auto& f : s.fields) f.group.reset();
    for (const auto& g : s.groups) {
        for (const auto& m : g.members) {
            for (auto& f : s.fields) {
                if (same_name(f.name, m) && !f.group) f.group = g.id;
            }
        }
    }
}

struct Applier {
    DataSchema& s;

    void operator()(const enrich::AddSynonym& c) const {
        auto target = find_target(s, c.field);
        if (text::trim(c.synonym).empty()) throw Error(ErrorCode::InvalidCommand, "empty synonym");
        add_unique((*target.synonyms)[locale_or_default(s, c.locale)], std::string(text::trim(c.synonym)));
    }
    void operator()(const enrich::RemoveSynonym& c) const {
        auto target = find_target(s, c.field);
        auto& list = (*target.synonyms)[locale_or_default(s, c.locale)];
        if (!remove_matching(list, c.synonym)) {
            throw Error(ErrorCode::InvalidCommand, "no synonym '" + c.synonym + "' on " + c.field, c.synonym);
        }
        if (list.empty()) target.synonyms->erase(locale_or_default(s, c.locale));
    }
    void operator()(const enrich::SetDisplayName& c) const {
        auto target = find_target(s, c.field);
        if (target.displays == nullptr) {
            throw Error(ErrorCode::InvalidCommand, "groups have no display names; add a synonym", c.field);
        }
        if (text::trim(c.name).empty()) {
            target.displays->erase(locale_or_default(s, c.locale));
        } else {
            (*target.displays)[locale_or_default(s, c.locale)] = std::string(text::trim(c.name));
        }
    }
    void operator()(const enrich::AddValueSynonym& c) const {
        auto& f = mutable_field(s, c.field);
        auto value = lexicon_contains(f, c.value);
        if (!f.stats.is_categorical || !value) {
            throw Error(ErrorCode::InvalidCommand, "'" + c.value + "' is not a categorical value of " + f.name,
                        c.value);
        }
        if (text::trim(c.synonym).empty()) throw Error(ErrorCode::InvalidCommand, "empty synonym");
        add_unique(f.value_synonyms[*value][locale_or_default(s, c.locale)], std::string(text::trim(c.synonym)));
    }
    void operator()(const enrich::RemoveValueSynonym& c) const {
        auto& f = mutable_field(s, c.field);
        auto value = lexicon_contains(f, c.value);
        if (!value || !f.value_synonyms.contains(*value) ||
            !remove_matching(f.value_synonyms[*value][locale_or_default(s, c.locale)], c.synonym)) {
            throw Error(ErrorCode::InvalidCommand, "no value synonym '" + c.synonym + "'", c.synonym);
        }
        auto& per_locale = f.value_synonyms[*value];
        std::erase_if(per_locale, [](const auto& kv) { return kv.second.empty(); });
        if (per_locale.empty()) f.value_synonyms.erase(*value);
    }
    void operator()(const enrich::AddComposite& c) const {
        CompositeField comp;
        comp.name = std::string(text::trim(c.name));
        comp.separator = c.separator;
        for (const auto& p : c.parts) comp.parts.push_back(canonical_field_name(s, p));
        s.composites.push_back(std::move(comp));
    }
    void operator()(const enrich::RemoveComposite& c) const {
        auto before = s.composites.size();
        std::erase_if(s.composites, [&](const CompositeField& x) { return same_name(x.name, c.name); });
        if (before == s.composites.size()) {
            throw Error(ErrorCode::UnknownField, "unknown composite '" + c.name + "'", c.name);
        }
    }
    void operator()(const enrich::AddGroup& c) const {
        FieldGroup g;
        g.id = std::string(text::trim(c.id));
        for (const auto& m : c.members) g.members.push_back(canonical_field_name(s, m));
        if (c.default_member) g.default_member = canonical_field_name(s, *c.default_member);
        s.groups.push_back(std::move(g));
    }
    void operator()(const enrich::RemoveGroup& c) const {
        auto before = s.groups.size();
        std::erase_if(s.groups, [&](const FieldGroup& g) { return same_name(g.id, c.id); });
        if (before == s.groups.size()) throw Error(ErrorCode::UnknownField, "unknown group '" + c.id + "'", c.id);
    }
    void operator()(const enrich::AddRowAlias& c) const {
        if (text::trim(c.alias).empty()) throw Error(ErrorCode::InvalidCommand, "empty row alias");
        add_unique(s.row_aliases[locale_or_default(s, c.locale)], std::string(text::trim(c.alias)));
    }
    void operator()(const enrich::RemoveRowAlias& c) const {
        auto& list = s.row_aliases[locale_or_default(s, c.locale)];
        if (!remove_matching(list, c.alias)) {
            throw Error(ErrorCode::InvalidCommand, "no row alias '" + c.alias + "'", c.alias);
        }
    }
};

}  // namespace

auto DataSchema::field(std::string_view name) const -> const FieldDescriptor* {
    for (const auto& f : fields) {
        if (same_name(f.name, name)) return &f;
    }
    return nullptr;
}

auto DataSchema::composite(std::string_view name) const -> const CompositeField* {
    for (const auto& c : composites) {
        if (same_name(c.name, name)) return &c;
    }
    return nullptr;
}

auto DataSchema::group(std::string_view id) const -> const FieldGroup* {
    for (const auto& g : groups) {
        if (same_name(g.id, id)) return &g;
    }
    return nullptr;
}

auto surface_forms(const FieldDescriptor& field) -> std::vector<std::string> {
    return collect_forms(field.name, field.display_names, field.synonyms);
}

auto surface_forms(const CompositeField& composite) -> std::vector<std::string> {
    return collect_forms(composite.name, composite.display_names, composite.synonyms);
}

auto surface_forms(const FieldGroup& group) -> std::vector<std::string> {
    return collect_forms(group.id, {}, group.synonyms);
}

auto display_name(const DataSchema& schema, std::string_view name, std::string_view locale) -> std::string {
    const std::map<std::string, std::string>* displays = nullptr;
    std::string canonical(name);
    if (const auto* f = schema.field(name)) {
        displays = &f->display_names;
        canonical = f->name;
    } else if (const auto* c = schema.composite(name)) {
        displays = &c->display_names;
        canonical = c->name;
    }
    if (displays != nullptr) {
        if (auto it = displays->find(std::string(locale)); it != displays->end()) return it->second;
    }
    return humanize(canonical);
}

auto build_default_schema(const Table& table, const SchemaConfig& config) -> DataSchema {
    DataSchema schema;
    schema.source = table.source_meta();
    schema.row_aliases[schema.language] = {"rows"};
    for (const auto& col : table.columns()) {
        FieldDescriptor f;
        f.name = col.name;
        f.stats = compute_field_stats(table, col.name, config.categorical_threshold);
        f.type = f.stats.inferred_type;
        schema.fields.push_back(std::move(f));
    }
    return schema;
}

auto validate_schema(const DataSchema& s) -> void {
    auto violation = [](const std::string& path, const std::string& what) -> Error {
        return Error(ErrorCode::IntegrityViolation, path + ": " + what, path);
    };

    // Every phrase must resolve to exactly one field-like owner.
    std::map<std::string, std::string> owner_of;
    auto claim = [&](const std::string& phrase, const std::string& owner, const std::string& path,
                     ErrorCode code) {
        std::string key = text::normalize_name(phrase);
        if (key.empty()) throw violation(path, "empty name");
        auto [it, inserted] = owner_of.emplace(key, owner);
        if (!inserted && it->second != owner) {
            throw Error(code, "'" + phrase + "' already names " + it->second, path);
        }
    };

    for (std::size_t i = 0; i < s.fields.size(); ++i) {
        const auto& f = s.fields[i];
        std::string path = index_path("/fields", i);
        if (owner_of.contains(text::normalize_name(f.name))) throw violation(path + "/name", "duplicate field " + f.name);
        claim(f.name, f.name, path + "/name", ErrorCode::IntegrityViolation);
        if (f.type != f.stats.inferred_type) throw violation(path + "/type", "type disagrees with stats");
        if (f.stats.value_lexicon.empty() == f.stats.is_categorical && f.stats.diversity > 0) {
            throw violation(path + "/stats/valueLexicon", "lexicon must be present iff categorical");
        }
        for (const auto& [value, per_locale] : f.value_synonyms) {
            if (!lexicon_contains(f, value)) {
                throw violation(path + "/valueSynonyms/" + value, "not a categorical value");
            }
        }
    }
    for (std::size_t i = 0; i < s.composites.size(); ++i) {
        const auto& c = s.composites[i];
        std::string path = index_path("/composites", i);
        if (owner_of.contains(text::normalize_name(c.name))) {
            throw Error(ErrorCode::CompositeShadowsField, "composite '" + c.name + "' shadows " +
                            owner_of[text::normalize_name(c.name)], path + "/name");
        }
        claim(c.name, c.name, path + "/name", ErrorCode::CompositeShadowsField);
        if (c.parts.size() < 2) throw violation(path + "/parts", "a composite needs at least two parts");
        std::set<std::string> seen;
        for (std::size_t p = 0; p < c.parts.size(); ++p) {
            if (s.field(c.parts[p]) == nullptr) {
                throw Error(ErrorCode::IntegrityViolation, "unknown part '" + c.parts[p] + "'",
                            index_path(path + "/parts", p));
            }
            if (!seen.insert(text::normalize_name(c.parts[p])).second) {
                throw violation(index_path(path + "/parts", p), "duplicate part");
            }
        }
    }
    std::map<std::string, std::string> member_of;
    for (std::size_t i = 0; i < s.groups.size(); ++i) {
        const auto& g = s.groups[i];
        std::string path = index_path("/groups", i);
        if (owner_of.contains(text::normalize_name(g.id))) {
            throw violation(path + "/id", "group id shadows " + owner_of[text::normalize_name(g.id)]);
        }
        claim(g.id, g.id, path + "/id", ErrorCode::IntegrityViolation);
        if (g.members.size() < 2) throw violation(path + "/members", "a group needs at least two members");
        for (std::size_t m = 0; m < g.members.size(); ++m) {
            std::string mpath = index_path(path + "/members", m);
            if (s.field(g.members[m]) == nullptr) {
                throw Error(ErrorCode::IntegrityViolation, "unknown member '" + g.members[m] + "'", mpath);
            }
            auto [it, inserted] = member_of.emplace(text::normalize_name(g.members[m]), g.id);
            if (!inserted) {
                throw Error(ErrorCode::GroupMembershipConflict,
                            g.members[m] + " already belongs to group " + it->second, mpath);
            }
        }
        if (g.default_member) {
            bool found = std::any_of(g.members.begin(), g.members.end(),
                                     [&](const std::string& m) { return same_name(m, *g.default_member); });
            if (!found) throw violation(path + "/default", "default is not a member");
        }
    }
    for (std::size_t i = 0; i < s.fields.size(); ++i) {
        const auto& f = s.fields[i];
        auto it = member_of.find(text::normalize_name(f.name));
        std::optional<std::string> expected;
        if (it != member_of.end()) expected = it->second;
        if (f.group != expected) throw violation(index_path("/fields", i) + "/group", "group membership out of sync");
    }

    // Synonyms and display names, after all canonical names are claimed.
    auto claim_aliases = [&](const std::string& owner, const std::map<std::string, std::string>& displays,
                             const LocalizedList& synonyms, const std::string& path) {
        for (const auto& [locale, name] : displays) {
            claim(name, owner, path + "/displayNames/" + locale, ErrorCode::SynonymCollision);
        }
        for (const auto& [locale, list] : synonyms) {
            for (std::size_t k = 0; k < list.size(); ++k) {
                claim(list[k], owner, index_path(path + "/synonyms/" + locale, k), ErrorCode::SynonymCollision);
            }
        }
    };
    for (std::size_t i = 0; i < s.fields.size(); ++i) {
        claim_aliases(s.fields[i].name, s.fields[i].display_names, s.fields[i].synonyms, index_path("/fields", i));
    }
    for (std::size_t i = 0; i < s.composites.size(); ++i) {
        claim_aliases(s.composites[i].name, s.composites[i].display_names, s.composites[i].synonyms,
                      index_path("/composites", i));
    }
    for (std::size_t i = 0; i < s.groups.size(); ++i) {
        claim_aliases(s.groups[i].id, {}, s.groups[i].synonyms, index_path("/groups", i));
    }

    // Value synonyms must not make two values of one field indistinguishable.
    for (std::size_t i = 0; i < s.fields.size(); ++i) {
        const auto& f = s.fields[i];
        std::map<std::string, std::string> value_of;
        for (const auto& v : f.stats.value_lexicon) value_of.emplace(text::normalize_name(v), v);
        for (const auto& [value, per_locale] : f.value_synonyms) {
            for (const auto& [locale, list] : per_locale) {
                for (std::size_t k = 0; k < list.size(); ++k) {
                    auto [it, inserted] = value_of.emplace(text::normalize_name(list[k]), value);
                    if (!inserted && text::fold(it->second) != text::fold(value)) {
                        throw Error(ErrorCode::SynonymCollision, "'" + list[k] + "' already names value " + it->second,
                                    index_path(index_path("/fields", i) + "/valueSynonyms/" + value + "/" + locale, k));
                    }
                }
            }
        }
    }

    if (s.row_aliases.empty()) throw violation("/rowAliases", "at least one row alias is required");
    for (const auto& [locale, list] : s.row_aliases) {
        if (list.empty()) throw violation("/rowAliases/" + locale, "at least one row alias per locale");
    }
}

auto apply_enrichment(const DataSchema& schema, const EnrichmentCommand& command) -> DataSchema {
    DataSchema next = schema;
    std::visit(Applier{next}, command);
    sync_group_membership(next);
    validate_schema(next);
    return next;
}

}  // namespace tabot
