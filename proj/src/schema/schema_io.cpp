#include <cstdio>

#include "tabot/error.hpp"
#include "tabot/parse.hpp"
#include "tabot/schema.hpp"

namespace tabot {

using nlohmann::json;

namespace {

auto integrity(const std::string& path, const std::string& what) -> Error {
    return Error(ErrorCode::IntegrityViolation, path + ": " + what, path);
}

/// Typed field access that reports the document path on failure.
template <typename T>
auto get(const json& obj, const std::string& key, const std::string& path) -> T {
    if (!obj.is_object() || !obj.contains(key)) throw integrity(path + "/" + key, "missing");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw integrity(path + "/" + key, "wrong type");
    }
}

auto opt_string(const json& obj, const std::string& key, const std::string& path) -> std::optional<std::string> {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    if (!obj.at(key).is_string()) throw integrity(path + "/" + key, "wrong type");
    return obj.at(key).get<std::string>();
}

template <typename T>
auto get_or(const json& obj, const std::string& key, const std::string& path, T fallback) -> T {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
    return get<T>(obj, key, path);
}

auto stats_to_json(const FieldStats& s) -> json {
    return {{"diversity", s.diversity},
            {"missingCount", s.missing_count},
            {"categorical", s.is_categorical},
            {"valueLexicon", s.value_lexicon}};
}

auto field_to_json(const FieldDescriptor& f) -> json {
    json j{{"name", f.name},
           {"type", field_type_name(f.type)},
           {"displayNames", f.display_names},
           {"synonyms", f.synonyms},
           {"stats", stats_to_json(f.stats)},
           {"valueSynonyms", f.value_synonyms}};
    j["group"] = f.group ? json(*f.group) : json(nullptr);
    return j;
}

auto field_from_json(const json& j, const std::string& path) -> FieldDescriptor {
    FieldDescriptor f;
    f.name = get<std::string>(j, "name", path);
    auto type_name = get<std::string>(j, "type", path);
    auto type = parse_field_type(type_name);
    if (!type) throw integrity(path + "/type", "unknown type '" + type_name + "'");
    f.type = *type;
    f.display_names = get_or<std::map<std::string, std::string>>(j, "displayNames", path, {});
    f.synonyms = get_or<LocalizedList>(j, "synonyms", path, {});
    f.value_synonyms = get_or<std::map<std::string, LocalizedList>>(j, "valueSynonyms", path, {});
    f.group = opt_string(j, "group", path);
    const std::string spath = path + "/stats";
    const json& s = j.contains("stats") ? j.at("stats") : throw integrity(spath, "missing");
    f.stats.inferred_type = f.type;
    f.stats.diversity = get<std::size_t>(s, "diversity", spath);
    f.stats.missing_count = get<std::size_t>(s, "missingCount", spath);
    f.stats.is_categorical = get<bool>(s, "categorical", spath);
    f.stats.value_lexicon = get_or<std::vector<std::string>>(s, "valueLexicon", spath, {});
    return f;
}

}  // namespace

auto format_timestamp(std::int64_t unix_seconds) -> std::string {
    return format_datetime(Datetime{unix_seconds}) + "Z";
}

auto parse_timestamp(std::string_view iso) -> std::optional<std::int64_t> {
    if (iso.ends_with('Z')) iso.remove_suffix(1);
    auto dt = parse::iso_datetime(iso);
    if (!dt) return std::nullopt;
    return dt->seconds;
}

auto save_schema(const DataSchema& s) -> json {
    json fields = json::array();
    for (const auto& f : s.fields) fields.push_back(field_to_json(f));
    json composites = json::array();
    for (const auto& c : s.composites) {
        composites.push_back({{"name", c.name},
                              {"parts", c.parts},
                              {"separator", c.separator},
                              {"displayNames", c.display_names},
                              {"synonyms", c.synonyms}});
    }
    json groups = json::array();
    for (const auto& g : s.groups) {
        groups.push_back({{"id", g.id},
                          {"members", g.members},
                          {"default", g.default_member ? json(*g.default_member) : json(nullptr)},
                          {"synonyms", g.synonyms}});
    }
    json source{{"origin", s.source.origin}};
    source["importedAt"] = s.source.imported_at ? json(format_timestamp(*s.source.imported_at)) : json(nullptr);
    return {{"formatVersion", kSchemaFormatVersion},
            {"language", s.language},
            {"source", source},
            {"rowAliases", s.row_aliases},
            {"fields", fields},
            {"composites", composites},
            {"groups", groups}};
}

auto load_schema(const json& doc) -> DataSchema {
    if (!doc.is_object()) throw integrity("", "schema document must be an object");
    if (!doc.contains("formatVersion")) throw integrity("/formatVersion", "missing");
    const json& version = doc.at("formatVersion");
    if (!version.is_number_integer() || version.get<int>() != kSchemaFormatVersion) {
        throw Error(ErrorCode::SchemaVersionMismatch,
                    "unsupported schema format version " + version.dump() + "; expected " +
                        std::to_string(kSchemaFormatVersion),
                    "/formatVersion");
    }
    DataSchema s;
    s.language = get<std::string>(doc, "language", "");
    if (doc.contains("source")) {
        s.source.origin = get_or<std::string>(doc.at("source"), "origin", "/source", "");
        auto at = opt_string(doc.at("source"), "importedAt", "/source");
        if (at) {
            s.source.imported_at = parse_timestamp(*at);
            if (!s.source.imported_at) throw integrity("/source/importedAt", "not an ISO timestamp");
        }
    }
    s.row_aliases = get<LocalizedList>(doc, "rowAliases", "");
    const auto fields = get<json>(doc, "fields", "");
    if (!fields.is_array()) throw integrity("/fields", "must be an array");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        s.fields.push_back(field_from_json(fields[i], "/fields/" + std::to_string(i)));
    }
    const auto composites = get_or<json>(doc, "composites", "", json::array());
    for (std::size_t i = 0; i < composites.size(); ++i) {
        std::string path = "/composites/" + std::to_string(i);
        CompositeField c;
        c.name = get<std::string>(composites[i], "name", path);
        c.parts = get<std::vector<std::string>>(composites[i], "parts", path);
        c.separator = get_or<std::string>(composites[i], "separator", path, " ");
        c.display_names = get_or<std::map<std::string, std::string>>(composites[i], "displayNames", path, {});
        c.synonyms = get_or<LocalizedList>(composites[i], "synonyms", path, {});
        s.composites.push_back(std::move(c));
    }
    const auto groups = get_or<json>(doc, "groups", "", json::array());
    for (std::size_t i = 0; i < groups.size(); ++i) {
        std::string path = "/groups/" + std::to_string(i);
        FieldGroup g;
        g.id = get<std::string>(groups[i], "id", path);
        g.members = get<std::vector<std::string>>(groups[i], "members", path);
        g.default_member = opt_string(groups[i], "default", path);
        g.synonyms = get_or<LocalizedList>(groups[i], "synonyms", path, {});
        s.groups.push_back(std::move(g));
    }
    validate_schema(s);
    return s;
}

namespace {

auto locale_of(const json& j) -> std::string { return get_or<std::string>(j, "locale", "", ""); }

}  // namespace

auto command_from_json(const json& j) -> EnrichmentCommand {
    if (!j.is_object() || !j.contains("op") || !j.at("op").is_string()) {
        throw Error(ErrorCode::InvalidCommand, "command needs an 'op' string", "/op");
    }
    const auto op = j.at("op").get<std::string>();
    try {
        if (op == "addSynonym") {
            return enrich::AddSynonym{get<std::string>(j, "field", ""), locale_of(j), get<std::string>(j, "synonym", "")};
        }
        if (op == "removeSynonym") {
            return enrich::RemoveSynonym{get<std::string>(j, "field", ""), locale_of(j),
                                         get<std::string>(j, "synonym", "")};
        }
        if (op == "setDisplayName") {
            return enrich::SetDisplayName{get<std::string>(j, "field", ""), locale_of(j),
                                          get<std::string>(j, "name", "")};
        }
        if (op == "addValueSynonym") {
            return enrich::AddValueSynonym{get<std::string>(j, "field", ""), get<std::string>(j, "value", ""),
                                           locale_of(j), get<std::string>(j, "synonym", "")};
        }
        if (op == "removeValueSynonym") {
            return enrich::RemoveValueSynonym{get<std::string>(j, "field", ""), get<std::string>(j, "value", ""),
                                              locale_of(j), get<std::string>(j, "synonym", "")};
        }
        if (op == "addComposite") {
            return enrich::AddComposite{get<std::string>(j, "name", ""), get<std::vector<std::string>>(j, "parts", ""),
                                        get_or<std::string>(j, "separator", "", " ")};
        }
        if (op == "removeComposite") return enrich::RemoveComposite{get<std::string>(j, "name", "")};
        if (op == "addGroup") {
            return enrich::AddGroup{get<std::string>(j, "id", ""), get<std::vector<std::string>>(j, "members", ""),
                                    opt_string(j, "default", "")};
        }
        if (op == "removeGroup") return enrich::RemoveGroup{get<std::string>(j, "id", "")};
        if (op == "addRowAlias") return enrich::AddRowAlias{locale_of(j), get<std::string>(j, "alias", "")};
        if (op == "removeRowAlias") return enrich::RemoveRowAlias{locale_of(j), get<std::string>(j, "alias", "")};
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidCommand, std::string("bad '") + op + "' command: " + e.what(), e.detail());
    }
    throw Error(ErrorCode::InvalidCommand, "unknown command op '" + op + "'", "/op");
}

auto command_to_json(const EnrichmentCommand& command) -> json {
    auto with_locale = [](json j, const std::string& locale) {
        if (!locale.empty()) j["locale"] = locale;
        return j;
    };
    return std::visit(
        [&](const auto& c) -> json {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, enrich::AddSynonym>) {
                return with_locale({{"op", "addSynonym"}, {"field", c.field}, {"synonym", c.synonym}}, c.locale);
            } else if constexpr (std::is_same_v<T, enrich::RemoveSynonym>) {
                return with_locale({{"op", "removeSynonym"}, {"field", c.field}, {"synonym", c.synonym}}, c.locale);
            } else if constexpr (std::is_same_v<T, enrich::SetDisplayName>) {
                return with_locale({{"op", "setDisplayName"}, {"field", c.field}, {"name", c.name}}, c.locale);
            } else if constexpr (std::is_same_v<T, enrich::AddValueSynonym>) {
                return with_locale(
                    {{"op", "addValueSynonym"}, {"field", c.field}, {"value", c.value}, {"synonym", c.synonym}},
                    c.locale);
            } else if constexpr (std::is_same_v<T, enrich::RemoveValueSynonym>) {
                return with_locale(
                    {{"op", "removeValueSynonym"}, {"field", c.field}, {"value", c.value}, {"synonym", c.synonym}},
                    c.locale);
            } else if constexpr (std::is_same_v<T, enrich::AddComposite>) {
                return {{"op", "addComposite"}, {"name", c.name}, {"parts", c.parts}, {"separator", c.separator}};
            } else if constexpr (std::is_same_v<T, enrich::RemoveComposite>) {
                return {{"op", "removeComposite"}, {"name", c.name}};
            } else if constexpr (std::is_same_v<T, enrich::AddGroup>) {
                json j{{"op", "addGroup"}, {"id", c.id}, {"members", c.members}};
                if (c.default_member) j["default"] = *c.default_member;
                return j;
            } else if constexpr (std::is_same_v<T, enrich::RemoveGroup>) {
                return {{"op", "removeGroup"}, {"id", c.id}};
            } else if constexpr (std::is_same_v<T, enrich::AddRowAlias>) {
                return with_locale({{"op", "addRowAlias"}, {"alias", c.alias}}, c.locale);
            } else {
                return with_locale({{"op", "removeRowAlias"}, {"alias", c.alias}}, c.locale);
            }
        },
        command);
}

}  // namespace tabot
