#include "tabot/patterns.hpp"

#include <algorithm>
#include <set>

#include "tabot/error.hpp"
#include "tabot/text.hpp"

namespace tabot {

namespace detail {
extern const std::string_view kBuiltinCatalog;
}  // namespace detail

using nlohmann::json;

namespace {

auto invalid(const std::string& path, const std::string& what) -> Error {
    return Error(ErrorCode::InvalidCatalog, "catalog " + path + ": " + what, path);
}

template <typename T>
auto read(const json& obj, const char* key, const std::string& path) -> T {
    if (!obj.is_object() || !obj.contains(key)) throw invalid(path + "/" + key, "missing");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw invalid(path + "/" + key, "wrong type");
    }
}

template <typename T>
auto read_or(const json& obj, const char* key, const std::string& path, T fallback) -> T {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
    return read<T>(obj, key, path);
}

auto read_opt_string(const json& obj, const char* key, const std::string& path) -> std::optional<std::string> {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return read<std::string>(obj, key, path);
}

auto types_from_json(const json& j, const std::string& path) -> std::vector<FieldType> {
    std::vector<FieldType> out;
    if (j.is_null()) return out;
    if (!j.is_array()) throw invalid(path, "must be an array of type names");
    for (std::size_t i = 0; i < j.size(); ++i) {
        auto t = j[i].is_string() ? parse_field_type(j[i].get<std::string>()) : std::nullopt;
        if (!t || *t == FieldType::Empty) throw invalid(path + "/" + std::to_string(i), "unknown field type");
        out.push_back(*t);
    }
    return out;
}

auto types_to_json(const std::vector<FieldType>& types) -> json {
    json out = json::array();
    for (auto t : types) out.push_back(field_type_name(t));
    return out;
}

auto applicability_from_json(const json& j, const std::string& path) -> Applicability {
    Applicability a;
    if (j.is_null()) return a;
    if (!j.is_object()) throw invalid(path, "must be an object");
    a.types = types_from_json(j.value("types", json()), path + "/types");
    if (j.contains("categorical")) a.categorical = read<bool>(j, "categorical", path);
    if (j.contains("maxDiversity")) a.max_diversity = read<std::size_t>(j, "maxDiversity", path);
    a.composites = read_or<bool>(j, "composites", path, false);
    a.needs_categorical_field = read_or<bool>(j, "needsCategoricalField", path, false);
    return a;
}

auto applicability_to_json(const Applicability& a) -> json {
    json j = json::object();
    if (!a.types.empty()) j["types"] = types_to_json(a.types);
    if (a.categorical) j["categorical"] = *a.categorical;
    if (a.max_diversity) j["maxDiversity"] = *a.max_diversity;
    if (a.composites) j["composites"] = true;
    if (a.needs_categorical_field) j["needsCategoricalField"] = true;
    return j;
}

auto variant_kind_from(std::string_view s, const std::string& path) -> VariantKind {
    if (s == "none") return VariantKind::None;
    if (s == "operator") return VariantKind::Operator;
    if (s == "aggregate") return VariantKind::Aggregate;
    if (s == "direction") return VariantKind::Direction;
    throw invalid(path, "unknown variant kind '" + std::string(s) + "'");
}

auto variant_kind_name(VariantKind k) -> std::string_view {
    switch (k) {
        case VariantKind::None: return "none";
        case VariantKind::Operator: return "operator";
        case VariantKind::Aggregate: return "aggregate";
        case VariantKind::Direction: return "direction";
    }
    return "none";
}

auto pattern_from_json(const json& j, const std::string& path) -> ConversationPattern {
    ConversationPattern p;
    p.id = read<std::string>(j, "id", path);
    auto category = read<std::string>(j, "category", path);
    auto parsed = parse_pattern_category(category);
    if (!parsed) throw invalid(path + "/category", "unknown category '" + category + "'");
    p.category = *parsed;
    auto binding = read_or<std::string>(j, "binding", path, "none");
    if (binding != "none" && binding != "field") throw invalid(path + "/binding", "must be 'none' or 'field'");
    p.binding = binding == "field" ? Binding::Field : Binding::None;
    p.name_template = read<std::string>(j, "name", path);
    p.applies = applicability_from_json(j.value("applies", json()), path + "/applies");
    p.applies_declared = j.contains("applies");
    p.field_from = read_opt_string(j, "fieldFrom", path);
    p.variant_kind = variant_kind_from(read_or<std::string>(j, "variantKind", path, "none"), path + "/variantKind");
    const auto variants = read_or<json>(j, "variants", path, json::array());
    for (std::size_t i = 0; i < variants.size(); ++i) {
        std::string vpath = path + "/variants/" + std::to_string(i);
        PatternVariant v;
        v.id = read<std::string>(variants[i], "id", vpath);
        v.value = read<std::string>(variants[i], "value", vpath);
        v.forms = read<LocalizedList>(variants[i], "forms", vpath);
        v.types = types_from_json(variants[i].value("types", json()), vpath + "/types");
        p.variants.push_back(std::move(v));
    }
    p.fixed_operator = read_opt_string(j, "fixedOperator", path);
    const auto slots = read_or<json>(j, "slots", path, json::array());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        p.slots.push_back(slot_from_json(slots[i], path + "/slots/" + std::to_string(i)));
    }
    p.templates = read<LocalizedList>(j, "templates", path);
    p.plan_template = read<json>(j, "plan", path);
    p.interpretation = read_or<std::map<std::string, std::string>>(j, "interpretation", path, {});
    return p;
}

auto pattern_to_json(const ConversationPattern& p) -> json {
    json slots = json::array();
    for (const auto& s : p.slots) slots.push_back(slot_to_json(s));
    json variants = json::array();
    for (const auto& v : p.variants) {
        json vj{{"id", v.id}, {"value", v.value}, {"forms", v.forms}};
        if (!v.types.empty()) vj["types"] = types_to_json(v.types);
        variants.push_back(vj);
    }
    json j{{"id", p.id},
           {"category", pattern_category_name(p.category)},
           {"binding", p.binding == Binding::Field ? "field" : "none"},
           {"name", p.name_template},
           {"variantKind", variant_kind_name(p.variant_kind)},
           {"slots", slots},
           {"templates", p.templates},
           {"plan", p.plan_template}};
    if (p.applies_declared) j["applies"] = applicability_to_json(p.applies);
    if (!variants.empty()) j["variants"] = variants;
    if (p.field_from) j["fieldFrom"] = *p.field_from;
    if (p.fixed_operator) j["fixedOperator"] = *p.fixed_operator;
    if (!p.interpretation.empty()) j["interpretation"] = p.interpretation;
    return j;
}

/// Slot placeholders are upper-case tokens: any declared slot name, plus any
/// other all-caps token of two or more characters (which must then be declared).
auto template_placeholders(std::string_view tmpl) -> std::vector<std::string> {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        bool caps = !word.empty() && std::isupper(static_cast<unsigned char>(word[0]));
        for (char c : word) {
            if (!(std::isupper(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)))) caps = false;
        }
        if (caps) out.push_back(word);
        word.clear();
    };
    bool in_brace = false;
    for (char c : tmpl) {
        if (c == '{') in_brace = true;
        if (c == '}') {
            in_brace = false;
            word.clear();
            continue;
        }
        if (in_brace) continue;
        if (std::isalnum(static_cast<unsigned char>(c))) {
            word.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return out;
}

auto collect_plan_refs(const json& j, std::set<std::string>& out) -> void {
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s.starts_with('$')) out.insert(s.substr(1, s.find('.') == std::string::npos ? std::string::npos : s.find('.') - 1));
    } else if (j.is_array() || j.is_object()) {
        for (const auto& v : j) collect_plan_refs(v, out);
    }
}

const std::set<std::string> kKnownEntities{"number", "date", "text", "literalEntity", "fieldEntity",
                                           "operatorEntity", "rowAliasEntity", "categoricalValue"};

}  // namespace

auto operator_from_json(const json& j, const std::string& path) -> Operator {
    Operator op;
    op.id = read<std::string>(j, "id", path);
    op.arity = read_or<int>(j, "arity", path, 1);
    op.applicable_types = types_from_json(j.value("types", json()), path + "/types");
    op.surface_forms = read<LocalizedList>(j, "forms", path);
    op.prompt_forms = read_or<std::map<std::string, std::string>>(j, "prompt", path, {});
    return op;
}

auto operator_to_json(const Operator& op) -> json {
    return {{"id", op.id},
            {"arity", op.arity},
            {"types", types_to_json(op.applicable_types)},
            {"forms", op.surface_forms},
            {"prompt", op.prompt_forms}};
}

auto slot_from_json(const json& j, const std::string& path) -> SlotSpec {
    SlotSpec s;
    s.name = read<std::string>(j, "name", path);
    s.entity = read<std::string>(j, "entity", path);
    s.required = read_or<bool>(j, "required", path, true);
    s.constraints.typed_by = read_opt_string(j, "typedBy", path);
    s.constraints.same_field_as = read_opt_string(j, "sameFieldAs", path);
    s.constraints.distinct_from = read_opt_string(j, "distinctFrom", path);
    if (j.contains("field")) s.constraints.field = applicability_from_json(j.at("field"), path + "/field");
    if (j.contains("maxDiversity")) s.constraints.max_diversity = read<std::size_t>(j, "maxDiversity", path);
    s.constraints.positive_integer = read_or<bool>(j, "positiveInteger", path, false);
    if (j.contains("default")) s.default_value = j.at("default");
    s.prompt = read_or<std::map<std::string, std::string>>(j, "prompt", path, {});
    return s;
}

auto slot_to_json(const SlotSpec& s) -> json {
    json j{{"name", s.name}, {"entity", s.entity}, {"required", s.required}, {"prompt", s.prompt}};
    const auto& c = s.constraints;
    if (c.typed_by) j["typedBy"] = *c.typed_by;
    if (c.same_field_as) j["sameFieldAs"] = *c.same_field_as;
    if (c.distinct_from) j["distinctFrom"] = *c.distinct_from;
    if (c.field) j["field"] = applicability_to_json(*c.field);
    if (c.max_diversity) j["maxDiversity"] = *c.max_diversity;
    if (c.positive_integer) j["positiveInteger"] = true;
    if (s.default_value) j["default"] = *s.default_value;
    return j;
}

auto pattern_category_name(PatternCategory c) -> std::string_view {
    switch (c) {
        case PatternCategory::DatasetLevel: return "DatasetLevel";
        case PatternCategory::FieldLevel: return "FieldLevel";
        case PatternCategory::CellValueLevel: return "CellValueLevel";
        case PatternCategory::Aggregation: return "Aggregation";
        case PatternCategory::Meta: return "Meta";
    }
    return "DatasetLevel";
}

auto parse_pattern_category(std::string_view s) -> std::optional<PatternCategory> {
    for (auto c : {PatternCategory::DatasetLevel, PatternCategory::FieldLevel, PatternCategory::CellValueLevel,
                   PatternCategory::Aggregation, PatternCategory::Meta}) {
        if (pattern_category_name(c) == s) return c;
    }
    return std::nullopt;
}

auto Operator::applies_to(FieldType t) const -> bool {
    return std::find(applicable_types.begin(), applicable_types.end(), t) != applicable_types.end();
}

auto ConversationPattern::slot(std::string_view name) const -> const SlotSpec* {
    for (const auto& s : slots) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

auto Catalog::op(std::string_view id) const -> const Operator* {
    for (const auto& o : operators) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

auto Catalog::pattern(std::string_view id) const -> const ConversationPattern* {
    for (const auto& p : patterns) {
        if (p.id == id) return &p;
    }
    return nullptr;
}

auto validate_catalog(const Catalog& c) -> void {
    std::set<std::string> op_ids;
    std::map<std::string, std::map<std::string, std::string>> form_owner;  // locale -> form key -> op
    for (std::size_t i = 0; i < c.operators.size(); ++i) {
        const auto& op = c.operators[i];
        std::string path = "/operators/" + std::to_string(i);
        if (!op_ids.insert(op.id).second) throw invalid(path, "duplicate operator id '" + op.id + "'");
        if (op.arity < 1 || op.arity > 2) throw invalid(path + "/arity", "arity must be 1 or 2");
        if (op.applicable_types.empty()) throw invalid(path + "/types", "operator applies to no type");
        if (!op.surface_forms.contains("en") || op.surface_forms.at("en").empty()) {
            throw invalid(path + "/forms", "no surface forms for the primary locale");
        }
        for (const auto& [locale, forms] : op.surface_forms) {
            for (const auto& form : forms) {
                auto key = text::join(text::phrase_keys(form), " ");
                auto [it, inserted] = form_owner[locale].emplace(key, op.id);
                if (!inserted && it->second != op.id) {
                    throw invalid(path + "/forms/" + locale, "'" + form + "' is also a form of " + it->second);
                }
            }
        }
    }

    std::set<std::string> pattern_ids;
    for (std::size_t i = 0; i < c.patterns.size(); ++i) {
        const auto& p = c.patterns[i];
        std::string path = "/patterns/" + std::to_string(i);
        if (!pattern_ids.insert(p.id).second) throw invalid(path, "duplicate pattern id '" + p.id + "'");

        std::set<std::string> slot_names;
        for (std::size_t s = 0; s < p.slots.size(); ++s) {
            const auto& slot = p.slots[s];
            std::string spath = path + "/slots/" + std::to_string(s);
            if (!slot_names.insert(slot.name).second) throw invalid(spath, "duplicate slot '" + slot.name + "'");
            if (slot.name.empty() || slot.name == "ROWS") throw invalid(spath + "/name", "reserved slot name");
            bool known = kKnownEntities.contains(slot.entity) || slot.entity.ends_with("_value");
            if (!known) throw invalid(spath + "/entity", "unknown entity reference '" + slot.entity + "'");
            for (const auto* ref : {&slot.constraints.typed_by, &slot.constraints.same_field_as,
                                    &slot.constraints.distinct_from}) {
                if (*ref && *ref != "FIELD" && !p.slot(**ref)) {
                    throw invalid(spath, "constraint references unknown slot '" + **ref + "'");
                }
            }
            if (slot.constraints.typed_by == "FIELD" && p.binding != Binding::Field && !p.slot("FIELD")) {
                throw invalid(spath + "/typedBy", "FIELD is only defined for field-bound patterns");
            }
        }
        if (p.binding == Binding::Field && p.slot("FIELD")) {
            throw invalid(path + "/slots", "field-bound patterns supply FIELD themselves");
        }
        if (p.field_from && (p.binding != Binding::Field || !p.slot(*p.field_from))) {
            throw invalid(path + "/fieldFrom", "must name a slot of a field-bound pattern");
        }
        if (p.variant_kind == VariantKind::Operator && p.binding != Binding::Field) {
            throw invalid(path + "/variantKind", "operator variants need a field binding");
        }
        if ((p.variant_kind == VariantKind::Aggregate || p.variant_kind == VariantKind::Direction) == p.variants.empty()) {
            throw invalid(path + "/variants", "variants must be listed exactly for aggregate/direction patterns");
        }
        if (p.fixed_operator) {
            const Operator* op = c.op(*p.fixed_operator);
            if (op == nullptr) throw invalid(path + "/fixedOperator", "unknown operator");
            // A fixed operator must accept every type the pattern admits.
            if (p.applies.types.empty() && !p.applies.composites) {
                throw invalid(path + "/applies", "a fixed operator needs an explicit type list");
            }
            for (auto t : p.applies.types) {
                if (!op->applies_to(t)) {
                    throw invalid(path + "/fixedOperator",
                                  op->id + " does not apply to " + std::string(field_type_name(t)) + " fields");
                }
            }
        }

        if (!p.templates.contains("en") || p.templates.at("en").size() < 5) {
            throw invalid(path + "/templates/en", "at least five templates are required");
        }
        for (const auto& [locale, list] : p.templates) {
            for (std::size_t t = 0; t < list.size(); ++t) {
                const auto& tmpl = list[t];
                std::string tpath = path + "/templates/" + locale + "/" + std::to_string(t);
                for (const auto& ph : template_placeholders(tmpl)) {
                    if (ph.size() >= 2 && !slot_names.contains(ph)) {
                        throw invalid(tpath, "placeholder " + ph + " is not a declared slot");
                    }
                }
                for (auto open = tmpl.find('{'); open != std::string::npos; open = tmpl.find('{', open + 1)) {
                    auto close = tmpl.find('}', open);
                    std::string name = tmpl.substr(open + 1, close == std::string::npos ? std::string::npos : close - open - 1);
                    if (name != "FIELD" && name != "OPERATOR" && name != "VARIANT" && name != "ROWS") {
                        throw invalid(tpath, "unknown placeholder {" + name + "}");
                    }
                }
                if (tmpl.find("{FIELD}") != std::string::npos && p.binding != Binding::Field) {
                    throw invalid(tpath, "{FIELD} in a pattern without a field binding");
                }
                if (tmpl.find("{OPERATOR}") != std::string::npos && p.variant_kind != VariantKind::Operator &&
                    !p.fixed_operator) {
                    throw invalid(tpath, "{OPERATOR} in a pattern without operators");
                }
                if (tmpl.find("{VARIANT}") != std::string::npos && p.variants.empty()) {
                    throw invalid(tpath, "{VARIANT} in a pattern without variants");
                }
            }
        }

        std::set<std::string> refs;
        collect_plan_refs(p.plan_template, refs);
        for (const auto& ref : refs) {
            bool ok = slot_names.contains(ref) || (ref == "FIELD" && p.binding == Binding::Field) ||
                      (ref == "OPERATOR" && p.variant_kind == VariantKind::Operator) ||
                      (ref == "VARIANT" && !p.variants.empty());
            if (!ok) throw invalid(path + "/plan", "plan references unknown slot $" + ref);
        }
        for (const auto& slot : p.slots) {
            if (slot.required && !refs.contains(slot.name)) {
                throw invalid(path + "/plan", "required slot " + slot.name + " does not appear in the plan");
            }
        }
        if (!p.plan_template.is_object() || !p.plan_template.contains("projection")) {
            throw invalid(path + "/plan", "plan template needs a projection");
        }
    }
}

auto load_catalog(const json& doc) -> Catalog {
    if (!doc.is_object()) throw invalid("", "catalog document must be an object");
    Catalog c;
    c.version = read_or<int>(doc, "catalogVersion", "", 1);
    const auto ops = read_or<json>(doc, "operators", "", json::array());
    for (std::size_t i = 0; i < ops.size(); ++i) {
        c.operators.push_back(operator_from_json(ops[i], "/operators/" + std::to_string(i)));
    }
    const auto patterns = read_or<json>(doc, "patterns", "", json::array());
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        c.patterns.push_back(pattern_from_json(patterns[i], "/patterns/" + std::to_string(i)));
    }
    validate_catalog(c);
    return c;
}

auto save_catalog(const Catalog& c) -> json {
    json ops = json::array();
    for (const auto& op : c.operators) ops.push_back(operator_to_json(op));
    json patterns = json::array();
    for (const auto& p : c.patterns) patterns.push_back(pattern_to_json(p));
    return {{"catalogVersion", c.version}, {"operators", ops}, {"patterns", patterns}};
}

auto merge_catalog(const Catalog& base, const json& extension) -> Catalog {
    if (!extension.is_object()) throw invalid("", "extension document must be an object");
    Catalog merged = base;
    const auto ops = read_or<json>(extension, "operators", "", json::array());
    for (std::size_t i = 0; i < ops.size(); ++i) {
        auto op = operator_from_json(ops[i], "/operators/" + std::to_string(i));
        auto it = std::find_if(merged.operators.begin(), merged.operators.end(),
                               [&](const Operator& o) { return o.id == op.id; });
        if (it != merged.operators.end()) {
            *it = std::move(op);
        } else {
            merged.operators.push_back(std::move(op));
        }
    }
    const auto patterns = read_or<json>(extension, "patterns", "", json::array());
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        auto p = pattern_from_json(patterns[i], "/patterns/" + std::to_string(i));
        auto it = std::find_if(merged.patterns.begin(), merged.patterns.end(),
                               [&](const ConversationPattern& x) { return x.id == p.id; });
        if (it != merged.patterns.end()) {
            *it = std::move(p);
        } else {
            merged.patterns.push_back(std::move(p));
        }
    }
    validate_catalog(merged);
    return merged;
}

auto catalog() -> const Catalog& {
    static const Catalog builtin = load_catalog(json::parse(detail::kBuiltinCatalog));
    return builtin;
}

auto field_view(const DataSchema& schema, std::string_view name) -> std::optional<FieldView> {
    if (const auto* f = schema.field(name)) return FieldView{f->name, f->type, &f->stats, false, false};
    if (const auto* c = schema.composite(name)) return FieldView{c->name, FieldType::Text, nullptr, true, false};
    if (const auto* g = schema.group(name)) {
        const auto& rep = g->default_member ? *g->default_member : g->members.front();
        if (const auto* f = schema.field(rep)) return FieldView{g->id, f->type, &f->stats, false, true};
    }
    return std::nullopt;
}

auto field_views(const DataSchema& schema) -> std::vector<FieldView> {
    std::vector<FieldView> out;
    for (const auto& f : schema.fields) out.push_back(*field_view(schema, f.name));
    for (const auto& c : schema.composites) out.push_back(*field_view(schema, c.name));
    for (const auto& g : schema.groups) {
        if (auto v = field_view(schema, g.id)) out.push_back(*v);
    }
    return out;
}

auto satisfies(const Applicability& a, const FieldView& field, const DataSchema& schema) -> bool {
    if (field.type == FieldType::Empty) return false;
    if (field.is_composite) {
        if (!a.composites || a.categorical == true) return false;
    } else if (!a.types.empty() && std::find(a.types.begin(), a.types.end(), field.type) == a.types.end()) {
        return false;
    }
    bool categorical = field.stats != nullptr && field.stats->is_categorical;
    if (a.categorical && *a.categorical != categorical) return false;
    if (a.max_diversity && (field.stats == nullptr || field.stats->diversity > *a.max_diversity)) return false;
    if (a.needs_categorical_field) {
        bool any = std::any_of(schema.fields.begin(), schema.fields.end(),
                               [](const FieldDescriptor& f) { return f.stats.is_categorical; });
        if (!any) return false;
    }
    return true;
}

auto applicable_patterns(const std::vector<ConversationPattern>& patterns, const FieldView& field,
                         const DataSchema& schema) -> std::vector<const ConversationPattern*> {
    std::vector<const ConversationPattern*> out;
    for (const auto& p : patterns) {
        if (p.binding == Binding::Field && satisfies(p.applies, field, schema)) out.push_back(&p);
    }
    return out;
}

auto operator_variants(const Catalog& catalog, const FieldView& field) -> std::vector<const Operator*> {
    std::vector<const Operator*> out;
    for (const auto& op : catalog.operators) {
        if (op.arity != 1 || !op.applies_to(field.type)) continue;
        // Composite values only support equality.
        if (field.is_composite && op.id != "equals") continue;
        out.push_back(&op);
    }
    return out;
}

}  // namespace tabot
