#include "tabot/generator.hpp"

#include <algorithm>
#include <set>

#include "tabot/error.hpp"
#include "tabot/text.hpp"

namespace tabot {

using nlohmann::json;

namespace {

/// One expanded instantiation: a pattern, optionally over a field, optionally
/// with an operator or variant.
struct Instance {
    const ConversationPattern* pattern = nullptr;
    std::optional<FieldView> field;
    const Operator* op = nullptr;
    const PatternVariant* variant = nullptr;
};

auto replace_all(std::string s, std::string_view from, std::string_view to) -> std::string {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

auto forms_in(const LocalizedList& forms, const std::string& locale) -> std::vector<std::string> {
    if (auto it = forms.find(locale); it != forms.end() && !it->second.empty()) return it->second;
    if (auto it = forms.find("en"); it != forms.end()) return it->second;
    return {};
}

auto variant_applies(const PatternVariant& v, const FieldView& field) -> bool {
    return v.types.empty() || std::find(v.types.begin(), v.types.end(), field.type) != v.types.end();
}

/// Field-valued slot constraints of a generic intent: the pattern predicate,
/// narrowed to the variant's types.
auto field_constraint(const ConversationPattern& p, const PatternVariant* v) -> Applicability {
    Applicability a = p.applies;
    if (v != nullptr && !v->types.empty()) {
        if (a.types.empty()) {
            a.types = v->types;
        } else {
            std::vector<FieldType> narrowed;
            for (auto t : a.types) {
                if (std::find(v->types.begin(), v->types.end(), t) != v->types.end()) narrowed.push_back(t);
            }
            a.types = narrowed;
        }
    }
    return a;
}

auto has_applicable_field(const ConversationPattern& p, const DataSchema& schema) -> bool {
    if (!p.applies_declared) return true;
    auto views = field_views(schema);
    return std::any_of(views.begin(), views.end(), [&](const FieldView& v) { return satisfies(p.applies, v, schema); });
}

auto expanded_instances(const DataSchema& schema, const Catalog& catalog) -> std::vector<Instance> {
    std::vector<Instance> out;
    const auto views = field_views(schema);
    for (const auto& p : catalog.patterns) {
        if (p.binding == Binding::None) {
            if (has_applicable_field(p, schema)) out.push_back({&p, std::nullopt, nullptr, nullptr});
            continue;
        }
        for (const auto& view : views) {
            if (!satisfies(p.applies, view, schema)) continue;
            // Categorical-value slots need the field's own value entity.
            if (p.field_from && (view.is_group || view.is_composite)) continue;
            switch (p.variant_kind) {
                case VariantKind::Operator:
                    for (const auto* op : operator_variants(catalog, view)) out.push_back({&p, view, op, nullptr});
                    break;
                case VariantKind::Aggregate:
                case VariantKind::Direction:
                    for (const auto& v : p.variants) {
                        if (variant_applies(v, view)) out.push_back({&p, view, nullptr, &v});
                    }
                    break;
                case VariantKind::None:
                    out.push_back({&p, view, p.fixed_operator ? catalog.op(*p.fixed_operator) : nullptr, nullptr});
                    break;
            }
        }
    }
    return out;
}

auto field_forms(const DataSchema& schema, const FieldView& view, const std::string& locale)
    -> std::vector<std::string> {
    auto collect = [&](std::string_view canonical, const std::map<std::string, std::string>& displays,
                       const LocalizedList& synonyms) {
        std::vector<std::string> out;
        auto add = [&](const std::string& s) {
            if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
        };
        if (auto it = displays.find(locale); it != displays.end()) add(it->second);
        add(replace_all(std::string(canonical), "_", " "));
        if (auto it = synonyms.find(locale); it != synonyms.end()) {
            for (const auto& s : it->second) add(s);
        }
        return out;
    };
    if (view.is_composite) {
        const auto* c = schema.composite(view.name);
        return collect(c->name, c->display_names, c->synonyms);
    }
    if (view.is_group) {
        const auto* g = schema.group(view.name);
        return collect(g->id, {}, g->synonyms);
    }
    const auto* f = schema.field(view.name);
    return collect(f->name, f->display_names, f->synonyms);
}

auto primary_row_alias(const DataSchema& schema, const std::string& locale) -> std::string {
    if (auto it = schema.row_aliases.find(locale); it != schema.row_aliases.end() && !it->second.empty()) {
        return it->second.front();
    }
    if (auto it = schema.row_aliases.find(schema.language); it != schema.row_aliases.end() && !it->second.empty()) {
        return it->second.front();
    }
    return "rows";
}

/// Expands every {PLACEHOLDER} with each of its forms (cartesian product).
auto expand_templates(const std::vector<std::string>& templates,
                      const std::vector<std::pair<std::string, std::vector<std::string>>>& substitutions)
    -> std::vector<std::string> {
    std::vector<std::string> current = templates;
    for (const auto& [placeholder, forms] : substitutions) {
        std::vector<std::string> next;
        for (const auto& s : current) {
            if (s.find(placeholder) == std::string::npos) {
                next.push_back(s);
                continue;
            }
            for (const auto& form : forms) next.push_back(replace_all(s, placeholder, form));
        }
        current = std::move(next);
    }
    std::vector<std::string> unique;
    std::set<std::string> seen;
    for (auto& s : current) {
        if (seen.insert(s).second) unique.push_back(std::move(s));
    }
    return unique;
}

auto uses_placeholder(const ConversationPattern& p, std::string_view placeholder) -> bool {
    for (const auto& [locale, list] : p.templates) {
        for (const auto& t : list) {
            if (t.find(placeholder) != std::string::npos) return true;
        }
    }
    return false;
}

auto to_intent_slot(const SlotSpec& spec) -> IntentSlot {
    IntentSlot slot;
    static_cast<SlotSpec&>(slot) = spec;
    slot.fragment = spec.name;
    return slot;
}

auto specialize_entity(const ConversationPattern& p, const SlotSpec& spec, const FieldView& view) -> std::string {
    if (spec.entity == kLiteralEntity && spec.constraints.typed_by == "FIELD") {
        if (is_numeric(view.type)) return std::string(kNumberEntity);
        if (is_temporal(view.type)) return std::string(kDateEntity);
        return spec.entity;
    }
    if (spec.entity == kCategoricalValueRef && p.field_from &&
        (spec.name == *p.field_from || spec.constraints.same_field_as == *p.field_from)) {
        return categorical_entity_name(view.name);
    }
    return spec.entity;
}

auto expanded_intent(const Instance& inst, const DataSchema& schema, const std::vector<std::string>& locales)
    -> Intent {
    const auto& p = *inst.pattern;
    Intent intent;
    intent.source_pattern = p.id;
    intent.category = p.category;
    intent.plan_template = p.plan_template;
    intent.interpretation = p.interpretation;

    std::string name = p.name_template;
    if (inst.field) {
        name = replace_all(name, "{field}", inst.field->name);
        intent.bound_field = inst.field->name;
        intent.fixed["FIELD"] = inst.field->name;
    }
    if (inst.op != nullptr) {
        name = replace_all(name, "{operator}", inst.op->id);
        intent.fixed["OPERATOR"] = inst.op->id;
    }
    if (inst.variant != nullptr) {
        name = replace_all(name, "{variant}", inst.variant->id);
        intent.fixed["VARIANT"] = inst.variant->value;
    }
    intent.name = name;

    for (const auto& spec : p.slots) {
        IntentSlot slot = to_intent_slot(spec);
        if (inst.field) slot.entity = specialize_entity(p, spec, *inst.field);
        intent.slots.push_back(std::move(slot));
    }

    if (inst.field && uses_placeholder(p, "{FIELD}")) intent.spelled.push_back("FIELD");
    if (inst.op != nullptr && uses_placeholder(p, "{OPERATOR}")) intent.spelled.push_back("OPERATOR");

    for (const auto& locale : locales) {
        auto templates = forms_in(p.templates, locale);
        std::vector<std::pair<std::string, std::vector<std::string>>> subs;
        subs.push_back({"{ROWS}", {primary_row_alias(schema, locale)}});
        if (inst.field) subs.push_back({"{FIELD}", field_forms(schema, *inst.field, locale)});
        if (inst.op != nullptr) subs.push_back({"{OPERATOR}", forms_in(inst.op->surface_forms, locale)});
        if (inst.variant != nullptr) subs.push_back({"{VARIANT}", forms_in(inst.variant->forms, locale)});
        intent.training_sentences[locale] = expand_templates(templates, subs);
    }
    return intent;
}

auto generic_intents(const ConversationPattern& p, const Catalog& catalog, const DataSchema& schema,
                     const std::vector<std::string>& locales) -> std::vector<Intent> {
    std::vector<const PatternVariant*> variants;
    if (p.variants.empty()) {
        variants.push_back(nullptr);
    } else {
        for (const auto& v : p.variants) variants.push_back(&v);
    }
    std::vector<Intent> out;
    for (const auto* variant : variants) {
        Intent intent;
        intent.source_pattern = p.id;
        intent.category = p.category;
        intent.plan_template = p.plan_template;
        intent.interpretation = p.interpretation;
        intent.field_from = p.field_from;
        std::string name = replace_all(replace_all(p.name_template, "{field}", "field"), "{operator}", "operator");
        if (variant != nullptr) {
            name = replace_all(name, "{variant}", variant->id);
            intent.fixed["VARIANT"] = variant->value;
        }
        intent.name = name;

        if (p.binding == Binding::Field && !p.field_from) {
            IntentSlot field;
            field.name = field.fragment = "FIELD";
            field.entity = std::string(kFieldEntity);
            field.constraints.field = field_constraint(p, variant);
            field.prompt["en"] = "Which field do you mean?";
            intent.slots.push_back(std::move(field));
        }
        if (p.variant_kind == VariantKind::Operator) {
            IntentSlot op;
            op.name = op.fragment = "OPERATOR";
            op.entity = std::string(kOperatorEntity);
            op.prompt["en"] = "How should {field} be compared?";
            intent.slots.push_back(std::move(op));
        }
        const Operator* fixed_op = p.fixed_operator ? catalog.op(*p.fixed_operator) : nullptr;
        if (fixed_op != nullptr) {
            intent.fixed["OPERATOR"] = fixed_op->id;
            if (uses_placeholder(p, "{OPERATOR}")) intent.spelled.push_back("OPERATOR");
        }
        for (const auto& spec : p.slots) intent.slots.push_back(to_intent_slot(spec));

        for (const auto& locale : locales) {
            std::vector<std::pair<std::string, std::vector<std::string>>> subs;
            subs.push_back({"{ROWS}", {primary_row_alias(schema, locale)}});
            subs.push_back({"{FIELD}", {"FIELD"}});
            if (fixed_op != nullptr) {
                subs.push_back({"{OPERATOR}", forms_in(fixed_op->surface_forms, locale)});
            } else {
                subs.push_back({"{OPERATOR}", {"OPERATOR"}});
            }
            if (variant != nullptr) subs.push_back({"{VARIANT}", forms_in(variant->forms, locale)});
            intent.training_sentences[locale] = expand_templates(forms_in(p.templates, locale), subs);
        }
        out.push_back(std::move(intent));
    }
    return out;
}

auto catalog_locales(const Catalog& catalog) -> std::vector<std::string> {
    std::set<std::string> locales;
    for (const auto& p : catalog.patterns) {
        for (const auto& [locale, list] : p.templates) locales.insert(locale);
    }
    return {locales.begin(), locales.end()};
}

auto build_entities(const DataSchema& schema, const Catalog& catalog) -> std::vector<EntityDef> {
    std::vector<EntityDef> out;
    out.push_back({std::string(kNumberEntity), EntityKind::SystemNumber, {}, {}});
    out.push_back({std::string(kDateEntity), EntityKind::SystemDate, {}, {}});
    out.push_back({std::string(kTextEntity), EntityKind::SystemText, {}, {}});
    out.push_back({std::string(kLiteralEntity), EntityKind::SystemText, {}, {}});

    EntityDef fields{std::string(kFieldEntity), EntityKind::FieldEntity, {}, {}};
    for (const auto& f : schema.fields) fields.lexicon[f.name] = surface_forms(f);
    for (const auto& c : schema.composites) fields.lexicon[c.name] = surface_forms(c);
    for (const auto& g : schema.groups) fields.lexicon[g.id] = surface_forms(g);
    out.push_back(std::move(fields));

    EntityDef ops{std::string(kOperatorEntity), EntityKind::OperatorEntity, {}, {}};
    for (const auto& op : catalog.operators) {
        auto& list = ops.lexicon[op.id];
        for (const auto& [locale, forms] : op.surface_forms) list.insert(list.end(), forms.begin(), forms.end());
    }
    out.push_back(std::move(ops));

    EntityDef rows{std::string(kRowAliasEntity), EntityKind::RowAliasEntity, {}, {}};
    auto& aliases = rows.lexicon["rows"];
    for (const auto& [locale, list] : schema.row_aliases) aliases.insert(aliases.end(), list.begin(), list.end());
    out.push_back(std::move(rows));

    for (const auto& f : schema.fields) {
        if (!f.stats.is_categorical) continue;
        EntityDef values{categorical_entity_name(f.name), EntityKind::CategoricalValueEntity, {}, f.name};
        for (const auto& v : f.stats.value_lexicon) {
            auto& list = values.lexicon[v];
            list.push_back(v);
            for (const auto& [value, per_locale] : f.value_synonyms) {
                if (text::fold(value) != text::fold(v)) continue;
                for (const auto& [locale, syns] : per_locale) list.insert(list.end(), syns.begin(), syns.end());
            }
        }
        out.push_back(std::move(values));
    }
    return out;
}

auto base_bundle(const DataSchema& schema, const Catalog& catalog, Strategy strategy, const MatcherConfig& matcher)
    -> BotBundle {
    BotBundle b;
    b.schema = schema;
    b.strategy = strategy;
    b.operators = catalog.operators;
    b.locales = catalog_locales(catalog);
    b.matcher = matcher;
    b.entities = build_entities(schema, catalog);
    return b;
}

}  // namespace

auto strategy_name(Strategy s) -> std::string_view { return s == Strategy::Expanded ? "expanded" : "generic"; }

auto parse_strategy(std::string_view s) -> std::optional<Strategy> {
    if (s == "expanded") return Strategy::Expanded;
    if (s == "generic") return Strategy::Generic;
    return std::nullopt;
}

auto entity_kind_name(EntityKind k) -> std::string_view {
    switch (k) {
        case EntityKind::SystemNumber: return "SystemNumber";
        case EntityKind::SystemDate: return "SystemDate";
        case EntityKind::SystemText: return "SystemText";
        case EntityKind::FieldEntity: return "FieldEntity";
        case EntityKind::OperatorEntity: return "OperatorEntity";
        case EntityKind::CategoricalValueEntity: return "CategoricalValueEntity";
        case EntityKind::RowAliasEntity: return "RowAliasEntity";
    }
    return "SystemText";
}

auto categorical_entity_name(std::string_view field) -> std::string {
    return text::join(text::phrase_keys(field), "_") + "_value";
}

auto Intent::slot(std::string_view name) const -> const IntentSlot* {
    for (const auto& s : slots) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

auto BotBundle::intent(std::string_view name) const -> const Intent* {
    for (const auto& i : intents) {
        if (i.name == name) return &i;
    }
    return nullptr;
}

auto BotBundle::entity(std::string_view name) const -> const EntityDef* {
    for (const auto& e : entities) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

auto BotBundle::op(std::string_view id) const -> const Operator* {
    for (const auto& o : operators) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

auto generate_expanded(const DataSchema& schema, const Catalog& catalog, const MatcherConfig& matcher) -> BotBundle {
    BotBundle b = base_bundle(schema, catalog, Strategy::Expanded, matcher);
    for (const auto& inst : expanded_instances(schema, catalog)) {
        b.intents.push_back(expanded_intent(inst, schema, b.locales));
    }
    validate_bundle(b);
    return b;
}

auto generate_generic(const DataSchema& schema, const Catalog& catalog, const MatcherConfig& matcher) -> BotBundle {
    BotBundle b = base_bundle(schema, catalog, Strategy::Generic, matcher);
    for (const auto& p : catalog.patterns) {
        for (auto& intent : generic_intents(p, catalog, schema, b.locales)) b.intents.push_back(std::move(intent));
    }
    validate_bundle(b);
    return b;
}

auto predicted_expanded_count(const DataSchema& schema, const Catalog& catalog) -> std::size_t {
    return expanded_instances(schema, catalog).size();
}

auto select_strategy(const DataSchema& schema, const Catalog& catalog, const GeneratorConfig& config) -> Strategy {
    if (config.force) return *config.force;
    return predicted_expanded_count(schema, catalog) <= config.max_expanded_intents ? Strategy::Expanded
                                                                                   : Strategy::Generic;
}

auto generate(const DataSchema& schema, const Catalog& catalog, Strategy strategy, const MatcherConfig& matcher)
    -> BotBundle {
    return strategy == Strategy::Expanded ? generate_expanded(schema, catalog, matcher)
                                          : generate_generic(schema, catalog, matcher);
}

auto validate_bundle(const BotBundle& b) -> void {
    std::set<std::string> names;
    for (std::size_t i = 0; i < b.intents.size(); ++i) {
        const auto& intent = b.intents[i];
        std::string path = "/intents/" + std::to_string(i);
        if (!names.insert(intent.name).second) {
            throw Error(ErrorCode::InvalidBundle, "duplicate intent name '" + intent.name + "'", path);
        }
        for (const auto& slot : intent.slots) {
            if (slot.entity != kCategoricalValueRef && b.entity(slot.entity) == nullptr) {
                throw Error(ErrorCode::InvalidBundle,
                            "slot " + slot.name + " of " + intent.name + " references unknown entity " + slot.entity,
                            path + "/slots/" + slot.name);
            }
        }
    }
    std::set<std::string> entity_names;
    for (const auto& e : b.entities) {
        if (!entity_names.insert(e.name).second) {
            throw Error(ErrorCode::InvalidBundle, "duplicate entity '" + e.name + "'", "/entities/" + e.name);
        }
    }
}

}  // namespace tabot
