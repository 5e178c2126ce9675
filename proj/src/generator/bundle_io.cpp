#include <map>

#include "tabot/error.hpp"
#include "tabot/generator.hpp"

namespace tabot {

using nlohmann::json;

namespace {

auto bad(const std::string& path, const std::string& what) -> Error {
    return Error(ErrorCode::InvalidBundle, "bundle " + path + ": " + what, path);
}

auto entity_kind_from(std::string_view s, const std::string& path) -> EntityKind {
    for (auto k : {EntityKind::SystemNumber, EntityKind::SystemDate, EntityKind::SystemText, EntityKind::FieldEntity,
                   EntityKind::OperatorEntity, EntityKind::CategoricalValueEntity, EntityKind::RowAliasEntity}) {
        if (entity_kind_name(k) == s) return k;
    }
    throw bad(path, "unknown entity kind '" + std::string(s) + "'");
}

auto intent_to_json(const Intent& i) -> json {
    json slots = json::array();
    for (const auto& s : i.slots) {
        json j = slot_to_json(s);
        j["fragment"] = s.fragment;
        slots.push_back(std::move(j));
    }
    json j{{"name", i.name},
           {"trainingSentences", i.training_sentences},
           {"slots", std::move(slots)},
           {"fixed", i.fixed},
           {"plan", i.plan_template},
           {"sourcePattern", i.source_pattern},
           {"category", pattern_category_name(i.category)},
           {"interpretation", i.interpretation},
           {"spelled", i.spelled}};
    j["boundField"] = i.bound_field ? json(*i.bound_field) : json();
    j["fieldFrom"] = i.field_from ? json(*i.field_from) : json();
    return j;
}

auto opt_string(const json& j, const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

auto intent_from_json(const json& j, const std::string& path) -> Intent {
    Intent i;
    i.name = j.at("name").get<std::string>();
    i.training_sentences = j.at("trainingSentences").get<LocalizedList>();
    const auto& slots = j.at("slots");
    for (std::size_t k = 0; k < slots.size(); ++k) {
        IntentSlot s;
        static_cast<SlotSpec&>(s) = slot_from_json(slots[k], path + "/slots/" + std::to_string(k));
        s.fragment = slots[k].value("fragment", s.name);
        i.slots.push_back(std::move(s));
    }
    i.fixed = j.value("fixed", std::map<std::string, std::string>{});
    i.plan_template = j.at("plan");
    i.source_pattern = j.at("sourcePattern").get<std::string>();
    auto category = parse_pattern_category(j.at("category").get<std::string>());
    if (!category) throw bad(path + "/category", "unknown category");
    i.category = *category;
    i.interpretation = j.value("interpretation", std::map<std::string, std::string>{});
    i.spelled = j.value("spelled", std::vector<std::string>{});
    i.bound_field = opt_string(j, "boundField");
    i.field_from = opt_string(j, "fieldFrom");
    return i;
}

}  // namespace

auto save_bundle(const BotBundle& b) -> json {
    json intents = json::array();
    for (const auto& i : b.intents) intents.push_back(intent_to_json(i));
    json entities = json::array();
    for (const auto& e : b.entities) {
        json j{{"name", e.name}, {"kind", entity_kind_name(e.kind)}, {"lexicon", e.lexicon}};
        if (!e.field.empty()) j["field"] = e.field;
        entities.push_back(std::move(j));
    }
    json operators = json::array();
    for (const auto& op : b.operators) operators.push_back(operator_to_json(op));
    return {{"formatVersion", kBundleFormatVersion},
            {"generatorVersion", b.generator_version},
            {"strategy", strategy_name(b.strategy)},
            {"locales", b.locales},
            {"matcher",
             {{"wLex", b.matcher.w_lex}, {"wSlot", b.matcher.w_slot}, {"acceptThreshold", b.matcher.accept_threshold}}},
            {"schema", save_schema(b.schema)},
            {"operators", std::move(operators)},
            {"entities", std::move(entities)},
            {"intents", std::move(intents)}};
}

auto load_bundle(const json& doc) -> BotBundle {
    if (!doc.is_object()) throw bad("/", "not an object");
    if (doc.value("formatVersion", 0) != kBundleFormatVersion) {
        throw bad("/formatVersion", "unsupported bundle format version");
    }
    BotBundle b;
    std::string path = "/";
    try {
        b.generator_version = doc.at("generatorVersion").get<std::string>();
        auto strategy = parse_strategy(doc.at("strategy").get<std::string>());
        if (!strategy) throw bad("/strategy", "unknown strategy");
        b.strategy = *strategy;
        b.locales = doc.at("locales").get<std::vector<std::string>>();
        const auto& m = doc.at("matcher");
        b.matcher.w_lex = m.at("wLex").get<double>();
        b.matcher.w_slot = m.at("wSlot").get<double>();
        b.matcher.accept_threshold = m.at("acceptThreshold").get<double>();
        path = "/schema";
        b.schema = load_schema(doc.at("schema"));
        const auto& ops = doc.at("operators");
        for (std::size_t i = 0; i < ops.size(); ++i) {
            path = "/operators/" + std::to_string(i);
            b.operators.push_back(operator_from_json(ops[i], path));
        }
        const auto& entities = doc.at("entities");
        for (std::size_t i = 0; i < entities.size(); ++i) {
            path = "/entities/" + std::to_string(i);
            const auto& e = entities[i];
            EntityDef def;
            def.name = e.at("name").get<std::string>();
            def.kind = entity_kind_from(e.at("kind").get<std::string>(), path + "/kind");
            def.lexicon = e.at("lexicon").get<std::map<std::string, std::vector<std::string>>>();
            def.field = e.value("field", std::string{});
            b.entities.push_back(std::move(def));
        }
        const auto& intents = doc.at("intents");
        for (std::size_t i = 0; i < intents.size(); ++i) {
            path = "/intents/" + std::to_string(i);
            b.intents.push_back(intent_from_json(intents[i], path));
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidBundle) throw;
        throw bad(path, e.what());
    } catch (const json::exception& e) {
        throw bad(path, e.what());
    }
    validate_bundle(b);
    return b;
}

}  // namespace tabot
