#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "support.hpp"
#include "tabot/generator.hpp"
#include "tabot/plan.hpp"

using namespace tabot;

namespace {

auto find_intent(const BotBundle& b, const std::string& name) -> const Intent* {
    for (const auto& i : b.intents) {
        if (i.name == name) return &i;
    }
    return nullptr;
}

auto schema_with(std::size_t fields, std::uint64_t seed) -> DataSchema {
    std::mt19937_64 rng(seed);
    return build_default_schema(testing::random_table(30, fields, rng));
}

// Frozen after the enumeration oracle agreed with the generator.
constexpr std::size_t kF1ExpandedIntents = 86;

}  // namespace

TEST_CASE("expanded F1 bundle carries the worked example intent") {
    BotBundle b = generate_expanded(build_default_schema(testing::f1_table()), catalog());
    const Intent* i = find_intent(b, "salary_greater_than_value");
    REQUIRE(i != nullptr);
    const auto& sentences = i->training_sentences.at("en");
    CHECK(std::find(sentences.begin(), sentences.end(), "Who has a salary greater than VALUE?") != sentences.end());
    CHECK(i->bound_field == "salary");
}

TEST_CASE("expanded intent count equals the enumeration oracle") {
    DataSchema plain = build_default_schema(testing::f1_table());
    std::size_t oracle = testing::enumerate_expanded(plain);
    CHECK(generate_expanded(plain, catalog()).intents.size() == oracle);
    CHECK(predicted_expanded_count(plain, catalog()) == oracle);
    CHECK(oracle == kF1ExpandedIntents);

    DataSchema rich = testing::f1_schema();
    rich = apply_enrichment(rich, enrich::AddGroup{"pay", {"salary", "age"}, std::string("salary")});
    CHECK(generate_expanded(rich, catalog()).intents.size() == testing::enumerate_expanded(rich));
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        DataSchema s = schema_with(3 + seed * 2, seed);
        CHECK(generate_expanded(s, catalog()).intents.size() == testing::enumerate_expanded(s));
    }
}

TEST_CASE("a lone Empty field only gets dataset-level and meta intents") {
    BotBundle b = generate_expanded(build_default_schema(load_csv("a\n\n\n")), catalog());
    for (const auto& i : b.intents) {
        CHECK_MESSAGE((i.category == PatternCategory::DatasetLevel || i.category == PatternCategory::Meta), i.name);
        CHECK_FALSE(i.bound_field.has_value());
    }
    CHECK_FALSE(b.intents.empty());
}

TEST_CASE("generic F1 bundle") {
    BotBundle b = generate_generic(build_default_schema(testing::f1_table()), catalog());
    const Intent* i = find_intent(b, "field_operator_value");
    REQUIRE(i != nullptr);
    REQUIRE(i->slot("FIELD") != nullptr);
    REQUIRE(i->slot("OPERATOR") != nullptr);
    REQUIRE(i->slot("VALUE") != nullptr);
    CHECK(i->slot("FIELD")->entity == kFieldEntity);
    CHECK(i->slot("OPERATOR")->entity == kOperatorEntity);
    CHECK(i->slot("VALUE")->entity == kLiteralEntity);
    const EntityDef* fields = b.entity(std::string(kFieldEntity));
    REQUIRE(fields != nullptr);
    for (const auto& f : b.schema.fields) CHECK(fields->lexicon.count(f.name) == 1);
    CHECK(b.entity(categorical_entity_name("gender")) != nullptr);
}

TEST_CASE("property: generic intent count does not depend on the schema") {
    const std::size_t reference = generate_generic(schema_with(6, 1), catalog()).intents.size();
    for (std::uint64_t seed = 2; seed < 12; ++seed) {
        CHECK(generate_generic(schema_with(2 + seed * 11, seed), catalog()).intents.size() == reference);
    }
}

TEST_CASE("no categorical fields, no categorical entity") {
    BotBundle b = generate_generic(build_default_schema(load_csv("x,y\n1.5,a1\n2.5,a2\n")), catalog());
    for (const auto& e : b.entities) CHECK(e.kind != EntityKind::CategoricalValueEntity);
}

TEST_CASE("strategy selection") {
    DataSchema f1 = build_default_schema(testing::f1_table());
    CHECK(select_strategy(f1, catalog()) == Strategy::Expanded);
    DataSchema wide = schema_with(120, 3);
    CHECK(testing::enumerate_expanded(wide) > 500);
    CHECK(select_strategy(wide, catalog()) == Strategy::Generic);
    GeneratorConfig forced;
    forced.force = Strategy::Generic;
    CHECK(select_strategy(f1, catalog(), forced) == Strategy::Generic);
    GeneratorConfig tight;
    tight.max_expanded_intents = testing::enumerate_expanded(f1) - 1;
    CHECK(select_strategy(f1, catalog(), tight) == Strategy::Generic);
    tight.max_expanded_intents += 1;
    CHECK(select_strategy(f1, catalog(), tight) == Strategy::Expanded);
}

TEST_CASE("bundles are deterministic and round-trip") {
    DataSchema s = testing::f1_schema();
    for (auto strategy : {Strategy::Expanded, Strategy::Generic}) {
        BotBundle a = generate(s, catalog(), strategy);
        BotBundle b = generate(s, catalog(), strategy);
        CHECK(save_bundle(a).dump() == save_bundle(b).dump());
        BotBundle loaded = load_bundle(save_bundle(a));
        CHECK(save_bundle(loaded).dump() == save_bundle(a).dump());
    }
}

TEST_CASE("intent names are unique and slots resolve") {
    for (auto strategy : {Strategy::Expanded, Strategy::Generic}) {
        BotBundle b = generate(testing::f1_schema(), catalog(), strategy);
        std::set<std::string> names;
        for (const auto& i : b.intents) {
            CHECK(names.insert(i.name).second);
            for (const auto& slot : i.slots) {
                CHECK((slot.entity == kCategoricalValueRef || b.entity(slot.entity) != nullptr));
            }
        }
        CHECK_NOTHROW(validate_bundle(b));
    }
}

TEST_CASE("plan templates are well formed") {
    for (auto strategy : {Strategy::Expanded, Strategy::Generic}) {
        BotBundle b = generate(testing::f1_schema(), catalog(), strategy);
        for (const auto& i : b.intents) CHECK_MESSAGE(i.plan_template.is_object(), i.name);
    }
}
