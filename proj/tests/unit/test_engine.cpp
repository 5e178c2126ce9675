#include <doctest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "tabot/engine.hpp"
#include "tabot/error.hpp"
#include "tabot/query.hpp"

using namespace tabot;

namespace {

auto f1_bundle(Strategy s) -> std::shared_ptr<const BotBundle> {
    static const auto expanded = std::make_shared<const BotBundle>(generate(testing::f1_schema(), catalog(), Strategy::Expanded));
    static const auto generic = std::make_shared<const BotBundle>(generate(testing::f1_schema(), catalog(), Strategy::Generic));
    return s == Strategy::Expanded ? expanded : generic;
}

auto engine(Strategy s) -> const IntentEngine& {
    static const IntentEngine e(f1_bundle(Strategy::Expanded));
    static const IntentEngine g(f1_bundle(Strategy::Generic));
    return s == Strategy::Expanded ? e : g;
}

auto kinds(const std::vector<EntityMention>& ms, MentionKind k) -> std::vector<EntityMention> {
    std::vector<EntityMention> out;
    std::copy_if(ms.begin(), ms.end(), std::back_inserter(out), [&](const auto& m) { return m.kind == k; });
    return out;
}

}  // namespace

TEST_CASE("utterances without tokens are rejected") {
    CHECK_THROWS_AS(tokenize_utterance(""), Error);
    try {
        (void)tokenize_utterance("  ?! ");
        FAIL("expected EmptyUtterance");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyUtterance);
    }
    CHECK_THROWS_AS((void)engine(Strategy::Generic).understand("   "), Error);
}

TEST_CASE("recognizer finds field, operator and number") {
    auto u = engine(Strategy::Generic).understand("salary higher than 10000");
    auto fields = kinds(u.mentions, MentionKind::Field);
    auto ops = kinds(u.mentions, MentionKind::Operator);
    auto numbers = kinds(u.mentions, MentionKind::Number);
    REQUIRE(fields.size() == 1);
    CHECK(fields[0].value == "salary");
    REQUIRE(ops.size() == 1);
    CHECK(ops[0].value == "greater_than");
    REQUIRE(numbers.size() == 1);
    CHECK(numbers[0].typed == Value{std::int64_t{10000}});
}

TEST_CASE("recognizer spans are consistent with the raw text") {
    const std::string raw = "Who has a salary greater than 120000?";
    auto u = engine(Strategy::Generic).understand(raw);
    for (const auto& m : u.mentions) {
        CHECK(m.begin < m.end);
        CHECK(m.end <= raw.size());
        CHECK(m.first_token < m.last_token);
        CHECK(m.last_token <= u.utterance.tokens.size());
    }
    // Mentions never overlap.
    for (std::size_t i = 0; i < u.mentions.size(); ++i) {
        for (std::size_t j = i + 1; j < u.mentions.size(); ++j) {
            const auto& a = u.mentions[i];
            const auto& b = u.mentions[j];
            CHECK((a.last_token <= b.first_token || b.last_token <= a.first_token));
        }
    }
}

TEST_CASE("composite value is one mention and a value synonym maps to its canonical value") {
    auto u = engine(Strategy::Generic).understand("What is the salary of Ada Colau?");
    std::size_t spanning = 0;
    for (const auto& m : u.mentions) {
        if (m.value == "salary") continue;
        if (text::fold(u.utterance.raw.substr(m.begin, m.end - m.begin)) == "ada colau") ++spanning;
    }
    CHECK(spanning == 1);

    auto p = engine(Strategy::Generic).understand("How many People's Party officials are there?");
    auto cats = kinds(p.mentions, MentionKind::CategoricalValue);
    REQUIRE(cats.size() == 1);
    CHECK(cats[0].value == "PP");
    CHECK(cats[0].field == "political_party");
}

TEST_CASE("expanded bundle matches a bound intent") {
    const auto& e = engine(Strategy::Expanded);
    auto u = e.understand("Who has a salary greater than 120000?");
    REQUIRE(u.match.accepted(e.bundle().matcher.accept_threshold));
    CHECK(u.match.intent == "salary_greater_than_value");
    CHECK_FALSE(u.match.violation);
    auto rows = e.understand("How many rows are there?");
    CHECK(rows.match.intent == "row_count");
    CHECK(rows.match.accepted(e.bundle().matcher.accept_threshold));
}

TEST_CASE("generic bundle binds field and operator slots") {
    const auto& e = engine(Strategy::Generic);
    auto u = e.understand("Who has a salary greater than 120000?");
    REQUIRE(u.match.accepted(e.bundle().matcher.accept_threshold));
    CHECK(u.match.intent == "field_operator_value");
    REQUIRE(u.match.slots.count("FIELD") == 1);
    CHECK(u.match.slots.at("FIELD").value == "salary");
    CHECK(u.match.slots.at("OPERATOR").value == "greater_than");
    CHECK(u.match.missing_required.empty());
}

TEST_CASE("gibberish stays below the threshold") {
    for (auto s : {Strategy::Expanded, Strategy::Generic}) {
        const auto& e = engine(s);
        auto u = e.understand("purple monkey dishwasher quantum");
        CHECK_FALSE(u.match.accepted(e.bundle().matcher.accept_threshold));
    }
}

TEST_CASE("type check rejects numeric comparison on text") {
    const auto& e = engine(Strategy::Generic);
    const auto& bundle = e.bundle();
    MatchResult m;
    m.intent = "field_operator_value";
    m.confidence = 0.9;
    auto mention = [](MentionKind kind, std::string_view entity, std::string value, Value typed) {
        EntityMention out;
        out.kind = kind;
        out.entity = entity;
        out.value = std::move(value);
        out.typed = std::move(typed);
        return out;
    };
    auto field = mention(MentionKind::Field, kFieldEntity, "first_name", Value{std::string("first_name")});
    auto op = mention(MentionKind::Operator, kOperatorEntity, "greater_than", Value{std::string("greater_than")});
    auto num = mention(MentionKind::Number, kNumberEntity, "1000", Value{std::int64_t{1000}});
    m.slots["FIELD"] = field;
    m.slots["OPERATOR"] = op;
    const Intent* intent = bundle.intent("field_operator_value");
    REQUIRE(intent != nullptr);
    for (const auto& slot : intent->slots) {
        if (slot.name != "FIELD" && slot.name != "OPERATOR" && slot.required) m.slots[slot.name] = num;
    }
    auto checked = validate_type_consistency(m, bundle);
    REQUIRE(checked.violation);
    CHECK(checked.violation->find("numeric operator on Text field") != std::string::npos);
    CHECK_FALSE(checked.accepted(bundle.matcher.accept_threshold));

    auto u = e.understand("first name > 1000");
    if (u.match.intent == "field_operator_value") {
        CHECK_FALSE(u.match.accepted(bundle.matcher.accept_threshold));
    }
}

TEST_CASE("between bounds are normalized") {
    const auto& e = engine(Strategy::Generic);
    auto u = e.understand("Who has a salary between 100000 and 80000?");
    REQUIRE(u.match.accepted(e.bundle().matcher.accept_threshold));
    auto plan = normalize_plan(build_plan(u.match, e.bundle()), e.bundle().schema);
    REQUIRE(plan.filters.size() == 1);
    const auto& p = plan.filters[0][0];
    CHECK(p.op == "between");
    CHECK(p.values[0] == Value{std::int64_t{80000}});
    CHECK(p.values[1] == Value{std::int64_t{100000}});
}

TEST_CASE("parallel scoring equals the serial reference") {
    for (auto s : {Strategy::Expanded, Strategy::Generic}) {
        auto bundle = f1_bundle(s);
        LexicalMatcher matcher(*bundle);
        for (const char* q : {"How many women are there?", "Give me the 3 officials with the highest salaries",
                              "Which party has the most members?", "salary of Laia Bonet", "zzz"}) {
            auto u = tokenize_utterance(q);
            auto mentions = recognize_entities(u, *bundle);
            auto a = matcher.score(u, mentions);
            auto b = matcher.score_serial(u, mentions);
            REQUIRE(a.size() == b.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].intent == b[i].intent);
                CHECK(a[i].confidence == b[i].confidence);
            }
        }
    }
}

TEST_CASE("unknown words never raise the winning confidence") {
    const auto& e = engine(Strategy::Expanded);
    std::mt19937_64 rng(7);
    const char* noise[] = {"zorblax", "quindle", "frumious", "vorpal", "snark"};
    for (const char* q : {"How many rows are there?", "Who has a salary greater than 120000?", "How many women are there?"}) {
        auto base = e.understand(q);
        std::string noisy = q;
        for (int i = 0; i < 3; ++i) {
            noisy += std::string(" ") + noise[rng() % 5];
            auto u = e.understand(noisy);
            CHECK(u.match.confidence <= base.match.confidence + 1e-12);
        }
    }
}

TEST_CASE("understanding is deterministic") {
    const auto& e = engine(Strategy::Generic);
    for (const char* q : {"How many women vs men are there?", "average salary by party", "Who is called 'Colau'?"}) {
        auto a = e.understand(q);
        auto b = e.understand(q);
        CHECK(a.mentions == b.mentions);
        CHECK(match_to_json(a.match) == match_to_json(b.match));
    }
}

TEST_CASE("accepted matches carry every required slot") {
    for (auto s : {Strategy::Expanded, Strategy::Generic}) {
        const auto& e = engine(s);
        for (const char* q : {"How many women are there?", "Give me the 3 officials with the highest salaries",
                              "What is the average salary of BComu?", "How many different parties are there?"}) {
            auto u = e.understand(q);
            if (!u.match.accepted(e.bundle().matcher.accept_threshold)) continue;
            const Intent* intent = e.bundle().intent(u.match.intent);
            REQUIRE(intent != nullptr);
            for (const auto& slot : intent->slots) {
                if (slot.required && !slot.default_value) {
                    const bool bound = u.match.slots.count(slot.name) == 1;
                    const bool listed = std::find(u.match.missing_required.begin(), u.match.missing_required.end(),
                                                  slot.name) != u.match.missing_required.end();
                    CHECK(bound != listed);
                }
            }
        }
    }
}
