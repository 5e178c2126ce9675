#include <doctest.h>

#include <random>
#include <set>

#include "support.hpp"
#include "tabot/error.hpp"
#include "tabot/ingest.hpp"
#include "tabot/parse.hpp"
#include "tabot/text.hpp"

using namespace tabot;

TEST_CASE("empty table keeps its header") {
    Table t = load_csv("a,b\n");
    CHECK(t.row_count() == 0);
    CHECK(t.column_count() == 2);
}

TEST_CASE("F1 loads with 8 rows and 6 columns") {
    Table t = testing::f1_table();
    CHECK(t.row_count() == 8);
    CHECK(t.column_count() == 6);
    CHECK(t.find("salary")->type == FieldType::Integer);
    CHECK(t.find("first_name")->type == FieldType::Text);
}

TEST_CASE("arity mismatch is reported with its row") {
    try {
        (void)load_csv("a,b,c,d,e,f\n1,2,3,4,5\n");
        FAIL("expected MalformedCsv");
    } catch (const MalformedCsv& e) {
        CHECK(e.row() == 1);
        CHECK(e.reason().find("arity") != std::string::npos);
    }
}

TEST_CASE("csv errors") {
    CHECK_THROWS_AS((void)load_csv(""), Error);
    try {
        (void)load_csv("a,a\n1,2\n");
        FAIL("expected DuplicateColumnName");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DuplicateColumnName);
    }
    try {
        (void)load_csv("");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyInput);
    }
}

TEST_CASE("RFC 4180 quoting") {
    Table t = load_csv("name,note\n\"Colau, Ada\",\"line1\nline2\"\n\"say \"\"hi\"\"\",x\n");
    REQUIRE(t.row_count() == 2);
    CHECK(t.find("name")->raw[0] == "Colau, Ada");
    CHECK(t.find("note")->raw[0] == "line1\nline2");
    CHECK(t.find("name")->raw[1] == "say \"hi\"");
}

TEST_CASE("type inference ladder") {
    std::vector<std::string> ints{"100000", "85000", "120000"};
    CHECK(infer_field_type(ints) == FieldType::Integer);
    std::vector<std::string> empty{"", "", ""};
    CHECK(infer_field_type(empty) == FieldType::Empty);
    std::vector<std::string> dirty{"12", "13", "x14"};
    InferenceOptions o;
    o.type_consensus_ratio = 0.95;
    CHECK(infer_field_type(dirty, o) == FieldType::Text);
    std::vector<std::string> floats{"1.5", "2", "3.25"};
    CHECK(infer_field_type(floats) == FieldType::Float);
    std::vector<std::string> dates{"2020-01-01", "2021-12-31"};
    CHECK(infer_field_type(dates) == FieldType::Date);
    std::vector<std::string> bools{"yes", "no", "Yes"};
    CHECK(infer_field_type(bools) == FieldType::Boolean);
    std::vector<std::string> missing{"NA", "5", "null", "7"};
    CHECK(infer_field_type(missing) == FieldType::Integer);
}

TEST_CASE("F1 field statistics") {
    Table t = testing::f1_table();
    auto party = compute_field_stats(t, "political_party", 10);
    CHECK(party.diversity == 4);
    CHECK(party.is_categorical);
    CHECK(party.value_lexicon.size() == 4);
    auto salary = compute_field_stats(t, "salary", 10);
    CHECK(salary.diversity == 8);
    CHECK_FALSE(salary.is_categorical);
    CHECK(salary.value_lexicon.empty());
    Table one = load_csv("x\na\na\na\n");
    auto s = compute_field_stats(one, "x", 10);
    CHECK(s.diversity == 1);
    CHECK(s.is_categorical);
    CHECK_THROWS_AS((void)compute_field_stats(t, "nope", 10), Error);
}

TEST_CASE("property: diversity equals a brute-force distinct count, and is monotone in threshold") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t rows = 1 + rng() % 40;
        // A second column keeps rows with an empty cell from being blank lines.
        std::string csv = "v,n\n";
        std::vector<std::string> cells;
        for (std::size_t r = 0; r < rows; ++r) {
            std::string cell = rng() % 5 == 0 ? "" : std::string(1, static_cast<char>('a' + rng() % 12));
            if (rng() % 3 == 0 && !cell.empty()) cell[0] = static_cast<char>(cell[0] - 'a' + 'A');
            cells.push_back(cell);
            csv += cell + "," + std::to_string(r) + "\n";
        }
        Table t = load_csv(csv);
        std::set<std::string> distinct;
        std::size_t missing = 0;
        for (const auto& c : cells) {
            if (c.empty()) {
                ++missing;
            } else {
                distinct.insert(text::fold(c));
            }
        }
        auto stats = compute_field_stats(t, "v", 10);
        CHECK(stats.diversity == distinct.size());
        CHECK(stats.missing_count == missing);
        CHECK(stats.diversity <= rows - missing);
        bool before = true;
        for (std::size_t th = 12; th-- > 0;) {
            bool now = compute_field_stats(t, "v", th).is_categorical;
            CHECK((before || !now));  // lowering the threshold never makes it categorical
            before = now;
        }
    }
}

TEST_CASE("property: integer columns also parse as floats") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> cells;
        for (int i = 0; i < 20; ++i) cells.push_back(std::to_string(static_cast<long long>(rng() % 2000000) - 1000000));
        REQUIRE(infer_field_type(cells) == FieldType::Integer);
        for (const auto& c : cells) CHECK(parse::floating(c).has_value());
    }
}

TEST_CASE("loading is deterministic") {
    auto bytes = testing::read_text(testing::fixture_path("officials.csv"));
    CHECK(load_csv(bytes).columns().size() == 6);
    Table a = load_csv(bytes);
    Table b = load_csv(bytes);
    REQUIRE(a.column_count() == b.column_count());
    for (std::size_t i = 0; i < a.column_count(); ++i) {
        CHECK(a.columns()[i].cells == b.columns()[i].cells);
        CHECK(a.columns()[i].type == b.columns()[i].type);
    }
}
