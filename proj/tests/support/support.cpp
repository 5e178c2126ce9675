#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

namespace testing {

using namespace tabot;
using nlohmann::json;
namespace fs = std::filesystem;

auto fixture_path(const std::string& name) -> fs::path { return fs::path(TABOT_FIXTURES) / name; }

auto read_text(const fs::path& p) -> std::string {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

auto f1_table() -> Table {
    CsvOptions o;
    o.source = SourceMeta{"officials.csv", 1700000000};
    return load_csv(read_text(fixture_path("officials.csv")), o);
}

auto f1_enrichment() -> std::vector<EnrichmentCommand> {
    using namespace enrich;
    std::vector<EnrichmentCommand> out;
    for (const char* alias : {"officials", "people", "politicians", "persons"}) out.push_back(AddRowAlias{"en", alias});
    out.push_back(AddSynonym{"political_party", "en", "party"});
    out.push_back(AddValueSynonym{"gender", "F", "en", "women"});
    out.push_back(AddValueSynonym{"gender", "M", "en", "men"});
    out.push_back(AddValueSynonym{"political_party", "PP", "en", "People's Party"});
    out.push_back(AddComposite{"full_name", {"first_name", "last_name"}, " "});
    return out;
}

auto f1_schema() -> DataSchema {
    DataSchema s = build_default_schema(f1_table());
    for (const auto& c : f1_enrichment()) s = apply_enrichment(s, c);
    return s;
}

namespace {

struct Named {
    FieldType type;
    bool categorical;
    std::size_t diversity;
    bool composite;
    bool group;
};

auto type_list(const json& j) -> std::vector<FieldType> {
    std::vector<FieldType> out;
    for (const auto& t : j) out.push_back(*parse_field_type(t.get<std::string>()));
    return out;
}

auto contains(const std::vector<FieldType>& v, FieldType t) -> bool { return std::find(v.begin(), v.end(), t) != v.end(); }

/// The catalog's applicability predicate, read from the raw document.
auto admits(const json& applies, const Named& f, bool schema_has_categorical) -> bool {
    if (f.type == FieldType::Empty) return false;
    if (f.composite) {
        if (!applies.value("composites", false)) return false;
        if (applies.contains("categorical") && applies["categorical"].get<bool>()) return false;
    } else if (applies.contains("types") && !contains(type_list(applies["types"]), f.type)) {
        return false;
    }
    if (applies.contains("categorical") && applies["categorical"].get<bool>() != f.categorical) return false;
    if (applies.contains("maxDiversity") && (f.composite || f.diversity > applies["maxDiversity"].get<std::size_t>())) {
        return false;
    }
    if (applies.value("needsCategoricalField", false) && !schema_has_categorical) return false;
    return true;
}

}  // namespace

auto enumerate_expanded(const DataSchema& schema) -> std::size_t {
    json cat = json::parse(read_text(TABOT_CATALOG_FILE));
    std::vector<Named> names;
    bool any_categorical = false;
    for (const auto& f : schema.fields) {
        names.push_back({f.type, f.stats.is_categorical, f.stats.diversity, false, false});
        any_categorical = any_categorical || f.stats.is_categorical;
    }
    for (std::size_t i = 0; i < schema.composites.size(); ++i) names.push_back({FieldType::Text, false, 0, true, false});
    for (const auto& g : schema.groups) {
        const auto* rep = schema.field(g.default_member ? *g.default_member : g.members.front());
        names.push_back({rep->type, rep->stats.is_categorical, rep->stats.diversity, false, true});
    }

    std::size_t total = 0;
    for (const auto& p : cat["patterns"]) {
        const json applies = p.contains("applies") ? p["applies"] : json::object();
        if (p.value("binding", "none") == "none") {
            bool ok = !p.contains("applies") ||
                      std::any_of(names.begin(), names.end(), [&](const Named& f) { return admits(applies, f, any_categorical); });
            total += ok ? 1 : 0;
            continue;
        }
        for (const auto& f : names) {
            if (!admits(applies, f, any_categorical)) continue;
            if (p.contains("fieldFrom") && (f.composite || f.group)) continue;
            const std::string kind = p.value("variantKind", "none");
            if (kind == "operator") {
                for (const auto& op : cat["operators"]) {
                    if (op.value("arity", 1) != 1) continue;
                    if (!contains(type_list(op["types"]), f.type)) continue;
                    if (f.composite && op["id"] != "equals") continue;
                    ++total;
                }
            } else if (kind == "aggregate" || kind == "direction") {
                for (const auto& v : p["variants"]) {
                    if (!v.contains("types") || contains(type_list(v["types"]), f.type)) ++total;
                }
            } else {
                ++total;
            }
        }
    }
    return total;
}

namespace {

const char* kWords[] = {"alpha", "Beta", "gamma", "delta", "Epsilon", "zeta", "eta", "theta", "iota", "kappa"};

auto pick(std::mt19937_64& rng, std::size_t n) -> std::size_t { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

auto chance(std::mt19937_64& rng, double p) -> bool { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

}  // namespace

auto random_table(std::size_t rows, std::size_t fields, std::mt19937_64& rng) -> Table {
    std::vector<Column> cols;
    for (std::size_t c = 0; c < fields; ++c) {
        Column col;
        const std::size_t kind = c % 6;
        col.name = "f" + std::to_string(c);
        const std::size_t small = 2 + pick(rng, 6);
        for (std::size_t r = 0; r < rows; ++r) {
            Value v;
            switch (kind) {
                case 0: v = static_cast<std::int64_t>(pick(rng, 200)) - 50; break;
                case 1: v = std::uniform_real_distribution<double>(-1000, 1000)(rng); break;
                case 2: v = std::string(kWords[pick(rng, small)]); break;
                case 3: v = std::string(kWords[pick(rng, 10)]) + " " + kWords[pick(rng, 10)] + std::to_string(r); break;
                case 4: v = Date{static_cast<std::int32_t>(18000 + pick(rng, 400))}; break;
                default: v = static_cast<std::int64_t>(pick(rng, small)); break;
            }
            if (r > 0 && chance(rng, 0.08)) v = Missing{};
            col.cells.push_back(v);
            col.raw.push_back(is_missing(v) ? "" : to_string(v));
        }
        // Type from the first present cell; every column is homogeneous.
        col.type = FieldType::Empty;
        for (const auto& v : col.cells) {
            if (std::holds_alternative<std::int64_t>(v)) col.type = FieldType::Integer;
            if (std::holds_alternative<double>(v)) col.type = FieldType::Float;
            if (std::holds_alternative<std::string>(v)) col.type = FieldType::Text;
            if (std::holds_alternative<Date>(v)) col.type = FieldType::Date;
            if (col.type != FieldType::Empty) break;
        }
        cols.push_back(std::move(col));
    }
    return Table(std::move(cols), rows, SourceMeta{"random", 0});
}

namespace {

auto any_cell(const Table& t, const std::string& field, std::mt19937_64& rng) -> Value {
    const Column* c = t.find(field);
    for (int tries = 0; tries < 20; ++tries) {
        const Value& v = c->cells[pick(rng, c->cells.size())];
        if (!is_missing(v)) return v;
    }
    return c->cells.front();
}

auto numeric(FieldType t) -> bool { return t == FieldType::Integer || t == FieldType::Float; }

auto random_predicate(const DataSchema& schema, const Table& t, std::mt19937_64& rng) -> Predicate {
    const auto& f = schema.fields[pick(rng, schema.fields.size())];
    Value v = any_cell(t, f.name, rng);
    if (is_missing(v)) return {f.name, "not_equals", {std::string("x")}};
    std::vector<std::string> ops = {"equals", "not_equals"};
    if (numeric(f.type)) ops.insert(ops.end(), {"less_than", "less_equal", "greater_than", "greater_equal", "between"});
    if (f.type == FieldType::Date) ops.insert(ops.end(), {"before", "after", "between"});
    if (f.type == FieldType::Text) ops.insert(ops.end(), {"contains", "starts_with", "ends_with"});
    std::string op = ops[pick(rng, ops.size())];
    if (op == "between") return {f.name, op, {v, any_cell(t, f.name, rng)}};
    if (op == "contains" || op == "starts_with" || op == "ends_with") {
        std::string s = std::get<std::string>(v);
        std::size_t len = 1 + pick(rng, std::min<std::size_t>(4, s.size()));
        std::string part = op == "ends_with" ? s.substr(s.size() - len) : s.substr(op == "contains" ? pick(rng, s.size() - len + 1) : 0, len);
        return {f.name, op, {part}};
    }
    // Float thresholds often land between cells.
    if (f.type == FieldType::Float && chance(rng, 0.3)) v = *as_double(v) + 0.5;
    return {f.name, op, {v}};
}

}  // namespace

auto random_plan(const DataSchema& schema, const Table& t, std::mt19937_64& rng) -> QueryPlan {
    QueryPlan p;
    const std::size_t clauses = pick(rng, 3);
    for (std::size_t i = 0; i < clauses; ++i) {
        Clause c;
        const std::size_t width = 1 + pick(rng, 2);
        for (std::size_t j = 0; j < width; ++j) c.push_back(random_predicate(schema, t, rng));
        p.filters.push_back(std::move(c));
    }
    std::vector<std::string> numeric_fields, categorical, all;
    for (const auto& f : schema.fields) {
        all.push_back(f.name);
        if (numeric(f.type)) numeric_fields.push_back(f.name);
        if (f.stats.is_categorical) categorical.push_back(f.name);
    }
    auto any_of = [&](const std::vector<std::string>& v) { return v[pick(rng, v.size())]; };
    auto random_limit = [&]() -> std::optional<std::size_t> {
        if (chance(rng, 0.4)) return std::nullopt;
        return 1 + pick(rng, 6);
    };
    const AggregateFn fns[] = {AggregateFn::Count, AggregateFn::Sum, AggregateFn::Avg, AggregateFn::Min, AggregateFn::Max};
    switch (pick(rng, 8)) {
        case 0: p.projection.kind = ProjectionKind::RowCount; break;
        case 1:
            p.projection.kind = ProjectionKind::DistinctCount;
            p.projection.field = any_of(all);
            break;
        case 2:
            p.projection.kind = ProjectionKind::DistinctValues;
            p.projection.field = any_of(all);
            p.limit = random_limit();
            break;
        case 3:
            if (numeric_fields.empty()) break;
            p.aggregate = Aggregate{fns[pick(rng, 5)], any_of(numeric_fields)};
            break;
        case 4:
            if (numeric_fields.empty() || categorical.empty()) break;
            p.aggregate = Aggregate{fns[pick(rng, 5)], any_of(numeric_fields)};
            p.group_by = GroupBy{any_of(categorical), GroupPost::PerGroupAggregate, {}};
            if (chance(rng, 0.7)) {
                p.order_by = OrderBy{chance(rng, 0.7) ? p.aggregate->field : p.group_by->field,
                                     chance(rng, 0.5) ? Direction::Asc : Direction::Desc};
            }
            p.limit = random_limit();
            break;
        case 5:
            if (categorical.empty()) break;
            p.group_by = GroupBy{any_of(categorical), GroupPost::ArgmaxCount, {}};
            break;
        case 6: {
            if (categorical.empty()) break;
            std::string f = any_of(categorical);
            p.group_by = GroupBy{f, GroupPost::CompareCounts, {any_cell(t, f, rng), any_cell(t, f, rng)}};
            break;
        }
        default:
            p.projection.kind = chance(rng, 0.5) ? ProjectionKind::All : ProjectionKind::Fields;
            if (p.projection.kind == ProjectionKind::Fields) p.projection.fields = {any_of(all), any_of(all)};
            if (chance(rng, 0.7)) p.order_by = OrderBy{any_of(all), chance(rng, 0.5) ? Direction::Asc : Direction::Desc};
            p.limit = random_limit();
            break;
    }
    return p;
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("tabot-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

}  // namespace testing
