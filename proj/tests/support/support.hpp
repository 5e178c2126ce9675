#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tabot/generator.hpp"
#include "tabot/ingest.hpp"
#include "tabot/plan.hpp"
#include "tabot/schema.hpp"

namespace testing {

auto fixture_path(const std::string& name) -> std::filesystem::path;
auto read_text(const std::filesystem::path& p) -> std::string;

/// officials.csv with a fixed origin and import time.
auto f1_table() -> tabot::Table;
/// Row aliases, party synonym, gender/party value synonyms, full_name composite.
auto f1_enrichment() -> std::vector<tabot::EnrichmentCommand>;
auto f1_schema() -> tabot::DataSchema;

/// Counts expanded intents straight from the catalog document, with its own
/// reading of the applicability rules.
auto enumerate_expanded(const tabot::DataSchema& schema) -> std::size_t;

/// Random table: integer, float, categorical text, free text, date and small
/// integer
/// columns with some missing cells.
auto random_table(std::size_t rows, std::size_t fields, std::mt19937_64& rng) -> tabot::Table;
/// A plan that normalizes against `schema`.
auto random_plan(const tabot::DataSchema& schema, const tabot::Table& table, std::mt19937_64& rng) -> tabot::QueryPlan;

class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    auto operator=(const TempDir&) -> TempDir& = delete;
    [[nodiscard]] auto path() const -> const std::filesystem::path& { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
