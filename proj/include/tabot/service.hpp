#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabot/dialogue.hpp"
#include "tabot/generator.hpp"
#include "tabot/schema.hpp"

namespace tabot {

inline constexpr int kApiVersion = 1;

/// One rejected enrichment command of a PATCH.
struct CommandDiagnostic {
    std::size_t index = 0;
    ErrorCode code = ErrorCode::InvalidCommand;
    std::string message;
    std::string detail;
};

/// A PATCH whose commands were rolled back.
class EnrichmentRejected : public Error {
public:
    explicit EnrichmentRejected(std::vector<CommandDiagnostic> diagnostics);
    [[nodiscard]] auto diagnostics() const -> const std::vector<CommandDiagnostic>& { return diagnostics_; }

private:
    std::vector<CommandDiagnostic> diagnostics_;
};

struct BundleInfo {
    Strategy strategy = Strategy::Expanded;
    std::size_t intent_count = 0;
    std::size_t entity_count = 0;
    int schema_version = 0;
    std::string generator_version;
};

auto bundle_info_to_json(const BundleInfo& info) -> nlohmann::json;

struct UploadOptions {
    std::string origin = "upload";
    char delimiter = ',';
    std::optional<std::int64_t> imported_at;  ///< default: the registry clock
};

/// Datasets on disk, one directory each:
///   <root>/<id>/source.csv, meta.json, schema/v<N>.json, bundle.json, log.jsonl
/// Edits and generation of one dataset are serialized; different datasets
/// proceed in parallel. A schema edit deactivates the bundle, so the active
/// bundle always reflects the latest schema version.
class Registry {
public:
    /// Loads every dataset already under `config.storage_dir`.
    explicit Registry(AppConfig config, std::shared_ptr<FallbackClient> fallback = nullptr, Clock clock = system_clock());

    struct Created {
        std::string id;
        int version = 1;
        DataSchema schema;
    };
    /// Throws MalformedCsv, EmptyInput, DuplicateColumnName.
    auto create(std::string_view csv, const UploadOptions& options = {}) -> Created;

    /// Throws UnknownDataset.
    [[nodiscard]] auto schema(const std::string& id) const -> std::pair<int, DataSchema>;
    /// All-or-nothing. Throws UnknownDataset or EnrichmentRejected.
    auto patch(const std::string& id, const std::vector<EnrichmentCommand>& commands) -> std::pair<int, DataSchema>;
    /// `strategy` empty means automatic selection. Throws UnknownDataset or
    /// GenerationInProgress.
    auto generate(const std::string& id, std::optional<Strategy> strategy) -> BundleInfo;
    [[nodiscard]] auto bundle_info(const std::string& id) const -> std::optional<BundleInfo>;

    /// Throws UnknownDataset or NoActiveBundle.
    auto chat(const std::string& id, const std::string& session, std::string_view utterance, std::string_view locale = "en")
        -> Answer;
    /// Throws UnknownDataset or UnknownTurn.
    auto rate(const std::string& id, const std::string& session, std::size_t turn, int rating) -> void;
    [[nodiscard]] auto log(const std::string& id) const -> std::vector<InteractionRecord>;

    [[nodiscard]] auto ids() const -> std::vector<std::string>;
    [[nodiscard]] auto config() const -> const AppConfig& { return config_; }

private:
    struct Dataset {
        std::string id;
        std::filesystem::path dir;
        SourceMeta source;
        std::shared_ptr<const Table> table;
        std::vector<DataSchema> versions;  ///< versions[i] is version i+1
        std::shared_ptr<const BotBundle> bundle;
        std::optional<BundleInfo> info;
        std::shared_ptr<InteractionLog> log;
        std::shared_ptr<Conversation> conversation;
        std::mutex queue;  ///< serializes edits and generation
        std::atomic<bool> generating{false};
        mutable std::mutex state;  ///< guards the fields above for readers
    };

    auto find(const std::string& id) const -> std::shared_ptr<Dataset>;
    auto load_dataset(const std::filesystem::path& dir) -> std::shared_ptr<Dataset>;
    auto activate(Dataset& d, std::shared_ptr<const BotBundle> bundle, BundleInfo info) -> void;
    auto now_seconds() const -> std::int64_t;

    AppConfig config_;
    std::shared_ptr<FallbackClient> fallback_;
    Clock clock_;
    std::filesystem::path root_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Dataset>> datasets_;
    std::size_t next_id_ = 1;
};

/// HTTP status for a library error code.
auto http_status(ErrorCode code) -> int;
auto error_body(ErrorCode code, const std::string& message, const std::string& detail = {}) -> nlohmann::json;

/// REST facade over a registry. Optionally serves a static UI directory.
class HttpService {
public:
    explicit HttpService(Registry& registry, std::optional<std::filesystem::path> ui_dir = std::nullopt);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    auto operator=(const HttpService&) -> HttpService& = delete;

    /// Binds and blocks until stop(). Returns false when the port is unavailable.
    auto listen(const std::string& host, int port) -> bool;
    /// Binds to an ephemeral port; returns it, or -1.
    auto bind_any(const std::string& host) -> int;
    /// Serves on a socket bound with bind_any; blocks until stop().
    auto serve_bound() -> bool;
    auto stop() -> void;
    auto wait_until_ready() const -> void;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace tabot
