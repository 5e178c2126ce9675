#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tabot/ingest.hpp"
#include "tabot/service.hpp"

namespace tabot {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

auto summarize(const std::vector<CommandDiagnostic>& d) -> std::string {
    if (d.empty()) return "enrichment rejected";
    return "command " + std::to_string(d.front().index) + ": " + d.front().message;
}

auto read_file(const fs::path& p) -> std::string {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string(), p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Write-then-rename so a crash never leaves a half-written document.
auto write_file(const fs::path& p, std::string_view bytes) -> void {
    fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string(), tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    fs::rename(tmp, p);
}

auto unknown(const std::string& id) -> Error {
    return Error(ErrorCode::UnknownDataset, "unknown dataset '" + id + "'", id);
}

auto format_id(std::size_t n) -> std::string {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ds%06zu", n);
    return buf;
}

auto csv_options(const SourceMeta& source, char delimiter) -> CsvOptions {
    CsvOptions o;
    o.delimiter = delimiter;
    o.source = source;
    return o;
}

}  // namespace

EnrichmentRejected::EnrichmentRejected(std::vector<CommandDiagnostic> diagnostics)
    : Error(diagnostics.empty() ? ErrorCode::InvalidCommand : diagnostics.front().code, summarize(diagnostics)),
      diagnostics_(std::move(diagnostics)) {}

auto bundle_info_to_json(const BundleInfo& info) -> json {
    return {{"strategy", strategy_name(info.strategy)},
            {"intentCount", info.intent_count},
            {"entityCount", info.entity_count},
            {"schemaVersion", info.schema_version},
            {"generatorVersion", info.generator_version}};
}

Registry::Registry(AppConfig config, std::shared_ptr<FallbackClient> fallback, Clock clock)
    : config_(std::move(config)),
      fallback_(fallback ? std::move(fallback) : make_fallback_client(config_.fallback_url, config_.fallback_timeout)),
      clock_(std::move(clock)),
      root_(config_.storage_dir) {
    fs::create_directories(root_);
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        auto d = load_dataset(dir);
        datasets_[d->id] = d;
        if (d->id.size() > 2) {
            try {
                next_id_ = std::max(next_id_, static_cast<std::size_t>(std::stoull(d->id.substr(2))) + 1);
            } catch (const std::exception&) {
            }
        }
    }
}

auto Registry::now_seconds() const -> std::int64_t {
    return std::chrono::duration_cast<std::chrono::seconds>(clock_().time_since_epoch()).count();
}

auto Registry::load_dataset(const fs::path& dir) -> std::shared_ptr<Dataset> {
    auto d = std::make_shared<Dataset>();
    d->dir = dir;
    json meta = json::parse(read_file(dir / "meta.json"));
    d->id = meta.at("id").get<std::string>();
    d->source.origin = meta.value("origin", "");
    if (meta.contains("importedAt") && meta["importedAt"].is_number_integer()) {
        d->source.imported_at = meta["importedAt"].get<std::int64_t>();
    }
    char delimiter = meta.value("delimiter", std::string(",")).front();
    d->table = std::make_shared<const Table>(load_csv(read_file(dir / "source.csv"), csv_options(d->source, delimiter)));
    for (int v = 1; fs::exists(dir / "schema" / ("v" + std::to_string(v) + ".json")); ++v) {
        d->versions.push_back(load_schema(json::parse(read_file(dir / "schema" / ("v" + std::to_string(v) + ".json")))));
    }
    if (d->versions.empty()) d->versions.push_back(build_default_schema(*d->table));
    d->log = std::make_shared<InteractionLog>(dir / "log.jsonl");
    if (fs::exists(dir / "bundle.json") && fs::exists(dir / "bundle-meta.json")) {
        json bmeta = json::parse(read_file(dir / "bundle-meta.json"));
        int version = bmeta.value("schemaVersion", 0);
        if (version == static_cast<int>(d->versions.size())) {
            auto bundle = std::make_shared<const BotBundle>(load_bundle(json::parse(read_file(dir / "bundle.json"))));
            BundleInfo info{bundle->strategy, bundle->intents.size(), bundle->entities.size(), version,
                            bundle->generator_version};
            activate(*d, std::move(bundle), info);
        }
    }
    return d;
}

auto Registry::activate(Dataset& d, std::shared_ptr<const BotBundle> bundle, BundleInfo info) -> void {
    DialogueContext ctx;
    ctx.engine = std::make_shared<const IntentEngine>(bundle);
    ctx.table = d.table;
    ctx.fallback = fallback_;
    ctx.config.page_size = config_.page_size;
    ctx.config.session_ttl = config_.session_ttl;
    auto conversation = std::make_shared<Conversation>(std::move(ctx), d.log, clock_);
    std::lock_guard lock(d.state);
    d.bundle = std::move(bundle);
    d.info = info;
    d.conversation = std::move(conversation);
}

auto Registry::find(const std::string& id) const -> std::shared_ptr<Dataset> {
    std::lock_guard lock(mutex_);
    auto it = datasets_.find(id);
    if (it == datasets_.end()) throw unknown(id);
    return it->second;
}

auto Registry::create(std::string_view csv, const UploadOptions& options) -> Created {
    SourceMeta source{options.origin, options.imported_at ? options.imported_at : std::optional(now_seconds())};
    auto table = std::make_shared<const Table>(load_csv(csv, csv_options(source, options.delimiter)));
    DataSchema schema = build_default_schema(*table);

    auto d = std::make_shared<Dataset>();
    {
        std::lock_guard lock(mutex_);
        d->id = format_id(next_id_++);
    }
    d->dir = root_ / d->id;
    d->source = source;
    d->table = table;
    d->versions.push_back(schema);
    write_file(d->dir / "source.csv", csv);
    write_file(d->dir / "schema" / "v1.json", save_schema(schema).dump(2));
    json meta{{"id", d->id}, {"origin", source.origin}, {"delimiter", std::string(1, options.delimiter)}};
    meta["importedAt"] = source.imported_at ? json(*source.imported_at) : json();
    write_file(d->dir / "meta.json", meta.dump(2));
    d->log = std::make_shared<InteractionLog>(d->dir / "log.jsonl");
    {
        std::lock_guard lock(mutex_);
        datasets_[d->id] = d;
    }
    return {d->id, 1, schema};
}

auto Registry::schema(const std::string& id) const -> std::pair<int, DataSchema> {
    auto d = find(id);
    std::lock_guard lock(d->state);
    return {static_cast<int>(d->versions.size()), d->versions.back()};
}

auto Registry::patch(const std::string& id, const std::vector<EnrichmentCommand>& commands) -> std::pair<int, DataSchema> {
    auto d = find(id);
    std::lock_guard queue(d->queue);
    DataSchema schema;
    {
        std::lock_guard lock(d->state);
        schema = d->versions.back();
    }
    std::vector<CommandDiagnostic> diagnostics;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        try {
            schema = apply_enrichment(schema, commands[i]);
        } catch (const Error& e) {
            diagnostics.push_back({i, e.code(), e.what(), e.detail()});
        }
    }
    if (!diagnostics.empty()) throw EnrichmentRejected(std::move(diagnostics));
    int version = 0;
    {
        std::lock_guard lock(d->state);
        d->versions.push_back(schema);
        version = static_cast<int>(d->versions.size());
        d->bundle.reset();
        d->info.reset();
        d->conversation.reset();
    }
    write_file(d->dir / "schema" / ("v" + std::to_string(version) + ".json"), save_schema(schema).dump(2));
    std::error_code ec;
    fs::remove(d->dir / "bundle-meta.json", ec);
    return {version, schema};
}

auto Registry::generate(const std::string& id, std::optional<Strategy> strategy) -> BundleInfo {
    auto d = find(id);
    bool expected = false;
    if (!d->generating.compare_exchange_strong(expected, true)) {
        throw Error(ErrorCode::GenerationInProgress, "generation already running for dataset '" + id + "'", id);
    }
    struct Reset {
        std::atomic<bool>& flag;
        ~Reset() { flag = false; }
    } reset{d->generating};

    std::lock_guard queue(d->queue);
    DataSchema schema;
    int version = 0;
    {
        std::lock_guard lock(d->state);
        schema = d->versions.back();
        version = static_cast<int>(d->versions.size());
    }
    GeneratorConfig gc;
    gc.max_expanded_intents = config_.max_expanded_intents;
    gc.matcher = config_.matcher;
    gc.force = strategy;
    Strategy chosen = select_strategy(schema, catalog(), gc);
    auto bundle = std::make_shared<const BotBundle>(tabot::generate(schema, catalog(), chosen, gc.matcher));
    BundleInfo info{chosen, bundle->intents.size(), bundle->entities.size(), version, bundle->generator_version};
    write_file(d->dir / "bundle.json", save_bundle(*bundle).dump(2));
    write_file(d->dir / "bundle-meta.json", json{{"schemaVersion", version}}.dump(2));
    activate(*d, std::move(bundle), info);
    return info;
}

auto Registry::bundle_info(const std::string& id) const -> std::optional<BundleInfo> {
    auto d = find(id);
    std::lock_guard lock(d->state);
    return d->info;
}

auto Registry::chat(const std::string& id, const std::string& session, std::string_view utterance, std::string_view locale)
    -> Answer {
    auto d = find(id);
    std::shared_ptr<Conversation> conversation;
    {
        std::lock_guard lock(d->state);
        conversation = d->conversation;
    }
    if (!conversation) throw Error(ErrorCode::NoActiveBundle, "dataset '" + id + "' has no active bot; generate one first", id);
    return conversation->chat(session, utterance, locale);
}

auto Registry::rate(const std::string& id, const std::string& session, std::size_t turn, int rating) -> void {
    auto d = find(id);
    d->log->rate(session, turn, rating,
                 std::chrono::duration_cast<std::chrono::milliseconds>(clock_().time_since_epoch()).count());
}

auto Registry::log(const std::string& id) const -> std::vector<InteractionRecord> {
    return find(id)->log->records();
}

auto Registry::ids() const -> std::vector<std::string> {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, d] : datasets_) out.push_back(id);
    return out;
}

}  // namespace tabot
