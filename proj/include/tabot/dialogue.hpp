#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tabot/engine.hpp"
#include "tabot/error.hpp"
#include "tabot/ingest.hpp"
#include "tabot/plan.hpp"

namespace tabot {

using Clock = std::function<std::chrono::system_clock::time_point()>;

auto system_clock() -> Clock;

// ---------------------------------------------------------------- answers

enum class AnswerKind { Direct, Clarification, Paged, FallbackAnswer, Error, Help };

auto answer_kind_name(AnswerKind k) -> std::string_view;

/// A slice of a result shown to the user.
struct ResultPage {
    ResultSet result;        ///< rows of this page only
    std::size_t offset = 0;  ///< index of the first row shown
    std::size_t total = 0;   ///< rows in the whole result
};

struct Answer {
    AnswerKind kind = AnswerKind::Direct;
    std::string text;
    std::optional<ResultPage> payload;
    bool fallback_warning = false;
    std::vector<std::string> interpretation_notes;
    /// Choices offered in clarification and presentation states.
    std::vector<std::string> suggested_replies;
    std::optional<std::string> intent;
    std::optional<double> confidence;
    std::optional<ErrorCode> error;
    std::optional<std::size_t> turn;  ///< turn index, for ratings
};

auto answer_to_json(const Answer& a) -> nlohmann::json;

/// "8", "130000", "106333.33" (two decimals at most for floats).
auto format_value(const Value& v) -> std::string;
/// One-line summary of a whole result.
auto format_result(const ResultSet& r) -> std::string;

/// Help text listing what the bundle understands, with one example per
/// pattern category.
auto help_answer(const BotBundle& bundle, std::string_view locale = "en") -> Answer;

// --------------------------------------------------------------- fallback

struct FallbackRequest {
    std::string question;
    std::vector<std::pair<std::string, FieldType>> fields;
    std::string language = "en";
};

auto fallback_request_to_json(const FallbackRequest& r) -> nlohmann::json;
auto fallback_request(std::string_view question, const DataSchema& schema) -> FallbackRequest;

/// Translates a question the bot could not match into SQL. Implementations
/// throw Error{FallbackUnavailable} on any transport or service failure.
class FallbackClient {
public:
    virtual ~FallbackClient() = default;
    virtual auto translate(const FallbackRequest& request) -> std::string = 0;
};

/// No endpoint configured: always unavailable.
class StubFallbackClient final : public FallbackClient {
public:
    auto translate(const FallbackRequest& request) -> std::string override;
};

/// Canned reply for tests: fixed SQL, or unavailability when `sql` is empty.
class MockFallbackClient final : public FallbackClient {
public:
    explicit MockFallbackClient(std::string sql = {}) : sql_(std::move(sql)) {}
    auto translate(const FallbackRequest& request) -> std::string override;
    [[nodiscard]] auto calls() const -> std::size_t;
    [[nodiscard]] auto last_request() const -> std::optional<FallbackRequest>;

private:
    std::string sql_;
    mutable std::mutex mutex_;
    std::size_t calls_ = 0;
    std::optional<FallbackRequest> last_;
};

/// POSTs the request document to an http:// endpoint and reads {sql} or {error}.
class HttpFallbackClient final : public FallbackClient {
public:
    HttpFallbackClient(std::string url, std::chrono::milliseconds timeout = std::chrono::seconds(10));
    auto translate(const FallbackRequest& request) -> std::string override;

private:
    std::string scheme_host_port_;
    std::string path_;
    std::chrono::milliseconds timeout_;
};

auto make_fallback_client(const std::string& url, std::chrono::milliseconds timeout) -> std::shared_ptr<FallbackClient>;

// -------------------------------------------------------------------- log

enum class OutcomeKind { Hit, Miss, Fallback };

auto outcome_kind_name(OutcomeKind k) -> std::string_view;

struct InteractionRecord {
    std::int64_t timestamp_ms = 0;
    std::string session_id;
    std::size_t turn_index = 0;
    std::string utterance;
    OutcomeKind outcome = OutcomeKind::Miss;
    std::optional<std::string> intent;
    std::optional<double> confidence;
    std::optional<int> rating;  ///< latest rating: +1 / -1
    std::vector<std::int64_t> rating_timestamps_ms;
};

auto record_to_json(const InteractionRecord& r) -> nlohmann::json;

/// Append-only interaction sink. Each turn and each rating becomes one JSON
/// line, flushed immediately; the in-memory view folds ratings into their
/// turn. Safe for concurrent writers.
class InteractionLog {
public:
    InteractionLog() = default;
    /// Appends to `path` (created if absent); earlier lines are loaded.
    explicit InteractionLog(std::filesystem::path path);

    auto append(InteractionRecord record) -> void;
    /// Throws UnknownTurn.
    auto rate(const std::string& session_id, std::size_t turn_index, int rating, std::int64_t timestamp_ms) -> void;

    [[nodiscard]] auto records() const -> std::vector<InteractionRecord>;
    [[nodiscard]] auto size() const -> std::size_t;
    [[nodiscard]] auto turns_of(const std::string& session_id) const -> std::size_t;

private:
    auto write_line(const nlohmann::json& j) -> void;

    mutable std::mutex mutex_;
    std::optional<std::filesystem::path> path_;
    std::ofstream out_;
    std::vector<InteractionRecord> records_;
    std::map<std::pair<std::string, std::size_t>, std::size_t> index_;
};

// ---------------------------------------------------------------- session

namespace state {

struct Idle {};

struct AwaitingSlot {
    MatchResult match;
    std::string slot;
    int failures = 0;
};

struct AwaitingGroupChoice {
    std::string group;
    MatchResult match;
    QueryPlan plan;
    std::vector<std::string> options;  ///< members, default first
    int failures = 0;
};

struct AwaitingPresentationChoice {
    ResultSet result;
    MatchResult match;
    bool fallback = false;
    int failures = 0;
};

struct AwaitingPage {
    ResultSet result;
    MatchResult match;
    std::size_t cursor = 0;  ///< first row not yet shown
    bool fallback = false;
};

}  // namespace state

using SessionState = std::variant<state::Idle, state::AwaitingSlot, state::AwaitingGroupChoice,
                                  state::AwaitingPresentationChoice, state::AwaitingPage>;

auto state_name(const SessionState& s) -> std::string_view;

struct TurnSummary {
    std::string utterance;
    AnswerKind kind = AnswerKind::Direct;
};

struct Session {
    std::string id;
    std::string locale = "en";
    SessionState state;
    std::deque<TurnSummary> history;  ///< bounded, most recent last
    std::size_t turns = 0;
    std::chrono::system_clock::time_point last_active{};
};

struct DialogueConfig {
    std::size_t page_size = 10;
    /// Failed replies tolerated in a waiting state before returning to Idle.
    int max_reprompts = 2;
    std::chrono::minutes session_ttl{30};
    std::size_t history_limit = 50;
};

/// Everything a turn needs besides the session. Shared, read-only.
struct DialogueContext {
    std::shared_ptr<const IntentEngine> engine;
    std::shared_ptr<const Table> table;
    std::shared_ptr<FallbackClient> fallback;
    DialogueConfig config;
};

struct TurnResult {
    Answer answer;
    Session session;
    InteractionRecord record;
};

/// One state-machine step. Never throws for bad input: every failure becomes
/// an Error answer.
auto handle_turn(const Session& session, std::string_view utterance, const DialogueContext& context,
                 std::chrono::system_clock::time_point now) -> TurnResult;

/// Low-confidence path: SQL from the client, run through the guarded SQL
/// subset on the in-memory table. Never throws.
auto route_fallback(std::string_view utterance, const DialogueContext& context) -> std::pair<Answer, std::optional<ResultSet>>;

/// Sessions keyed by id with idle expiry; turns of one session are serialized,
/// different sessions run in parallel.
class Conversation {
public:
    Conversation(DialogueContext context, std::shared_ptr<InteractionLog> log, Clock clock = system_clock());

    auto chat(const std::string& session_id, std::string_view utterance, std::string_view locale = "en") -> Answer;
    /// Throws UnknownTurn.
    auto rate(const std::string& session_id, std::size_t turn_index, int rating) -> void;

    [[nodiscard]] auto session(const std::string& session_id) const -> std::optional<Session>;
    [[nodiscard]] auto log() const -> const InteractionLog& { return *log_; }
    [[nodiscard]] auto context() const -> const DialogueContext& { return context_; }
    /// Drops sessions idle for longer than the TTL; returns how many.
    auto expire() -> std::size_t;

private:
    struct Slot {
        std::mutex turn;
        Session session;
    };
    auto slot_for(const std::string& id, std::string_view locale) -> std::shared_ptr<Slot>;

    DialogueContext context_;
    std::shared_ptr<InteractionLog> log_;
    Clock clock_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

// ----------------------------------------------------------------- config

struct AppConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    MatcherConfig matcher;
    std::size_t page_size = 10;
    std::size_t max_expanded_intents = 500;
    std::string fallback_url;  ///< empty: stub client
    std::chrono::milliseconds fallback_timeout{10000};
    std::string storage_dir = "tabot-data";
    std::chrono::minutes session_ttl{30};
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

auto process_env() -> EnvLookup;

/// Defaults, then the JSON file (when given), then TABOT_* variables.
/// Throws InvalidCommand naming the bad key.
auto load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env()) -> AppConfig;
auto config_from_json(const nlohmann::json& j, AppConfig base = {}) -> AppConfig;
auto config_to_json(const AppConfig& c) -> nlohmann::json;

}  // namespace tabot
