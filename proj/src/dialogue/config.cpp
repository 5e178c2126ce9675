#include <cstdlib>
#include <fstream>

#include "tabot/dialogue.hpp"
#include "tabot/error.hpp"
#include "tabot/parse.hpp"

namespace tabot {

using nlohmann::json;

auto process_env() -> EnvLookup {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (v == nullptr) return std::nullopt;
        return std::string(v);
    };
}

namespace {

auto bad_key(const std::string& key, const std::string& why) -> Error {
    return Error(ErrorCode::InvalidCommand, "config " + key + ": " + why, key);
}

auto as_number(const std::string& key, const std::string& s) -> double {
    if (auto v = parse::floating(s)) return *v;
    throw bad_key(key, "not a number: '" + s + "'");
}

auto as_count(const std::string& key, double v) -> std::size_t {
    if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) throw bad_key(key, "must be a positive integer");
    return static_cast<std::size_t>(v);
}

auto check_weights(const AppConfig& c) -> void {
    const auto& m = c.matcher;
    if (m.w_lex < 0 || m.w_slot < 0 || m.w_lex + m.w_slot <= 0) throw bad_key("matcher", "weights must be non-negative");
    if (m.accept_threshold < 0 || m.accept_threshold > 1) throw bad_key("acceptThreshold", "must lie in [0, 1]");
    if (c.port < 0 || c.port > 65535) throw bad_key("port", "out of range");
}

/// Applies one setting given as text (file values are stringified first).
auto apply(AppConfig& c, const std::string& key, const std::string& value) -> void {
    if (key == "host") {
        c.host = value;
    } else if (key == "port") {
        c.port = static_cast<int>(as_count(key, as_number(key, value)));
    } else if (key == "wLex") {
        c.matcher.w_lex = as_number(key, value);
    } else if (key == "wSlot") {
        c.matcher.w_slot = as_number(key, value);
    } else if (key == "acceptThreshold") {
        c.matcher.accept_threshold = as_number(key, value);
    } else if (key == "pageSize") {
        c.page_size = as_count(key, as_number(key, value));
    } else if (key == "maxExpandedIntents") {
        c.max_expanded_intents = as_count(key, as_number(key, value));
    } else if (key == "fallbackUrl") {
        c.fallback_url = value;
    } else if (key == "fallbackTimeoutMs") {
        c.fallback_timeout = std::chrono::milliseconds(as_count(key, as_number(key, value)));
    } else if (key == "storageDir") {
        c.storage_dir = value;
    } else if (key == "sessionTtlMinutes") {
        c.session_ttl = std::chrono::minutes(as_count(key, as_number(key, value)));
    } else {
        throw bad_key(key, "unknown setting");
    }
}

const std::pair<const char*, const char*> kEnvKeys[] = {
    {"TABOT_HOST", "host"},
    {"TABOT_PORT", "port"},
    {"TABOT_W_LEX", "wLex"},
    {"TABOT_W_SLOT", "wSlot"},
    {"TABOT_ACCEPT_THRESHOLD", "acceptThreshold"},
    {"TABOT_PAGE_SIZE", "pageSize"},
    {"TABOT_MAX_EXPANDED_INTENTS", "maxExpandedIntents"},
    {"TABOT_FALLBACK_URL", "fallbackUrl"},
    {"TABOT_FALLBACK_TIMEOUT_MS", "fallbackTimeoutMs"},
    {"TABOT_STORAGE_DIR", "storageDir"},
    {"TABOT_SESSION_TTL_MINUTES", "sessionTtlMinutes"},
};

}  // namespace

auto config_from_json(const json& j, AppConfig base) -> AppConfig {
    if (!j.is_object()) throw bad_key("/", "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (value.is_string()) {
            apply(base, key, value.get<std::string>());
        } else if (value.is_number()) {
            apply(base, key, value.dump());
        } else {
            throw bad_key(key, "expected a string or a number");
        }
    }
    check_weights(base);
    return base;
}

auto config_to_json(const AppConfig& c) -> json {
    return {{"host", c.host},
            {"port", c.port},
            {"wLex", c.matcher.w_lex},
            {"wSlot", c.matcher.w_slot},
            {"acceptThreshold", c.matcher.accept_threshold},
            {"pageSize", c.page_size},
            {"maxExpandedIntents", c.max_expanded_intents},
            {"fallbackUrl", c.fallback_url},
            {"fallbackTimeoutMs", c.fallback_timeout.count()},
            {"storageDir", c.storage_dir},
            {"sessionTtlMinutes", c.session_ttl.count()}};
}

auto load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) -> AppConfig {
    AppConfig c;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw Error(ErrorCode::Io, "cannot read config " + file->string(), file->string());
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) throw bad_key(file->string(), "not valid JSON");
        c = config_from_json(j, c);
    }
    for (const auto& [var, key] : kEnvKeys) {
        if (auto v = env(var)) apply(c, key, *v);
    }
    check_weights(c);
    return c;
}

}  // namespace tabot
