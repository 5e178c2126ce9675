#include <httplib.h>

#include "tabot/dialogue.hpp"
#include "tabot/error.hpp"
#include "tabot/query.hpp"

namespace tabot {

using nlohmann::json;

auto fallback_request_to_json(const FallbackRequest& r) -> json {
    json fields = json::array();
    for (const auto& [name, type] : r.fields) fields.push_back({{"name", name}, {"type", field_type_name(type)}});
    return {{"question", r.question}, {"fields", std::move(fields)}, {"language", r.language}};
}

auto fallback_request(std::string_view question, const DataSchema& schema) -> FallbackRequest {
    FallbackRequest r;
    r.question = std::string(question);
    r.language = schema.language;
    for (const auto& f : schema.fields) r.fields.emplace_back(f.name, f.type);
    return r;
}

auto StubFallbackClient::translate(const FallbackRequest& /*request*/) -> std::string {
    throw Error(ErrorCode::FallbackUnavailable, "no fallback endpoint configured");
}

auto MockFallbackClient::translate(const FallbackRequest& request) -> std::string {
    std::lock_guard lock(mutex_);
    ++calls_;
    last_ = request;
    if (sql_.empty()) throw Error(ErrorCode::FallbackUnavailable, "mock fallback endpoint is down");
    return sql_;
}

auto MockFallbackClient::calls() const -> std::size_t {
    std::lock_guard lock(mutex_);
    return calls_;
}

auto MockFallbackClient::last_request() const -> std::optional<FallbackRequest> {
    std::lock_guard lock(mutex_);
    return last_;
}

HttpFallbackClient::HttpFallbackClient(std::string url, std::chrono::milliseconds timeout) : timeout_(timeout) {
    const std::string scheme = "http://";
    if (url.rfind(scheme, 0) != 0) {
        throw Error(ErrorCode::InvalidCommand, "fallback URL must start with http://", url);
    }
    auto slash = url.find('/', scheme.size());
    scheme_host_port_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

auto HttpFallbackClient::translate(const FallbackRequest& request) -> std::string {
    httplib::Client client(scheme_host_port_);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(path_, fallback_request_to_json(request).dump(), "application/json");
    if (!res) {
        throw Error(ErrorCode::FallbackUnavailable, "fallback endpoint unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error(ErrorCode::FallbackUnavailable, "fallback endpoint answered HTTP " + std::to_string(res->status));
    }
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
        throw Error(ErrorCode::FallbackUnavailable, "fallback endpoint sent a malformed reply");
    }
    if (body.contains("sql") && body.at("sql").is_string()) return body.at("sql").get<std::string>();
    std::string why = body.contains("error") && body.at("error").is_string() ? body.at("error").get<std::string>()
                                                                           : "reply has neither sql nor error";
    throw Error(ErrorCode::FallbackUnavailable, "fallback endpoint: " + why);
}

auto make_fallback_client(const std::string& url, std::chrono::milliseconds timeout) -> std::shared_ptr<FallbackClient> {
    if (url.empty()) return std::make_shared<StubFallbackClient>();
    return std::make_shared<HttpFallbackClient>(url, timeout);
}

namespace {

constexpr const char* kHelpQuestion = "What kind of questions can I ask?";

auto error_answer(std::string text, ErrorCode code) -> Answer {
    Answer a;
    a.kind = AnswerKind::Error;
    a.text = std::move(text) + " You can ask \"" + kHelpQuestion + "\" to see what I understand.";
    a.suggested_replies.emplace_back(kHelpQuestion);
    a.error = code;
    return a;
}

}  // namespace

auto route_fallback(std::string_view utterance, const DialogueContext& context)
    -> std::pair<Answer, std::optional<ResultSet>> {
    const auto& schema = context.engine->bundle().schema;
    std::string sql;
    try {
        if (!context.fallback) throw Error(ErrorCode::FallbackUnavailable, "no fallback client");
        sql = context.fallback->translate(fallback_request(utterance, schema));
    } catch (const std::exception&) {
        return {error_answer("Sorry, I did not understand that question.", ErrorCode::FallbackUnavailable), std::nullopt};
    }
    ResultSet result;
    try {
        QueryPlan plan = parse_sql(sql, schema);
        result = execute(plan, *context.table, schema);
    } catch (const std::exception&) {
        return {error_answer("Sorry, the fallback produced an invalid query.", ErrorCode::InvalidSql), std::nullopt};
    }
    Answer a;
    a.kind = AnswerKind::FallbackAnswer;
    a.fallback_warning = true;
    a.text = "\xE2\x9A\xA0 approximate: " + format_result(result);  // "⚠ approximate: "
    return {std::move(a), std::move(result)};
}

}  // namespace tabot
