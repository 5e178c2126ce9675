#include <httplib.h>

#include "tabot/service.hpp"

namespace tabot {

using nlohmann::json;

auto http_status(ErrorCode code) -> int {
    switch (code) {
        case ErrorCode::UnknownDataset:
        case ErrorCode::UnknownTurn: return 404;
        case ErrorCode::NoActiveBundle:
        case ErrorCode::GenerationInProgress: return 409;
        case ErrorCode::MalformedCsv:
        case ErrorCode::DuplicateColumnName:
        case ErrorCode::EmptyInput:
        case ErrorCode::EmptyUtterance:
        case ErrorCode::InvalidChoice: return 400;
        case ErrorCode::UnknownField:
        case ErrorCode::SynonymCollision:
        case ErrorCode::GroupMembershipConflict:
        case ErrorCode::CompositeShadowsField:
        case ErrorCode::InvalidCommand: return 422;
        case ErrorCode::FallbackUnavailable: return 502;
        default: return 500;
    }
}

auto error_body(ErrorCode code, const std::string& message, const std::string& detail) -> json {
    return {{"formatVersion", kApiVersion},
            {"error", {{"code", error_code_name(code)}, {"message", message}, {"detail", detail}}}};
}

namespace {

auto send(httplib::Response& res, int status, json body) -> void {
    if (body.is_object() && !body.contains("formatVersion")) body["formatVersion"] = kApiVersion;
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

auto send_error(httplib::Response& res, const Error& e) -> void {
    json body = error_body(e.code(), e.what(), e.detail());
    if (const auto* rejected = dynamic_cast<const EnrichmentRejected*>(&e)) {
        json diags = json::array();
        for (const auto& d : rejected->diagnostics()) {
            diags.push_back({{"index", d.index},
                             {"code", error_code_name(d.code)},
                             {"message", d.message},
                             {"detail", d.detail}});
        }
        body["error"]["diagnostics"] = std::move(diags);
        send(res, 422, std::move(body));
        return;
    }
    send(res, http_status(e.code()), std::move(body));
}

auto parse_body(const httplib::Request& req) -> json {
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidCommand, "request body is not valid JSON");
    return j;
}

auto require_string(const json& j, const char* key) -> std::string {
    if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
        throw Error(ErrorCode::InvalidCommand, std::string("missing string field '") + key + "'", key);
    }
    return j[key].get<std::string>();
}

auto schema_body(const std::string& id, int version, const DataSchema& schema) -> json {
    return {{"id", id}, {"version", version}, {"schema", save_schema(schema)}};
}

}  // namespace

struct HttpService::Impl {
    Registry& registry;
    httplib::Server server;

    explicit Impl(Registry& r) : registry(r) {}

    /// Runs a handler, mapping library errors onto structured responses.
    template <typename F>
    auto guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, e);
            } catch (const json::exception& e) {
                send(res, 400, error_body(ErrorCode::InvalidCommand, e.what()));
            }
        };
    }

    auto routes() -> void {
        server.Post("/datasets", guarded([this](const httplib::Request& req, httplib::Response& res) {
            UploadOptions opts;
            if (req.has_param("origin")) opts.origin = req.get_param_value("origin");
            if (req.has_param("delimiter")) {
                std::string d = req.get_param_value("delimiter");
                if (d == "\\t" || d == "tab") d = "\t";
                if (d.size() != 1) throw Error(ErrorCode::MalformedCsv, "delimiter must be one character", d);
                opts.delimiter = d.front();
            }
            auto created = registry.create(req.body, opts);
            send(res, 201, schema_body(created.id, created.version, created.schema));
        }));

        server.Get("/datasets", guarded([this](const httplib::Request&, httplib::Response& res) {
            json list = json::array();
            for (const auto& id : registry.ids()) {
                auto info = registry.bundle_info(id);
                list.push_back({{"id", id}, {"bot", info ? bundle_info_to_json(*info) : json()}});
            }
            send(res, 200, {{"datasets", list}});
        }));

        server.Get(R"(/datasets/([^/]+)/schema)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::string id = req.matches[1];
            auto [version, schema] = registry.schema(id);
            send(res, 200, schema_body(id, version, schema));
        }));

        server.Patch(R"(/datasets/([^/]+)/schema)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::string id = req.matches[1];
            json body = parse_body(req);
            const json& list = body.is_object() && body.contains("commands") ? body["commands"] : body;
            if (!list.is_array()) throw Error(ErrorCode::InvalidCommand, "expected an array of commands");
            std::vector<EnrichmentCommand> commands;
            std::vector<CommandDiagnostic> diagnostics;
            for (std::size_t i = 0; i < list.size(); ++i) {
                try {
                    commands.push_back(command_from_json(list[i]));
                } catch (const Error& e) {
                    diagnostics.push_back({i, e.code(), e.what(), e.detail()});
                }
            }
            if (!diagnostics.empty()) throw EnrichmentRejected(std::move(diagnostics));
            auto [version, schema] = registry.patch(id, commands);
            send(res, 200, schema_body(id, version, schema));
        }));

        server.Post(R"(/datasets/([^/]+)/bot)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::string id = req.matches[1];
            std::optional<Strategy> strategy;
            if (!req.body.empty()) {
                json body = parse_body(req);
                if (body.is_object() && body.contains("strategy") && body["strategy"].is_string()) {
                    std::string s = body["strategy"].get<std::string>();
                    if (s != "auto") {
                        strategy = parse_strategy(s);
                        if (!strategy) throw Error(ErrorCode::InvalidCommand, "unknown strategy '" + s + "'", s);
                    }
                }
            }
            send(res, 201, {{"id", id}, {"bot", bundle_info_to_json(registry.generate(id, strategy))}});
        }));

        server.Get(R"(/datasets/([^/]+)/bot)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::string id = req.matches[1];
            auto info = registry.bundle_info(id);
            if (!info) throw Error(ErrorCode::NoActiveBundle, "dataset '" + id + "' has no active bot", id);
            send(res, 200, {{"id", id}, {"bot", bundle_info_to_json(*info)}});
        }));

        server.Post(R"(/datasets/([^/]+)/chat)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::string id = req.matches[1];
            json body = parse_body(req);
            std::string session = require_string(body, "sessionId");
            std::string utterance = require_string(body, "utterance");
            std::string locale = body.value("locale", std::string("en"));
            send(res, 200, {{"sessionId", session}, {"answer", answer_to_json(registry.chat(id, session, utterance, locale))}});
        }));

        server.Post(R"(/datasets/([^/]+)/chat/([^/]+)/rating)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        std::string id = req.matches[1];
                        std::string session = req.matches[2];
                        json body = parse_body(req);
                        if (!body.is_object() || !body.contains("turn") || !body["turn"].is_number_unsigned() ||
                            !body.contains("rating") || !body["rating"].is_number_integer()) {
                            throw Error(ErrorCode::InvalidCommand, "expected {turn, rating}");
                        }
                        int rating = body["rating"].get<int>();
                        if (rating != 1 && rating != -1) throw Error(ErrorCode::InvalidCommand, "rating must be 1 or -1");
                        registry.rate(id, session, body["turn"].get<std::size_t>(), rating);
                        send(res, 204, json());
                        res.body.clear();
                    }));

        server.Get(R"(/datasets/([^/]+)/log)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::string id = req.matches[1];
            json records = json::array();
            for (const auto& r : registry.log(id)) records.push_back(record_to_json(r));
            send(res, 200, {{"id", id}, {"records", records}});
        }));

        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const Error& e) {
                send_error(res, e);
            } catch (const std::exception& e) {
                send(res, 500, error_body(ErrorCode::Io, "internal error", e.what()));
            } catch (...) {
                send(res, 500, error_body(ErrorCode::Io, "internal error"));
            }
        });
    }
};

HttpService::HttpService(Registry& registry, std::optional<std::filesystem::path> ui_dir)
    : impl_(std::make_unique<Impl>(registry)) {
    impl_->routes();
    if (ui_dir) impl_->server.set_mount_point("/", ui_dir->string());
}

HttpService::~HttpService() { stop(); }

auto HttpService::listen(const std::string& host, int port) -> bool { return impl_->server.listen(host, port); }

auto HttpService::bind_any(const std::string& host) -> int { return impl_->server.bind_to_any_port(host); }

auto HttpService::serve_bound() -> bool { return impl_->server.listen_after_bind(); }

auto HttpService::stop() -> void {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

auto HttpService::wait_until_ready() const -> void { impl_->server.wait_until_ready(); }

}  // namespace tabot
