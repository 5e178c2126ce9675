#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "support.hpp"
#include "tabot/error.hpp"
#include "tabot/service.hpp"

using namespace tabot;
using nlohmann::json;

namespace {

auto fixed_clock() -> Clock {
    return [] { return std::chrono::system_clock::time_point(std::chrono::seconds(1700000000)); };
}

auto config_in(const std::filesystem::path& dir) -> AppConfig {
    AppConfig c;
    c.storage_dir = dir.string();
    c.page_size = 3;
    return c;
}

/// Serves a registry on an ephemeral port for the lifetime of the object.
class Running {
public:
    explicit Running(Registry& registry) : service_(registry) {
        port_ = service_.bind_any("127.0.0.1");
        REQUIRE(port_ > 0);
        thread_ = std::thread([this] { service_.serve_bound(); });
        service_.wait_until_ready();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    }
    ~Running() {
        service_.stop();
        thread_.join();
    }
    Running(const Running&) = delete;
    auto operator=(const Running&) -> Running& = delete;

    auto client() -> httplib::Client& { return *client_; }

private:
    HttpService service_;
    int port_ = -1;
    std::thread thread_;
    std::unique_ptr<httplib::Client> client_;
};

auto body(const httplib::Result& r) -> json {
    REQUIRE(r);
    return json::parse(r->body);
}

}  // namespace

TEST_CASE("registry lifecycle on disk") {
    testing::TempDir dir("registry");
    std::string csv = testing::read_text(testing::fixture_path("officials.csv"));
    std::string id;
    {
        Registry r(config_in(dir.path()), nullptr, fixed_clock());
        auto created = r.create(csv, {"officials.csv", ',', std::nullopt});
        id = created.id;
        CHECK(created.version == 1);
        CHECK_THROWS_AS(r.chat(id, "s", "How many rows are there?"), Error);
        auto [v, schema] = r.patch(id, testing::f1_enrichment());
        CHECK(v == 2);
        CHECK(schema == testing::f1_schema());
        auto info = r.generate(id, std::nullopt);
        CHECK(info.schema_version == 2);
        auto a = r.chat(id, "s", "How many women are there?");
        CHECK(a.text == "4");
    }
    // A fresh registry over the same directory restores schema, bundle and log.
    Registry again(config_in(dir.path()), nullptr, fixed_clock());
    CHECK(again.ids() == std::vector<std::string>{id});
    CHECK(again.schema(id).first == 2);
    REQUIRE(again.bundle_info(id));
    CHECK(again.chat(id, "s", "How many women are there?").text == "4");
    CHECK(again.log(id).size() == 2);
    auto second = again.create("a,b\n1,2\n");
    CHECK(second.id != id);
}

TEST_CASE("a schema edit deactivates the bundle until regeneration") {
    testing::TempDir dir("patch");
    Registry r(config_in(dir.path()), nullptr, fixed_clock());
    auto id = r.create(testing::read_text(testing::fixture_path("officials.csv"))).id;
    r.generate(id, Strategy::Expanded);
    r.patch(id, {enrich::AddSynonym{"salary", "en", "pay"}});
    CHECK_FALSE(r.bundle_info(id));
    try {
        (void)r.chat(id, "s", "How many rows are there?");
        FAIL("expected NoActiveBundle");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoActiveBundle);
    }
    try {
        r.patch(id, {enrich::AddSynonym{"salary", "en", "wage"}, enrich::AddSynonym{"height", "en", "tall"}});
        FAIL("expected EnrichmentRejected");
    } catch (const EnrichmentRejected& e) {
        REQUIRE(e.diagnostics().size() == 1);
        CHECK(e.diagnostics()[0].index == 1);
        CHECK(e.diagnostics()[0].code == ErrorCode::UnknownField);
    }
    CHECK(r.schema(id).first == 2);  // the rejected patch left no version behind
}

TEST_CASE("HTTP endpoints") {
    testing::TempDir dir("http");
    Registry registry(config_in(dir.path()), std::make_shared<MockFallbackClient>("SELECT COUNT(*) FROM t"), fixed_clock());
    Running server(registry);
    auto& c = server.client();

    auto created = c.Post("/datasets?origin=officials.csv", testing::read_text(testing::fixture_path("officials.csv")), "text/csv");
    REQUIRE(created);
    CHECK(created->status == 201);
    auto doc = body(created);
    std::string id = doc["id"];
    CHECK(doc["version"] == 1);
    CHECK(doc["formatVersion"] == kApiVersion);
    CHECK(doc["schema"]["fields"].size() == 6);

    auto bad_csv = c.Post("/datasets", "a,a\n1,2\n", "text/csv");
    CHECK(bad_csv->status == 400);
    CHECK(body(bad_csv)["error"]["code"] == "DuplicateColumnName");

    CHECK(c.Get("/datasets/nope/schema")->status == 404);
    CHECK(c.Get("/datasets/" + id + "/bot")->status == 409);
    auto early = c.Post("/datasets/" + id + "/chat", R"({"sessionId":"s","utterance":"hi"})", "application/json");
    CHECK(early->status == 409);

    json commands = json::array();
    for (const auto& cmd : testing::f1_enrichment()) commands.push_back(command_to_json(cmd));
    auto patched = c.Patch("/datasets/" + id + "/schema", json{{"commands", commands}}.dump(), "application/json");
    CHECK(patched->status == 200);
    CHECK(body(patched)["version"] == 2);

    auto rejected = c.Patch("/datasets/" + id + "/schema",
                            R"({"commands":[{"op":"addSynonym","field":"height","locale":"en","synonym":"tall"}]})",
                            "application/json");
    CHECK(rejected->status == 422);
    CHECK(body(rejected)["error"]["diagnostics"].size() == 1);

    auto bot = c.Post("/datasets/" + id + "/bot", R"({"strategy":"generic"})", "application/json");
    CHECK(bot->status == 201);
    CHECK(body(bot)["bot"]["strategy"] == "generic");
    CHECK(c.Get("/datasets/" + id + "/bot")->status == 200);

    auto chat = c.Post("/datasets/" + id + "/chat", R"({"sessionId":"s","utterance":"How many women are there?"})",
                       "application/json");
    REQUIRE(chat->status == 200);
    auto answer = body(chat)["answer"];
    CHECK(answer["kind"] == "Direct");
    CHECK(answer["text"] == "4");

    auto fb = c.Post("/datasets/" + id + "/chat", R"({"sessionId":"s","utterance":"purple monkey dishwasher"})",
                     "application/json");
    CHECK(body(fb)["answer"]["kind"] == "FallbackAnswer");
    CHECK(body(fb)["answer"]["fallbackWarning"] == true);

    auto empty = c.Post("/datasets/" + id + "/chat", R"({"sessionId":"s","utterance":""})", "application/json");
    CHECK(empty->status == 200);
    CHECK(body(empty)["answer"]["kind"] == "Error");

    CHECK(c.Post("/datasets/" + id + "/chat/s/rating", R"({"turn":0,"rating":1})", "application/json")->status == 204);
    CHECK(c.Post("/datasets/" + id + "/chat/s/rating", R"({"turn":42,"rating":1})", "application/json")->status == 404);
    CHECK(c.Post("/datasets/" + id + "/chat/s/rating", R"({"turn":0,"rating":5})", "application/json")->status == 422);
    CHECK(c.Post("/datasets/" + id + "/chat", "not json", "application/json")->status == 422);

    auto log = body(c.Get("/datasets/" + id + "/log"));
    REQUIRE(log["records"].size() == 3);
    CHECK(log["records"][0]["rating"] == 1);

    auto list = body(c.Get("/datasets"));
    CHECK(list["datasets"].size() == 1);
}

TEST_CASE("error codes map onto HTTP statuses") {
    CHECK(http_status(ErrorCode::UnknownDataset) == 404);
    CHECK(http_status(ErrorCode::GenerationInProgress) == 409);
    CHECK(http_status(ErrorCode::MalformedCsv) == 400);
    CHECK(http_status(ErrorCode::SynonymCollision) == 422);
    CHECK(http_status(ErrorCode::FallbackUnavailable) == 502);
    auto b = error_body(ErrorCode::UnknownField, "no such field", "height");
    CHECK(b["error"]["code"] == "UnknownField");
    CHECK(b["error"]["detail"] == "height");
}

TEST_CASE("the HTTP fallback client reports an unreachable endpoint") {
    HttpFallbackClient client("http://127.0.0.1:9/translate", std::chrono::milliseconds(500));
    try {
        (void)client.translate(fallback_request("anything", testing::f1_schema()));
        FAIL("expected FallbackUnavailable");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::FallbackUnavailable);
    }
}

TEST_CASE("the HTTP fallback client reads SQL from a live endpoint") {
    httplib::Server stub;
    json seen;
    stub.Post("/translate", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        res.set_content(R"({"sql":"SELECT COUNT(*) FROM t"})", "application/json");
    });
    int port = stub.bind_to_any_port("127.0.0.1");
    std::thread t([&] { stub.listen_after_bind(); });
    stub.wait_until_ready();
    HttpFallbackClient client("http://127.0.0.1:" + std::to_string(port) + "/translate");
    CHECK(client.translate(fallback_request("how many?", testing::f1_schema())) == "SELECT COUNT(*) FROM t");
    stub.stop();
    t.join();
    CHECK(seen["question"] == "how many?");
    CHECK(seen["fields"].size() == 6);
}
