#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tabot/ingest.hpp"
#include "tabot/parse.hpp"
#include "tabot/query.hpp"
#include "tabot/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tabot;

namespace {

auto read_file(const fs::path& p) -> std::string {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string(), p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

auto read_json(const fs::path& p) -> json {
    json j = json::parse(read_file(p), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Io, p.string() + " is not valid JSON", p.string());
    return j;
}

/// Writes to `path`, or stdout when it is empty or "-".
auto emit(const std::string& path, const std::string& bytes) -> void {
    if (path.empty() || path == "-") {
        std::cout << bytes;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path, path);
    out << bytes;
}

auto delimiter_of(const std::string& s) -> char {
    if (s == "\\t" || s == "tab") return '\t';
    if (s.size() != 1) throw Error(ErrorCode::MalformedCsv, "delimiter must be one character", s);
    return s.front();
}

/// --imported-at, then SOURCE_DATE_EPOCH, then the file's mtime.
auto import_time(const std::optional<std::int64_t>& flag, const fs::path& csv) -> std::int64_t {
    if (flag) return *flag;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        if (auto v = parse::integer(epoch)) return *v;
        throw Error(ErrorCode::InvalidCommand, "SOURCE_DATE_EPOCH is not an integer", epoch);
    }
    auto mtime = fs::last_write_time(csv);
    auto sys = std::chrono::file_clock::to_sys(mtime);
    return std::chrono::duration_cast<std::chrono::seconds>(sys.time_since_epoch()).count();
}

auto load_table(const fs::path& csv, const DataSchema& schema, char delimiter) -> std::shared_ptr<const Table> {
    CsvOptions o;
    o.delimiter = delimiter;
    o.source = schema.source;
    return std::make_shared<const Table>(load_csv(read_file(csv), o));
}

auto config_of(const std::string& file) -> AppConfig {
    return load_config(file.empty() ? std::nullopt : std::optional<fs::path>(file), process_env());
}

auto make_conversation(const std::string& bundle_path, const std::string& csv, char delimiter, const AppConfig& config,
                       Clock clock) -> std::unique_ptr<Conversation> {
    auto bundle = std::make_shared<const BotBundle>(load_bundle(read_json(bundle_path)));
    DialogueContext ctx;
    ctx.table = load_table(csv, bundle->schema, delimiter);
    ctx.engine = std::make_shared<const IntentEngine>(bundle);
    ctx.fallback = make_fallback_client(config.fallback_url, config.fallback_timeout);
    ctx.config.page_size = config.page_size;
    ctx.config.session_ttl = config.session_ttl;
    return std::make_unique<Conversation>(std::move(ctx), std::make_shared<InteractionLog>(), std::move(clock));
}

auto print_answer(const Answer& a) -> void {
    std::cout << a.text << "\n";
    if (a.payload && a.payload->result.shape == ResultShape::Rows) {
        std::cout << "  " << text::join(a.payload->result.columns, " | ") << "\n";
        for (const auto& row : a.payload->result.rows) {
            std::vector<std::string> cells;
            for (const auto& v : row) cells.push_back(format_value(v));
            std::cout << "  " << text::join(cells, " | ") << "\n";
        }
    }
    for (const auto& note : a.interpretation_notes) std::cout << "  (" << note << ")\n";
    for (std::size_t i = 0; i < a.suggested_replies.size(); ++i) {
        std::cout << "  [" << i + 1 << "] " << a.suggested_replies[i] << "\n";
    }
}

HttpService* g_service = nullptr;

extern "C" void on_signal(int) {
    if (g_service != nullptr) g_service->stop();
}

}  // namespace

auto main(int argc, char** argv) -> int {
    CLI::App app{"tabot: conversational access to tabular data"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Load a CSV file and write its default schema");
    std::string ingest_csv, ingest_out = "-", ingest_origin, ingest_delim = ",";
    std::optional<std::int64_t> imported_at;
    ingest->add_option("csv", ingest_csv, "CSV file")->required()->check(CLI::ExistingFile);
    ingest->add_option("-o,--out", ingest_out, "Schema output (default stdout)");
    ingest->add_option("--origin", ingest_origin, "Source description (default: the file name)");
    ingest->add_option("--delimiter", ingest_delim, "Field delimiter");
    ingest->add_option("--imported-at", imported_at, "Import time, Unix seconds");

    // enrich
    auto* enrich = app.add_subcommand("enrich", "Apply enrichment commands to a schema");
    std::string enrich_schema, enrich_commands, enrich_out = "-";
    enrich->add_option("schema", enrich_schema, "Schema document")->required()->check(CLI::ExistingFile);
    enrich->add_option("commands", enrich_commands, "JSON array of commands")->required()->check(CLI::ExistingFile);
    enrich->add_option("-o,--out", enrich_out, "Schema output (default stdout)");

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a bot bundle from a schema");
    std::string gen_schema, gen_out = "-", gen_strategy = "auto", gen_config;
    gen->add_option("schema", gen_schema, "Schema document")->required()->check(CLI::ExistingFile);
    gen->add_option("-o,--out", gen_out, "Bundle output (default stdout)");
    gen->add_option("--strategy", gen_strategy, "auto, expanded or generic")
        ->check(CLI::IsMember({"auto", "expanded", "generic"}));
    gen->add_option("--config", gen_config, "Config file");

    // eval
    auto* eval = app.add_subcommand("eval", "Answer utterances (one per line) and emit JSONL match reports");
    std::string eval_bundle, eval_csv, eval_queries = "-", eval_out = "-", eval_delim = ",", eval_config;
    eval->add_option("bundle", eval_bundle, "Bundle document")->required()->check(CLI::ExistingFile);
    eval->add_option("csv", eval_csv, "CSV file the bundle was built from")->required()->check(CLI::ExistingFile);
    eval->add_option("-q,--queries", eval_queries, "Utterance file (default stdin)");
    eval->add_option("-o,--out", eval_out, "Report output (default stdout)");
    eval->add_option("--delimiter", eval_delim, "Field delimiter");
    eval->add_option("--config", eval_config, "Config file");

    // repl
    auto* repl = app.add_subcommand("repl", "Chat with a bundle in the terminal");
    std::string repl_bundle, repl_csv, repl_delim = ",", repl_config;
    repl->add_option("bundle", repl_bundle, "Bundle document")->required()->check(CLI::ExistingFile);
    repl->add_option("csv", repl_csv, "CSV file")->required()->check(CLI::ExistingFile);
    repl->add_option("--delimiter", repl_delim, "Field delimiter");
    repl->add_option("--config", repl_config, "Config file");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    std::string serve_config, serve_ui, serve_host, serve_storage;
    int serve_port = 0;
    serve->add_option("--config", serve_config, "Config file");
    serve->add_option("--ui", serve_ui, "Directory of static UI files")->check(CLI::ExistingDirectory);
    serve->add_option("--host", serve_host, "Bind address (overrides config)");
    serve->add_option("--port", serve_port, "Port (overrides config)");
    serve->add_option("--storage", serve_storage, "Storage directory (overrides config)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            CsvOptions o;
            o.delimiter = delimiter_of(ingest_delim);
            o.source.origin = ingest_origin.empty() ? fs::path(ingest_csv).filename().string() : ingest_origin;
            o.source.imported_at = import_time(imported_at, ingest_csv);
            Table table = load_csv(read_file(ingest_csv), o);
            emit(ingest_out, save_schema(build_default_schema(table)).dump(2) + "\n");
        } else if (*enrich) {
            DataSchema schema = load_schema(read_json(enrich_schema));
            json commands = read_json(enrich_commands);
            if (commands.is_object() && commands.contains("commands")) commands = commands["commands"];
            if (!commands.is_array()) throw Error(ErrorCode::InvalidCommand, "expected an array of commands");
            for (std::size_t i = 0; i < commands.size(); ++i) {
                try {
                    schema = apply_enrichment(schema, command_from_json(commands[i]));
                } catch (const Error& e) {
                    throw Error(e.code(), "command " + std::to_string(i) + ": " + e.what(), e.detail());
                }
            }
            emit(enrich_out, save_schema(schema).dump(2) + "\n");
        } else if (*gen) {
            AppConfig config = config_of(gen_config);
            DataSchema schema = load_schema(read_json(gen_schema));
            GeneratorConfig gc;
            gc.max_expanded_intents = config.max_expanded_intents;
            gc.matcher = config.matcher;
            if (gen_strategy != "auto") gc.force = parse_strategy(gen_strategy);
            Strategy s = select_strategy(schema, catalog(), gc);
            BotBundle bundle = generate(schema, catalog(), s, gc.matcher);
            emit(gen_out, save_bundle(bundle).dump(2) + "\n");
            std::cerr << strategy_name(s) << ": " << bundle.intents.size() << " intents, " << bundle.entities.size()
                      << " entities\n";
        } else if (*eval) {
            AppConfig config = config_of(eval_config);
            // A fixed clock keeps reports free of wall-clock state.
            auto conversation = make_conversation(eval_bundle, eval_csv, delimiter_of(eval_delim), config,
                                                  [] { return std::chrono::system_clock::time_point{}; });
            std::string queries = eval_queries == "-" ? std::string(std::istreambuf_iterator<char>(std::cin), {})
                                                      : read_file(eval_queries);
            const IntentEngine& engine = *conversation->context().engine;
            std::istringstream lines(queries);
            std::string line;
            std::string out;
            std::size_t n = 0;
            while (std::getline(lines, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (text::trim(line).empty()) continue;
                json report{{"utterance", line}};
                try {
                    auto u = engine.understand(line);
                    json mentions = json::array();
                    for (const auto& m : u.mentions) mentions.push_back(mention_to_json(m));
                    report["mentions"] = std::move(mentions);
                    report["match"] = match_to_json(u.match);
                } catch (const Error& e) {
                    report["match"] = nullptr;
                    report["error"] = error_code_name(e.code());
                }
                report["answer"] = answer_to_json(conversation->chat("eval-" + std::to_string(n++), line));
                out += report.dump() + "\n";
            }
            emit(eval_out, out);
        } else if (*repl) {
            AppConfig config = config_of(repl_config);
            auto conversation =
                make_conversation(repl_bundle, repl_csv, delimiter_of(repl_delim), config, system_clock());
            std::cout << "Ask a question (Ctrl-D to quit).\n";
            std::string line;
            while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
                if (text::trim(line).empty()) continue;
                print_answer(conversation->chat("repl", line));
            }
        } else if (*serve) {
            AppConfig config = config_of(serve_config);
            if (!serve_host.empty()) config.host = serve_host;
            if (serve_port != 0) config.port = serve_port;
            if (!serve_storage.empty()) config.storage_dir = serve_storage;
            Registry registry(config);
            HttpService service(registry, serve_ui.empty() ? std::nullopt : std::optional<fs::path>(serve_ui));
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << config.host << ":" << config.port << "\n";
            if (!service.listen(config.host, config.port)) {
                std::cerr << "cannot bind " << config.host << ":" << config.port << "\n";
                return 1;
            }
        }
    } catch (const Error& e) {
        std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
