// unidm: command-line front end for the data-manipulation pipeline.
//
//   unidm inspect <csv>
//   unidm run   --kind K --table T.csv [--row N] [--attr A] ... [--trace]
//   unidm bench --tasks tasks.jsonl --truth truth.jsonl [--config c.cfg]
//   unidm cache stats|clear --cache cache.jsonl
//   unidm mask  <csv> --attr A --fraction F --seed S --dir OUT
//
// Exit status: 0 success, 1 task failure, 2 usage or configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unidm/unidm.hpp"

namespace fs = std::filesystem;
using namespace unidm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitTaskError = 1;
constexpr int kExitUsage = 2;

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Flags shared by run and bench; each maps onto one configuration key.
struct ConfigFlags {
    std::string config_path;
    std::vector<std::string> sets;
    struct Bound {
        CLI::Option* option;
        std::string key;
        std::string value;
    };
    std::vector<std::unique_ptr<Bound>> bound;

    void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        auto b = std::make_unique<Bound>();
        b->key = key;
        b->option = app->add_option(flag, b->value, help);
        bound.push_back(std::move(b));
    }

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "Flat key=value configuration file");
        app->add_option("--set", sets, "Override any configuration key (key=value), repeatable");
        bind(app, "--mock", "mock_script", "Mock script (JSON Lines); selects the mock backend");
        bind(app, "--backend", "backend", "mock or http");
        bind(app, "--base-url", "base_url", "OpenAI-compatible base URL");
        bind(app, "--endpoint", "endpoint", "completions or chat");
        bind(app, "--model", "model", "Model name");
        bind(app, "--temperature", "temperature", "Sampling temperature");
        bind(app, "--max-tokens", "max_tokens", "Completion token limit");
        bind(app, "--cache", "cache", "Response cache file");
        bind(app, "--demos", "demos", "Demonstration library (JSON Lines)");
        bind(app, "--missing", "missing_sentinel", "CSV text denoting a missing cell");
        bind(app, "--seed", "seed", "Sampling seed");
        bind(app, "--sample-size", "sample_size", "Candidate records scored per task");
        bind(app, "--top-k", "top_k", "Context records kept");
        bind(app, "--attr-count", "attr_count", "Attributes kept by meta-wise retrieval");
        bind(app, "--batch-size", "score_batch_size", "Candidates per scoring prompt");
        bind(app, "--workers", "workers", "Parallel benchmark workers");
        bind(app, "--retrieval", "retrieval", "on/off: context retrieval");
        bind(app, "--meta-wise", "meta_wise", "on/off: meta-wise retrieval");
        bind(app, "--instance-wise", "instance_wise", "on/off: instance-wise retrieval");
        bind(app, "--parsing", "parsing", "on/off: context data parsing");
        bind(app, "--prompt-construction", "prompt_construction", "on/off: cloze target prompt construction");
        bind(app, "--out", "out", "Report path prefix (bench)");
    }

    KeyValues file_values() const {
        if (config_path.empty()) return {};
        KeyValues values = load_config_file(config_path);
        const fs::path dir = fs::path(config_path).parent_path();
        for (auto& [k, v] : values) {
            bool is_path = k == "mock_script" || k == "cache" || k == "demos" || k == "out";
            if (is_path && !v.empty() && fs::path(v).is_relative()) v = (dir / v).string();
        }
        return values;
    }

    KeyValues cli_values() const {
        KeyValues values;
        for (const auto& b : bound)
            if (b->option->count()) values.emplace_back(b->key, b->value);
        for (const auto& s : sets) {
            auto eq = s.find('=');
            if (eq == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "--set expects key=value, got '" + s + "'");
            values.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        return values;
    }

    RunConfig resolve() const { return resolve_config(file_values(), cli_values()); }
};

std::unique_ptr<Backend> make_backend(const RunConfig& cfg) {
    if (cfg.resolved_backend() == "mock")
        return std::make_unique<MockBackend>(load_mock_script(cfg.mock_script), cfg.endpoint);
    HttpBackendOptions opts = http_options_from_env();
    opts.base_url = cfg.base_url;
    opts.style = cfg.endpoint;
    return std::make_unique<HttpBackend>(std::move(opts));
}

std::unique_ptr<ResponseCache> make_cache(const RunConfig& cfg) {
    if (cfg.cache.empty()) return nullptr;
    return std::make_unique<ResponseCache>(cfg.cache);
}

DemoLibrary make_library(const RunConfig& cfg) {
    return cfg.demos.empty() ? DemoLibrary::shipped() : DemoLibrary::load(cfg.demos);
}

Table load_csv_arg(const std::string& path, const std::string& sentinel) {
    if (path == "-") return load_table(std::cin, "stdin", sentinel);
    return load_table_file(path, sentinel);
}

// ------------------------------------------------------------------ inspect

int cmd_inspect(const std::string& path, const std::string& sentinel) {
    Table t = load_csv_arg(path, sentinel);
    std::cout << t.schema().size() << " attributes, " << t.row_count() << " records\n";
    for (const auto& a : t.schema()) {
        std::size_t missing = 0;
        for (const auto& r : t.records()) missing += r.cells[a.position].is_missing() ? 1 : 0;
        std::cout << "  " << a.position << " " << a.name << ": " << (t.row_count() - missing) << " present, "
                  << missing << " missing\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------- run

struct RunFlags {
    std::string kind;
    std::vector<std::string> tables;
    std::vector<std::size_t> rows;
    std::vector<std::string> attrs;
    std::string question;
    std::vector<std::string> schema;
    std::vector<std::string> examples;
    std::string key;
    std::string task_json;
    bool trace = false;
};

void print_trace(const std::vector<TraceEntry>& trace) {
    for (const auto& e : trace) {
        std::cout << "=== " << to_string(e.kind) << " prompt ===\n" << e.prompt << "\n";
        std::cout << "=== " << to_string(e.kind) << " reply ===\n" << e.reply << "\n";
    }
}

int cmd_run(const RunFlags& f, const ConfigFlags& cf) {
    RunConfig cfg = cf.resolve();

    TaskInstance task;
    if (!f.task_json.empty()) {
        task = parse_task_json(nlohmann::json::parse(f.task_json));
    } else {
        if (f.kind.empty()) throw CLI::ValidationError("--kind", "required unless --task is given");
        task.kind = parse_task_kind(f.kind);
        task.tables = f.tables;
        task.rows = f.rows;
        task.target_attributes = f.attrs;
        if (!f.question.empty()) task.question = f.question;
        if (!f.schema.empty()) task.extraction_schema = f.schema;
        if (!f.key.empty()) task.key_attribute = f.key;
        for (const auto& e : f.examples) {
            auto sep = e.find("=>");
            if (sep == std::string::npos) throw CLI::ValidationError("--example", "expects before=>after");
            task.transform_examples.emplace_back(e.substr(0, sep), e.substr(sep + 2));
        }
        if (task.kind == TaskKind::InformationExtraction && task.target_attributes.empty() && !f.schema.empty())
            task.target_attributes = {f.schema.front()};
    }
    if (task.tables.empty()) throw CLI::ValidationError("--table", "at least one table is required");

    DataLake lake;
    for (auto& ref : task.tables) {
        Table t = load_csv_arg(ref, cfg.missing_sentinel);
        ref = t.name();
        if (!lake.find(t.name())) lake.add(std::move(t));
    }
    validate(task);

    auto backend = make_backend(cfg);
    auto cache = make_cache(cfg);
    Session session(*backend, cache.get(), cfg.pipeline.llm);

    int status = kExitOk;
    try {
        TaskRun run = run_task(task, lake, cfg.pipeline, session, cfg.task_descriptions(), make_library(cfg));
        if (f.trace) print_trace(session.trace());
        std::cout << "answer: " << run.answer.raw << "\n";
        std::cout << "normalized: " << run.answer.normalized << "\n";
        if (run.answer.boolean_value) std::cout << "boolean: " << (*run.answer.boolean_value ? "yes" : "no") << "\n";
    } catch (const Error& e) {
        if (f.trace) print_trace(session.trace());
        std::cerr << "error: " << e.what() << "\n";
        status = kExitTaskError;
    }
    const TokenLedger& l = session.ledger();
    std::cout << "tokens: prompt " << l.logical_prompt_tokens << ", completion " << l.logical_completion_tokens
              << ", billed " << l.billed_total() << ", calls " << l.call_count << ", cache hits " << l.cache_hit_count
              << "\n";
    return status;
}

// -------------------------------------------------------------------- bench

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::ConfigInvalid, "cannot write '" + path.string() + "'");
    out << content;
}

void print_metrics(const EvalReport& r) {
    for (const auto& [kind, m] : r.metrics) {
        std::printf("%s: %zu tasks, accuracy %.4f", std::string(to_string(kind)).c_str(), m.count, m.accuracy);
        if (m.prf) std::printf(", precision %.4f, recall %.4f, f1 %.4f", m.prf->precision, m.prf->recall, m.prf->f1);
        if (m.mean_text_f1) std::printf(", text-f1 %.4f", *m.mean_text_f1);
        std::printf("\n");
    }
    std::printf("tokens/query: %.2f (prompt %.2f, completion %.2f); billed %llu; calls %llu; cache hits %llu\n",
                r.mean_tokens, r.mean_prompt_tokens, r.mean_completion_tokens,
                static_cast<unsigned long long>(r.ledger.billed_total()),
                static_cast<unsigned long long>(r.ledger.call_count),
                static_cast<unsigned long long>(r.ledger.cache_hit_count));
    std::size_t failed = 0;
    for (const auto& [code, n] : r.error_counts) failed += n;
    if (failed) std::printf("failed tasks: %zu\n", failed);
}

int cmd_bench(const std::string& tasks, const std::string& truth, bool compare, const ConfigFlags& cf) {
    RunConfig cfg = cf.resolve();
    Benchmark bench = load_benchmark(tasks, truth, cfg.missing_sentinel);
    auto backend = make_backend(cfg);
    auto cache = make_cache(cfg);
    RunOptions opts;
    opts.workers = cfg.workers;
    opts.descriptions = cfg.task_descriptions();
    opts.library = make_library(cfg);

    if (!compare) {
        EvalReport report = run_benchmark(bench, cfg.pipeline, *backend, cache.get(), opts);
        write_file(cfg.out + ".json", report_to_json(report).dump(2) + "\n");
        write_file(cfg.out + ".csv", report_to_csv(report));
        print_metrics(report);
        std::cout << "wrote " << cfg.out << ".json and " << cfg.out << ".csv\n";
        return kExitOk;
    }

    // Token comparison: direct prompt, pipeline without retrieval, full pipeline.
    std::vector<EvalReport> reports;
    for (ConfigClass c : {ConfigClass::Direct, ConfigClass::NoRetrieval, ConfigClass::Full}) {
        PipelineConfig p = cfg.pipeline;
        p.retrieval_enabled = c == ConfigClass::Full;
        p.meta_wise_enabled = p.instance_wise_enabled = true;
        p.parsing_enabled = p.prompt_construction_enabled = c != ConfigClass::Direct;
        EvalReport r = run_benchmark(bench, p, *backend, cache.get(), opts);
        std::string prefix = cfg.out + "." + std::string(to_string(c));
        write_file(prefix + ".json", report_to_json(r).dump(2) + "\n");
        write_file(prefix + ".csv", report_to_csv(r));
        std::cout << "[" << to_string(c) << "]\n";
        print_metrics(r);
        reports.push_back(std::move(r));
    }
    std::cout << token_comparison(reports).summary();
    return kExitOk;
}

// -------------------------------------------------------------------- cache

int cmd_cache(const std::string& action, const ConfigFlags& cf) {
    RunConfig c;
    for (const auto& [k, v] : cf.file_values()) c.set(k, v);
    for (const auto& [k, v] : cf.cli_values()) c.set(k, v);
    if (c.cache.empty()) throw CLI::ValidationError("--cache", "no cache path configured");
    if (action == "clear") {
        ResponseCache cache(c.cache);
        std::size_t n = cache.size();
        cache.clear();
        std::cout << "cleared " << n << " entries from " << c.cache << "\n";
        return kExitOk;
    }
    ResponseCache cache(c.cache);
    std::uintmax_t bytes = fs::exists(c.cache) ? fs::file_size(c.cache) : 0;
    std::cout << "path: " << c.cache << "\nentries: " << cache.size() << "\nbytes: " << bytes << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------- mask

/// Writes a masked copy of a table plus an imputation task file and truth
/// file, ready for `bench`.
int cmd_mask(const std::string& csv, const std::string& attr, double fraction, std::uint64_t seed,
             const std::string& dir, const std::string& sentinel) {
    Table table = load_table_file(csv, sentinel);
    auto [masked, truth] = mask_cells(table, attr, fraction, seed);
    const fs::path out(dir);
    fs::create_directories(out);
    const fs::path masked_csv = out / (table.name() + ".csv");

    std::string body = text::join(masked.attribute_names(), ",") + "\n";
    for (const auto& r : masked.records()) {
        std::vector<std::string> cells;
        for (const auto& c : r.cells) cells.push_back(c.is_present() ? detail::csv_field(c.text()) : sentinel);
        body += text::join(cells, ",") + "\n";
    }
    write_file(masked_csv, body);

    std::string tasks, truths;
    for (const auto& [key, value] : truth.entries) {
        std::string id = table.name() + "-" + std::to_string(key.row);
        tasks += nlohmann::json{{"id", id}, {"kind", "imputation"}, {"table", masked_csv.filename().string()},
                                {"row", key.row}, {"attributes", {attr}}}
                     .dump() +
                 "\n";
        truths += nlohmann::json{{"id", id}, {"truth", value}}.dump() + "\n";
    }
    write_file(out / "tasks.jsonl", tasks);
    write_file(out / "truth.jsonl", truths);
    std::cout << "masked " << truth.entries.size() << " cells; wrote " << masked_csv.string() << ", "
              << (out / "tasks.jsonl").string() << ", " << (out / "truth.jsonl").string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM-driven data manipulation over tabular data lakes"};
    app.require_subcommand(1);

    std::string sentinel;

    auto* inspect = app.add_subcommand("inspect", "Show a CSV's schema and row count");
    std::string inspect_path;
    inspect->add_option("csv", inspect_path, "CSV file, or - for standard input")->required();
    inspect->add_option("--missing", sentinel, "CSV text denoting a missing cell");

    auto* run = app.add_subcommand("run", "Run one task through the pipeline");
    RunFlags rf;
    ConfigFlags run_cfg;
    run->add_option("--kind", rf.kind, "imputation, transformation, error_detection, entity_resolution, table_qa, "
                                       "join_discovery, information_extraction");
    run->add_option("--table", rf.tables, "CSV file (repeat for two-table tasks)");
    run->add_option("--row", rf.rows, "Target row, 0-based (repeat for entity resolution)");
    run->add_option("--attr", rf.attrs, "Target attribute (repeat for join discovery)");
    run->add_option("--question", rf.question, "Question for table QA");
    run->add_option("--schema", rf.schema, "Attributes to extract (information extraction)");
    run->add_option("--example", rf.examples, "Transformation example before=>after");
    run->add_option("--key", rf.key, "Attribute that names the record in the query");
    run->add_option("--task", rf.task_json, "Whole task as one JSON object (task-file syntax)");
    run->add_flag("--trace", rf.trace, "Print every prompt and reply");
    run_cfg.attach(run);

    auto* bench = app.add_subcommand("bench", "Run a benchmark and write report.json and report.csv");
    std::string tasks_path, truth_path;
    bool compare = false;
    ConfigFlags bench_cfg;
    bench->add_option("--tasks", tasks_path, "Task file (JSON Lines)")->required();
    bench->add_option("--truth", truth_path, "Truth file (JSON Lines)")->required();
    bench->add_flag("--token-comparison", compare,
                    "Run direct, no-retrieval and full configurations and compare tokens per query");
    bench_cfg.attach(bench);

    auto* cache = app.add_subcommand("cache", "Inspect or clear the response cache");
    std::string cache_action;
    ConfigFlags cache_cfg;
    cache->add_option("action", cache_action, "stats or clear")->required()->check(CLI::IsMember({"stats", "clear"}));
    cache_cfg.attach(cache);

    auto* mask = app.add_subcommand("mask", "Mask one attribute of a CSV and emit an imputation benchmark");
    std::string mask_csv, mask_attr, mask_dir = ".";
    double mask_fraction = 1.0;
    std::uint64_t mask_seed = 0;
    mask->add_option("csv", mask_csv, "CSV file")->required();
    mask->add_option("--attr", mask_attr, "Attribute to mask")->required();
    mask->add_option("--fraction", mask_fraction, "Fraction of present cells to mask, in (0, 1]");
    mask->add_option("--seed", mask_seed, "Masking seed");
    mask->add_option("--dir", mask_dir, "Output directory");
    mask->add_option("--missing", sentinel, "CSV text denoting a missing cell");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*inspect) return cmd_inspect(inspect_path, sentinel);
        if (*run) return cmd_run(rf, run_cfg);
        if (*bench) return cmd_bench(tasks_path, truth_path, compare, bench_cfg);
        if (*cache) return cmd_cache(cache_action, cache_cfg);
        if (*mask) return cmd_mask(mask_csv, mask_attr, mask_fraction, mask_seed, mask_dir, sentinel);
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.code()) {
        case ErrorCode::ConfigInvalid:
        case ErrorCode::InvalidTask:
            return kExitUsage;
        default:
            return kExitTaskError;
        }
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "usage error: bad JSON: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
