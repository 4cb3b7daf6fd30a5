#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "unidm/datalake.hpp"
#include "unidm/error.hpp"
#include "unidm/llmclient.hpp"
#include "unidm/pipeline.hpp"
#include "unidm/promptgen.hpp"
#include "unidm/taskmodel.hpp"
#include "unidm/text.hpp"

namespace unidm {

// ---------------------------------------------------------------- metrics

/// Fraction of predictions whose normalized form equals the truth's.
inline double accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& truths) {
    if (predictions.size() != truths.size())
        throw Error(ErrorCode::LengthMismatch, "predictions and truths differ in length");
    if (predictions.empty()) throw Error(ErrorCode::EmptyBenchmark, "accuracy over zero items");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (text::normalize_answer(predictions[i]) == text::normalize_answer(truths[i])) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Positive class = true. Zero denominators give 0 for that metric.
inline PrecisionRecallF1 prf1(const std::vector<bool>& predictions, const std::vector<bool>& truths) {
    if (predictions.size() != truths.size())
        throw Error(ErrorCode::LengthMismatch, "predictions and truths differ in length");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] && truths[i]) ++tp;
        else if (predictions[i] && !truths[i]) ++fp;
        else if (!predictions[i] && truths[i]) ++fn;
    }
    PrecisionRecallF1 m;
    if (tp + fp) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

/// Token-level F1 with multiset overlap over normalized whitespace tokens.
inline double text_f1(std::string_view prediction, std::string_view truth) {
    auto p = text::split_whitespace(text::normalize_answer(prediction));
    auto t = text::split_whitespace(text::normalize_answer(truth));
    if (p.empty() && t.empty()) return 1.0;
    if (p.empty() || t.empty()) return 0.0;
    std::map<std::string, std::size_t> counts;
    for (const auto& w : t) ++counts[w];
    std::size_t overlap = 0;
    for (const auto& w : p) {
        auto it = counts.find(w);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(t.size());
    return 2.0 * precision * recall / (precision + recall);
}

// -------------------------------------------------------------- benchmark

/// Expected answer for one task: text for value tasks, a flag for yes/no tasks.
struct Truth {
    std::optional<std::string> text;
    std::optional<bool> flag;
};

struct Benchmark {
    DataLake lake;
    std::vector<TaskInstance> tasks;
    std::vector<Truth> truths;
};

namespace detail {

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::BenchmarkUnreadable, "cannot open '" + path.string() + "'");
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim_view(line).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::BenchmarkUnreadable, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace detail

/// Task lines name tables by CSV path, relative to the tasks file. Each
/// distinct path is loaded once and the task refers to it by file stem
/// afterwards. Truth lines: {"id"?, "truth": string | bool}, aligned with the
/// task lines by position.
inline Benchmark load_benchmark(const std::filesystem::path& tasks_path, const std::filesystem::path& truth_path,
                                std::string_view missing_sentinel = "") {
    Benchmark b;
    const auto base = tasks_path.parent_path();
    std::map<std::string, std::string> loaded;  // canonical path -> table name

    std::size_t lineno = 0;
    for (const auto& j : detail::read_jsonl(tasks_path)) {
        ++lineno;
        TaskInstance t;
        try {
            t = parse_task_json(j);
        } catch (const Error& e) {
            throw Error(ErrorCode::BenchmarkUnreadable, "task " + std::to_string(lineno) + ": " + e.what());
        }
        if (t.id.empty()) t.id = std::to_string(lineno - 1);
        for (auto& ref : t.tables) {
            std::filesystem::path p(ref);
            if (p.is_relative()) p = base / p;
            std::string key = std::filesystem::weakly_canonical(p).string();
            auto it = loaded.find(key);
            if (it == loaded.end()) {
                Table table = load_table_file(p, missing_sentinel);
                it = loaded.emplace(key, table.name()).first;
                b.lake.add(std::move(table));
            }
            ref = it->second;
        }
        b.tasks.push_back(std::move(t));
    }

    auto truths = detail::read_jsonl(truth_path);
    if (truths.size() != b.tasks.size())
        throw Error(ErrorCode::BenchmarkUnreadable, "truth file has " + std::to_string(truths.size()) +
                                                        " entries for " + std::to_string(b.tasks.size()) + " tasks");
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const auto& j = truths[i];
        if (!j.is_object() || !j.contains("truth"))
            throw Error(ErrorCode::BenchmarkUnreadable, "truth " + std::to_string(i + 1) + " lacks a 'truth' field");
        if (j.contains("id")) {
            std::string id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
            if (id != b.tasks[i].id)
                throw Error(ErrorCode::BenchmarkUnreadable,
                            "truth " + std::to_string(i + 1) + " is for task '" + id + "', expected '" + b.tasks[i].id + "'");
        }
        Truth t;
        if (j["truth"].is_boolean())
            t.flag = j["truth"].get<bool>();
        else if (j["truth"].is_string())
            t.text = j["truth"].get<std::string>();
        else
            throw Error(ErrorCode::BenchmarkUnreadable, "truth " + std::to_string(i + 1) + " must be a string or bool");
        if (is_binary(b.tasks[i].kind) && !t.flag) {
            std::string n = text::normalize_answer(t.text.value_or(""));
            if (n == "yes" || n == "true") t.flag = true;
            else if (n == "no" || n == "false") t.flag = false;
            else
                throw Error(ErrorCode::BenchmarkUnreadable,
                            "task " + b.tasks[i].id + " is yes/no but its truth is not boolean");
        }
        if (!is_binary(b.tasks[i].kind) && !t.text)
            throw Error(ErrorCode::BenchmarkUnreadable, "task " + b.tasks[i].id + " needs a text truth");
        b.truths.push_back(std::move(t));
    }
    return b;
}

// ------------------------------------------------------------------ report

struct TaskReport {
    std::string id;
    TaskKind kind = TaskKind::Imputation;
    std::string prediction_raw;
    std::string prediction_normalized;
    std::optional<bool> prediction_flag;
    Truth truth;
    bool correct = false;
    double text_f1 = 0.0;
    std::optional<ErrorCode> error_code;
    std::string error_message;
    TokenLedger ledger;
    nlohmann::json provenance = nlohmann::json::object();
};

struct KindMetrics {
    std::size_t count = 0;
    double accuracy = 0.0;
    std::optional<PrecisionRecallF1> prf;
    std::optional<double> mean_text_f1;
};

struct EvalReport {
    PipelineConfig config;
    std::vector<TaskReport> tasks;
    std::map<TaskKind, KindMetrics> metrics;
    TokenLedger ledger;
    double mean_prompt_tokens = 0.0;
    double mean_completion_tokens = 0.0;
    double mean_tokens = 0.0;
    std::size_t attribute_fallbacks = 0;
    std::size_t zero_default_scores = 0;
    std::map<std::string, std::size_t> error_counts;
    std::int64_t wall_clock_ms = 0;
    std::int64_t created_unix_ms = 0;
};

struct RunOptions {
    std::size_t workers = 4;
    TaskDescriptions descriptions;
    std::optional<DemoLibrary> library;
};

namespace detail {

inline nlohmann::json context_provenance_json(const Context& c) {
    return {
        {"table", c.table},
        {"mode", c.provenance.mode},
        {"attributes", c.attributes},
        {"rows", c.provenance.rows},
        {"scores", c.provenance.scores},
        {"candidates_scored", c.provenance.candidates_scored},
        {"score_batches", c.provenance.score_batches},
        {"zero_default_scores", c.provenance.zero_default_scores},
        {"attribute_fallback", c.provenance.attribute_fallback},
    };
}

inline nlohmann::json run_provenance_json(const TaskRun& run) {
    nlohmann::json contexts = nlohmann::json::array();
    for (const auto& c : run.contexts) contexts.push_back(context_provenance_json(c));
    return {
        {"query", run.query.text},
        {"contexts", contexts},
        {"serialized", run.parsed.serialized.text},
        {"serialized_pairs", run.parsed.serialized.pair_count},
        {"skipped_missing", run.parsed.serialized.skipped_missing},
        {"parsed", run.parsed.text},
        {"parsed_by_llm", run.parsed.parsed_by_llm},
        {"claim", run.claim},
        {"target_prompt", run.cloze},
    };
}

inline std::int64_t now_unix_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

} // namespace detail

/// Scores one finished task against its truth.
inline void score_task(TaskReport& r, const Truth& truth) {
    r.truth = truth;
    if (r.error_code) {
        r.correct = false;
        r.text_f1 = 0.0;
        return;
    }
    if (is_binary(r.kind)) {
        r.correct = r.prediction_flag.has_value() && truth.flag.has_value() && *r.prediction_flag == *truth.flag;
        return;
    }
    const std::string t = truth.text.value_or("");
    r.correct = r.prediction_normalized == text::normalize_answer(t);
    r.text_f1 = text_f1(r.prediction_raw, t);
}

inline void aggregate(EvalReport& report) {
    report.metrics.clear();
    report.ledger = {};
    report.attribute_fallbacks = 0;
    report.zero_default_scores = 0;
    report.error_counts.clear();

    std::map<TaskKind, std::vector<const TaskReport*>> by_kind;
    for (const auto& t : report.tasks) {
        by_kind[t.kind].push_back(&t);
        report.ledger.merge(t.ledger);
        if (t.error_code) ++report.error_counts[std::string(to_string(*t.error_code))];
        if (t.provenance.contains("contexts"))
            for (const auto& c : t.provenance["contexts"]) {
                if (c.value("attribute_fallback", false)) ++report.attribute_fallbacks;
                report.zero_default_scores += c.value("zero_default_scores", std::size_t{0});
            }
    }
    for (const auto& [kind, items] : by_kind) {
        KindMetrics m;
        m.count = items.size();
        std::size_t correct = 0;
        for (const auto* t : items) correct += t->correct ? 1 : 0;
        m.accuracy = static_cast<double>(correct) / static_cast<double>(items.size());
        if (is_binary(kind)) {
            std::vector<bool> pred, truth;
            for (const auto* t : items) {
                bool actual = t->truth.flag.value_or(false);
                truth.push_back(actual);
                // A failed task counts as the wrong answer.
                pred.push_back(t->error_code ? !actual : t->prediction_flag.value_or(!actual));
            }
            m.prf = prf1(pred, truth);
        }
        if (kind == TaskKind::InformationExtraction) {
            double sum = 0.0;
            for (const auto* t : items) sum += t->text_f1;
            m.mean_text_f1 = sum / static_cast<double>(items.size());
        }
        report.metrics[kind] = m;
    }
    const double n = report.tasks.empty() ? 1.0 : static_cast<double>(report.tasks.size());
    report.mean_prompt_tokens = static_cast<double>(report.ledger.logical_prompt_tokens) / n;
    report.mean_completion_tokens = static_cast<double>(report.ledger.logical_completion_tokens) / n;
    report.mean_tokens = static_cast<double>(report.ledger.logical_total()) / n;
}

/// Runs every task with up to `options.workers` threads. Task i samples with
/// seed `config.seed ^ i`, so results do not depend on scheduling. Individual
/// task failures are recorded and scored as incorrect.
inline EvalReport run_benchmark(const Benchmark& bench, const PipelineConfig& config, Backend& backend,
                                ResponseCache* cache, const RunOptions& options = {}) {
    if (bench.tasks.empty()) throw Error(ErrorCode::EmptyBenchmark, "benchmark has no tasks");
    if (bench.truths.size() != bench.tasks.size())
        throw Error(ErrorCode::LengthMismatch, "benchmark truths and tasks differ in length");
    config.retrieval.validate();

    const DemoLibrary library = options.library.value_or(DemoLibrary::shipped());
    const auto started = std::chrono::steady_clock::now();

    EvalReport report;
    report.config = config;
    report.created_unix_ms = detail::now_unix_ms();
    report.tasks.resize(bench.tasks.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < bench.tasks.size(); i = next.fetch_add(1)) {
            const TaskInstance& task = bench.tasks[i];
            TaskReport& r = report.tasks[i];
            r.id = task.id;
            r.kind = task.kind;

            PipelineConfig task_config = config;
            task_config.seed = config.seed ^ static_cast<std::uint64_t>(i);
            Session session(backend, cache, config.llm);
            try {
                TaskRun run = run_task(task, bench.lake, task_config, session, options.descriptions, library);
                r.prediction_raw = run.answer.raw;
                r.prediction_normalized = run.answer.normalized;
                r.prediction_flag = run.answer.boolean_value;
                r.provenance = detail::run_provenance_json(run);
            } catch (const Error& e) {
                r.error_code = e.code();
                r.error_message = e.what();
            }
            r.ledger = session.ledger();
            nlohmann::json kinds = nlohmann::json::object();
            for (std::size_t k = 0; k < kPromptKindCount; ++k)
                kinds[std::string(to_string(static_cast<PromptKind>(k)))] = r.ledger.calls_by_kind[k];
            r.provenance["calls_by_kind"] = kinds;
            score_task(r, bench.truths[i]);
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, bench.tasks.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    aggregate(report);
    report.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started)
                               .count();
    return report;
}

inline nlohmann::json truth_json(const Truth& t) {
    if (t.flag) return *t.flag;
    if (t.text) return *t.text;
    return nullptr;
}

/// Report document. Timing lives only in `wall_clock_ms` and `created_unix_ms`.
inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : r.tasks) {
        nlohmann::json j = {
            {"id", t.id},
            {"kind", std::string(to_string(t.kind))},
            {"prediction", t.prediction_raw},
            {"prediction_normalized", t.prediction_normalized},
            {"truth", truth_json(t.truth)},
            {"correct", t.correct},
            {"prompt_tokens", t.ledger.logical_prompt_tokens},
            {"completion_tokens", t.ledger.logical_completion_tokens},
            {"provenance", t.provenance},
        };
        if (t.prediction_flag) j["prediction_flag"] = *t.prediction_flag;
        if (t.kind == TaskKind::InformationExtraction) j["text_f1"] = t.text_f1;
        j["error"] = t.error_code ? nlohmann::json(t.error_message) : nlohmann::json(nullptr);
        tasks.push_back(std::move(j));
    }
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [kind, m] : r.metrics) {
        nlohmann::json j = {{"count", m.count}, {"accuracy", m.accuracy}};
        if (m.prf) {
            j["precision"] = m.prf->precision;
            j["recall"] = m.prf->recall;
            j["f1"] = m.prf->f1;
        }
        if (m.mean_text_f1) j["text_f1"] = *m.mean_text_f1;
        metrics[std::string(to_string(kind))] = j;
    }
    return {
        {"config", config_to_json(r.config)},
        {"tasks", tasks},
        {"metrics", metrics},
        {"ledger", ledger_to_json(r.ledger)},
        {"mean_prompt_tokens", r.mean_prompt_tokens},
        {"mean_completion_tokens", r.mean_completion_tokens},
        {"mean_tokens_per_query", r.mean_tokens},
        {"attribute_fallbacks", r.attribute_fallbacks},
        {"zero_default_scores", r.zero_default_scores},
        {"error_counts", r.error_counts},
        {"wall_clock_ms", r.wall_clock_ms},
        {"created_unix_ms", r.created_unix_ms},
    };
}

namespace detail {

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace detail

/// One row per task: task_id,prediction,truth,correct,prompt_tokens,completion_tokens,error
inline std::string report_to_csv(const EvalReport& r) {
    std::string out = "task_id,prediction,truth,correct,prompt_tokens,completion_tokens,error\n";
    for (const auto& t : r.tasks) {
        std::string truth = t.truth.flag ? (*t.truth.flag ? "yes" : "no") : t.truth.text.value_or("");
        out += detail::csv_field(t.id) + ',' + detail::csv_field(t.prediction_raw) + ',' + detail::csv_field(truth) +
               ',' + (t.correct ? "true" : "false") + ',' + std::to_string(t.ledger.logical_prompt_tokens) + ',' +
               std::to_string(t.ledger.logical_completion_tokens) + ',' + detail::csv_field(t.error_message) + '\n';
    }
    return out;
}

// ------------------------------------------------------- token comparison

enum class ConfigClass { Direct, NoRetrieval, Full, Other };

constexpr std::string_view to_string(ConfigClass c) noexcept {
    switch (c) {
    case ConfigClass::Direct: return "direct";
    case ConfigClass::NoRetrieval: return "no_retrieval";
    case ConfigClass::Full: return "full";
    case ConfigClass::Other: return "other";
    }
    return "other";
}

inline ConfigClass classify(const PipelineConfig& c) {
    if (!c.retrieval_enabled && !c.parsing_enabled && !c.prompt_construction_enabled) return ConfigClass::Direct;
    if (!c.retrieval_enabled && c.parsing_enabled && c.prompt_construction_enabled) return ConfigClass::NoRetrieval;
    if (c.retrieval_enabled && c.meta_wise_enabled && c.instance_wise_enabled && c.parsing_enabled &&
        c.prompt_construction_enabled)
        return ConfigClass::Full;
    return ConfigClass::Other;
}

struct TokenComparison {
    struct Entry {
        ConfigClass config_class;
        double mean_tokens;
    };
    std::vector<Entry> entries;
    /// Whether direct < no_retrieval < full holds strictly among the classes
    /// present; empty when fewer than two of them are present.
    std::optional<bool> ordering_holds;

    std::string summary() const {
        std::ostringstream os;
        for (const auto& e : entries) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.2f", e.mean_tokens);
            os << to_string(e.config_class) << ": " << buf << " tokens/query\n";
        }
        if (!ordering_holds)
            os << "ordering: not assessed\n";
        else
            os << "ordering direct < no_retrieval < full: " << (*ordering_holds ? "holds" : "VIOLATED") << '\n';
        return os.str();
    }
};

inline TokenComparison token_comparison(const std::vector<EvalReport>& reports) {
    TokenComparison out;
    std::map<ConfigClass, double> by_class;
    for (const auto& r : reports) {
        ConfigClass c = classify(r.config);
        out.entries.push_back({c, r.mean_tokens});
        if (c != ConfigClass::Other) by_class.emplace(c, r.mean_tokens);
    }
    if (by_class.size() >= 2) {
        bool holds = true;
        std::optional<double> prev;
        for (ConfigClass c : {ConfigClass::Direct, ConfigClass::NoRetrieval, ConfigClass::Full}) {
            auto it = by_class.find(c);
            if (it == by_class.end()) continue;
            if (prev && !(*prev < it->second)) holds = false;
            prev = it->second;
        }
        out.ordering_holds = holds;
    }
    return out;
}

} // namespace unidm
