#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "unidm/error.hpp"
#include "unidm/llmclient.hpp"
#include "unidm/pipeline.hpp"
#include "unidm/taskmodel.hpp"
#include "unidm/text.hpp"

namespace unidm {

/// Settings for one CLI invocation. Built from defaults, then a flat
/// `key = value` file, then command-line values, each layer overriding the
/// previous one.
///
/// Keys:
///   backend            mock | http (inferred from mock_script when absent)
///   mock_script        path to a mock rule file (selects the mock backend)
///   base_url           OpenAI-compatible base URL (default from UNIDM_BASE_URL, else https://api.openai.com/v1)
///   endpoint           completions | chat
///   model, temperature, max_tokens, stop (comma separated)
///   cache              response cache path (empty: no cache)
///   demos              demonstration library path (empty: shipped library)
///   missing_sentinel   CSV text that denotes a missing cell (default empty)
///   retrieval, meta_wise, instance_wise, parsing, prompt_construction   booleans
///   sample_size, top_k, attr_count, score_batch_size, include_target_attribute
///   seed, workers, out
///   description.<kind> overrides the task sentence for that kind
struct RunConfig {
    std::string backend;
    std::string mock_script;
    std::string base_url = "https://api.openai.com/v1";
    EndpointStyle endpoint = EndpointStyle::Completions;
    std::string cache;
    std::string demos;
    std::string missing_sentinel;
    std::string out = "report";
    std::size_t workers = 4;
    PipelineConfig pipeline;
    std::map<TaskKind, std::string> descriptions;

    RunConfig() {
        if (const char* url = std::getenv("UNIDM_BASE_URL"); url && *url) base_url = url;
    }

    void set(std::string_view key, std::string_view value);

    /// Throws ConfigInvalid unless exactly one backend is selected.
    void validate() const {
        if (resolved_backend() == "mock" && mock_script.empty())
            throw Error(ErrorCode::ConfigInvalid, "mock backend selected but no mock_script given");
        if (backend == "http" && !mock_script.empty())
            throw Error(ErrorCode::ConfigInvalid, "both http backend and mock_script selected; choose one");
        if (!backend.empty() && backend != "http" && backend != "mock")
            throw Error(ErrorCode::ConfigInvalid, "backend must be 'mock' or 'http'");
        if (workers == 0) throw Error(ErrorCode::ConfigInvalid, "workers must be positive");
        pipeline.retrieval.validate();
    }

    std::string resolved_backend() const {
        if (!backend.empty()) return backend;
        return mock_script.empty() ? "http" : "mock";
    }

    TaskDescriptions task_descriptions() const {
        TaskDescriptions d;
        for (const auto& [k, v] : descriptions) d.set(k, v);
        return d;
    }
};

namespace detail {

inline bool parse_bool(std::string_view key, std::string_view v) {
    std::string s = text::to_lower(text::trim(v));
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw Error(ErrorCode::ConfigInvalid, "'" + std::string(key) + "' expects a boolean, got '" + std::string(v) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    std::string s = text::trim(v);
    T out{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw Error(ErrorCode::ConfigInvalid, "'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
    return out;
}

inline double parse_real(std::string_view key, std::string_view v) {
    std::string s = text::trim(v);
    char* end = nullptr;
    double d = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw Error(ErrorCode::ConfigInvalid, "'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
    return d;
}

} // namespace detail

inline void RunConfig::set(std::string_view key, std::string_view value) {
    using namespace detail;
    const std::string k(key);
    const std::string v(value);
    auto& p = pipeline;
    if (k == "backend") backend = text::trim(v);
    else if (k == "mock_script") mock_script = v;
    else if (k == "base_url") base_url = v;
    else if (k == "endpoint") endpoint = parse_endpoint_style(text::trim(v));
    else if (k == "model") p.llm.model = v;
    else if (k == "temperature") {
        p.llm.temperature = parse_real(k, v);
        if (p.llm.temperature < 0) throw Error(ErrorCode::ConfigInvalid, "temperature must be >= 0");
    } else if (k == "max_tokens") {
        p.llm.max_tokens = parse_number<int>(k, v);
        if (p.llm.max_tokens <= 0) throw Error(ErrorCode::ConfigInvalid, "max_tokens must be positive");
    } else if (k == "stop") {
        p.llm.stop.clear();
        std::size_t start = 0;
        while (start <= v.size() && !v.empty()) {
            auto comma = v.find(',', start);
            std::string part = v.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!part.empty()) p.llm.stop.push_back(part);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    } else if (k == "cache") cache = v;
    else if (k == "demos") demos = v;
    else if (k == "missing_sentinel") missing_sentinel = v;
    else if (k == "out") out = v;
    else if (k == "workers") workers = parse_number<std::size_t>(k, v);
    else if (k == "seed") p.seed = parse_number<std::uint64_t>(k, v);
    else if (k == "retrieval") p.retrieval_enabled = parse_bool(k, v);
    else if (k == "meta_wise") p.meta_wise_enabled = parse_bool(k, v);
    else if (k == "instance_wise") p.instance_wise_enabled = parse_bool(k, v);
    else if (k == "parsing") p.parsing_enabled = parse_bool(k, v);
    else if (k == "prompt_construction") p.prompt_construction_enabled = parse_bool(k, v);
    else if (k == "sample_size") p.retrieval.sample_size = parse_number<std::size_t>(k, v);
    else if (k == "top_k") p.retrieval.top_k = parse_number<std::size_t>(k, v);
    else if (k == "attr_count") p.retrieval.attr_count = parse_number<std::size_t>(k, v);
    else if (k == "score_batch_size") p.retrieval.score_batch_size = parse_number<std::size_t>(k, v);
    else if (k == "include_target_attribute") p.retrieval.include_target_attribute = parse_bool(k, v);
    else if (k.starts_with("description.")) descriptions[parse_task_kind(k.substr(12))] = v;
    else throw Error(ErrorCode::ConfigInvalid, "unknown configuration key '" + k + "'");
}

/// `key = value` lines; '#' starts a comment line; blank lines ignored.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view content) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t lineno = 0;
    for (const auto& raw : text::split_lines(content)) {
        ++lineno;
        std::string_view line = text::trim_view(raw);
        if (line.empty() || line.front() == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::ConfigInvalid, "config line " + std::to_string(lineno) + " lacks '='");
        std::string key = text::trim(line.substr(0, eq));
        if (key.empty()) throw Error(ErrorCode::ConfigInvalid, "config line " + std::to_string(lineno) + " has no key");
        out.emplace_back(std::move(key), text::trim(line.substr(eq + 1)));
    }
    return out;
}

inline std::vector<std::pair<std::string, std::string>> load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open config file '" + path.string() + "'");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(data);
}

/// defaults < file < command line
inline RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_values,
                                const std::vector<std::pair<std::string, std::string>>& cli_values) {
    RunConfig c;
    for (const auto& [k, v] : file_values) c.set(k, v);
    for (const auto& [k, v] : cli_values) c.set(k, v);
    c.validate();
    return c;
}

} // namespace unidm
