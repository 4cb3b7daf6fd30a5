#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "unidm/error.hpp"
#include "unidm/text.hpp"

namespace unidm {

enum class EndpointStyle { Completions, Chat };

constexpr std::string_view to_string(EndpointStyle style) noexcept {
    return style == EndpointStyle::Chat ? "chat" : "completions";
}

inline EndpointStyle parse_endpoint_style(std::string_view s) {
    if (s == "chat") return EndpointStyle::Chat;
    if (s == "completions") return EndpointStyle::Completions;
    throw Error(ErrorCode::ConfigInvalid, "endpoint style must be 'completions' or 'chat', got '" + std::string(s) + "'");
}

struct CompletionRequest {
    std::string model = "text-davinci-003";
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 256;
    std::vector<std::string> stop;
};

struct CompletionResponse {
    std::string text;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    bool cached = false;
};

/// Which pipeline stage issued a completion.
enum class PromptKind : std::size_t {
    MetaSelect = 0,     // p_rm
    InstanceScore = 1,  // p_ri
    Parse = 2,          // p_dp
    Cloze = 3,          // p_cq
    Answer = 4,         // p_as
    Direct = 5,         // single prompt used when target prompt construction is off
};
inline constexpr std::size_t kPromptKindCount = 6;

constexpr std::string_view to_string(PromptKind k) noexcept {
    switch (k) {
    case PromptKind::MetaSelect: return "meta_select";
    case PromptKind::InstanceScore: return "instance_score";
    case PromptKind::Parse: return "parse";
    case PromptKind::Cloze: return "cloze";
    case PromptKind::Answer: return "answer";
    case PromptKind::Direct: return "direct";
    }
    return "unknown";
}

/// Backend contract: thread-safe `complete`.
class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual EndpointStyle style() const noexcept { return EndpointStyle::Completions; }
};

inline CompletionResponse complete(Backend& backend, const CompletionRequest& request) {
    if (request.prompt.empty()) throw Error(ErrorCode::InvalidTask, "completion prompt must be non-empty");
    return backend.complete(request);
}

/// Synthetic token count: ceil(bytes / 4).
constexpr std::uint64_t mock_tokens(std::string_view text) noexcept { return (text.size() + 3) / 4; }

/// Logical counts cover every call; billed counts only calls that reached a
/// backend (cache misses).
struct TokenLedger {
    std::uint64_t logical_prompt_tokens = 0;
    std::uint64_t logical_completion_tokens = 0;
    std::uint64_t billed_prompt_tokens = 0;
    std::uint64_t billed_completion_tokens = 0;
    std::uint64_t call_count = 0;
    std::uint64_t cache_hit_count = 0;
    std::array<std::uint64_t, kPromptKindCount> calls_by_kind{};

    void record(const CompletionResponse& r, PromptKind kind) {
        logical_prompt_tokens += r.prompt_tokens;
        logical_completion_tokens += r.completion_tokens;
        ++call_count;
        ++calls_by_kind[static_cast<std::size_t>(kind)];
        if (r.cached) {
            ++cache_hit_count;
        } else {
            billed_prompt_tokens += r.prompt_tokens;
            billed_completion_tokens += r.completion_tokens;
        }
    }

    void merge(const TokenLedger& o) {
        logical_prompt_tokens += o.logical_prompt_tokens;
        logical_completion_tokens += o.logical_completion_tokens;
        billed_prompt_tokens += o.billed_prompt_tokens;
        billed_completion_tokens += o.billed_completion_tokens;
        call_count += o.call_count;
        cache_hit_count += o.cache_hit_count;
        for (std::size_t i = 0; i < kPromptKindCount; ++i) calls_by_kind[i] += o.calls_by_kind[i];
    }

    std::uint64_t calls(PromptKind k) const { return calls_by_kind[static_cast<std::size_t>(k)]; }
    std::uint64_t logical_total() const { return logical_prompt_tokens + logical_completion_tokens; }
    std::uint64_t billed_total() const { return billed_prompt_tokens + billed_completion_tokens; }

    bool operator==(const TokenLedger&) const = default;
};

/// Mutex-guarded ledger for concurrent workers.
class SharedLedger {
public:
    void merge(const TokenLedger& l) {
        std::lock_guard lock(mu_);
        ledger_.merge(l);
    }
    TokenLedger snapshot() const {
        std::lock_guard lock(mu_);
        return ledger_;
    }

private:
    mutable std::mutex mu_;
    TokenLedger ledger_;
};

inline nlohmann::json ledger_to_json(const TokenLedger& l) {
    nlohmann::json by_kind = nlohmann::json::object();
    for (std::size_t i = 0; i < kPromptKindCount; ++i)
        by_kind[std::string(to_string(static_cast<PromptKind>(i)))] = l.calls_by_kind[i];
    return {
        {"logical_prompt_tokens", l.logical_prompt_tokens},
        {"logical_completion_tokens", l.logical_completion_tokens},
        {"billed_prompt_tokens", l.billed_prompt_tokens},
        {"billed_completion_tokens", l.billed_completion_tokens},
        {"call_count", l.call_count},
        {"cache_hit_count", l.cache_hit_count},
        {"calls_by_kind", by_kind},
    };
}

inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::CacheCorrupt, "SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

/// Fields joined by 0x1F, stop strings joined by 0x1E; temperature with
/// exactly two decimals.
inline std::string canonical_request_encoding(const CompletionRequest& r, EndpointStyle style) {
    char temp[64];
    std::snprintf(temp, sizeof temp, "%.2f", r.temperature);
    std::string out;
    out += r.model;
    out += '\x1F';
    out += to_string(style);
    out += '\x1F';
    out += r.prompt;
    out += '\x1F';
    out += temp;
    out += '\x1F';
    out += std::to_string(r.max_tokens);
    out += '\x1F';
    for (std::size_t i = 0; i < r.stop.size(); ++i) {
        if (i) out += '\x1E';
        out += r.stop[i];
    }
    return out;
}

inline std::string cache_key(const CompletionRequest& r, EndpointStyle style) {
    return sha256_hex(canonical_request_encoding(r, style));
}

/// Append-only JSON Lines response cache:
///   {"key", "text", "prompt_tokens", "completion_tokens", "created_unix_ms"}
///
/// Lookups are concurrent; appends are serialized. Concurrent misses on one
/// key are coalesced so exactly one backend call is made per distinct key.
class ResponseCache {
public:
    /// In-memory only.
    ResponseCache() = default;

    explicit ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
        std::ifstream in(path_, std::ios::binary);
        if (!in) return;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (text::trim_view(line).empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                CompletionResponse r;
                r.text = j.at("text").get<std::string>();
                r.prompt_tokens = j.at("prompt_tokens").get<std::uint64_t>();
                r.completion_tokens = j.at("completion_tokens").get<std::uint64_t>();
                entries_[j.at("key").get<std::string>()] = std::move(r);
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::CacheCorrupt,
                            path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }

    std::optional<CompletionResponse> lookup(const std::string& key) const {
        std::lock_guard lock(mu_);
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        CompletionResponse r = it->second;
        r.cached = true;
        return r;
    }

    /// Returns the cached response (cached=true) or runs `compute`, stores its
    /// result and returns it (cached=false).
    CompletionResponse get_or_compute(const std::string& key, const std::function<CompletionResponse()>& compute) {
        std::unique_lock lock(mu_);
        for (;;) {
            if (auto it = entries_.find(key); it != entries_.end()) {
                CompletionResponse r = it->second;
                r.cached = true;
                return r;
            }
            if (!in_flight_.contains(key)) break;
            cv_.wait(lock);
        }
        in_flight_.insert(key);
        lock.unlock();

        CompletionResponse fresh;
        try {
            fresh = compute();
        } catch (...) {
            lock.lock();
            in_flight_.erase(key);
            cv_.notify_all();
            throw;
        }
        fresh.cached = false;

        lock.lock();
        append_locked(key, fresh);
        entries_[key] = fresh;
        in_flight_.erase(key);
        cv_.notify_all();
        return fresh;
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return entries_.size();
    }

    bool contains(const std::string& key) const {
        std::lock_guard lock(mu_);
        return entries_.contains(key);
    }

    const std::filesystem::path& path() const noexcept { return path_; }

    /// Drops every entry and truncates the backing file.
    void clear() {
        std::lock_guard lock(mu_);
        entries_.clear();
        if (!path_.empty()) std::ofstream(path_, std::ios::binary | std::ios::trunc);
    }

private:
    void append_locked(const std::string& key, const CompletionResponse& r) {
        if (path_.empty()) return;
        auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
        nlohmann::json j = {{"key", key},
                            {"text", r.text},
                            {"prompt_tokens", r.prompt_tokens},
                            {"completion_tokens", r.completion_tokens},
                            {"created_unix_ms", now}};
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) throw Error(ErrorCode::CacheCorrupt, "cannot append to cache file '" + path_.string() + "'");
        out << j.dump() << '\n';
    }

    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::unordered_map<std::string, CompletionResponse> entries_;
    std::set<std::string> in_flight_;
};

inline CompletionResponse cached_complete(Backend& backend, ResponseCache& cache, const CompletionRequest& request) {
    if (request.prompt.empty()) throw Error(ErrorCode::InvalidTask, "completion prompt must be non-empty");
    return cache.get_or_compute(cache_key(request, backend.style()), [&] { return backend.complete(request); });
}

struct MockRule {
    std::string match;
    bool anchored = false;  // match must be a prefix of the prompt
    std::string response;
    std::optional<std::uint64_t> prompt_tokens;
    std::optional<std::uint64_t> completion_tokens;

    bool matches(std::string_view prompt) const {
        return anchored ? prompt.substr(0, match.size()) == match : prompt.find(match) != std::string_view::npos;
    }
};

/// Scripted test double. The first rule (in order) whose matcher hits the
/// prompt supplies the reply; token usage is `mock_tokens` of prompt and reply
/// unless the rule pins it.
class MockBackend : public Backend {
public:
    MockBackend() = default;
    explicit MockBackend(std::vector<MockRule> rules, EndpointStyle style = EndpointStyle::Completions)
        : rules_(std::move(rules)), style_(style) {}

    CompletionResponse complete(const CompletionRequest& request) override {
        invocations_.fetch_add(1, std::memory_order_relaxed);
        for (const auto& rule : rules_) {
            if (!rule.matches(request.prompt)) continue;
            CompletionResponse r;
            r.text = rule.response;
            r.prompt_tokens = rule.prompt_tokens.value_or(mock_tokens(request.prompt));
            r.completion_tokens = rule.completion_tokens.value_or(mock_tokens(rule.response));
            return r;
        }
        std::string head = request.prompt.substr(0, 120);
        throw Error(ErrorCode::NoMatchingRule, "no mock rule matches prompt starting '" + head + "'");
    }

    EndpointStyle style() const noexcept override { return style_; }
    std::uint64_t invocations() const noexcept { return invocations_.load(); }
    const std::vector<MockRule>& rules() const noexcept { return rules_; }

private:
    std::vector<MockRule> rules_;
    EndpointStyle style_ = EndpointStyle::Completions;
    std::atomic<std::uint64_t> invocations_{0};
};

/// JSON Lines: {"match", "anchored"?, "response", "prompt_tokens"?, "completion_tokens"?}
inline std::vector<MockRule> parse_mock_script(std::string_view jsonl) {
    std::vector<MockRule> rules;
    std::size_t lineno = 0;
    for (const auto& line : text::split_lines(jsonl)) {
        ++lineno;
        if (text::trim_view(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            MockRule r;
            r.match = j.at("match").get<std::string>();
            r.anchored = j.value("anchored", false);
            r.response = j.at("response").get<std::string>();
            if (j.contains("prompt_tokens")) r.prompt_tokens = j["prompt_tokens"].get<std::uint64_t>();
            if (j.contains("completion_tokens")) r.completion_tokens = j["completion_tokens"].get<std::uint64_t>();
            rules.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ConfigInvalid, "mock script line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rules;
}

inline std::vector<MockRule> load_mock_script(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open mock script '" + path.string() + "'");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_mock_script(data);
}

inline std::string mock_rule_to_json_line(const MockRule& r) {
    nlohmann::json j = {{"match", r.match}, {"response", r.response}};
    if (r.anchored) j["anchored"] = true;
    if (r.prompt_tokens) j["prompt_tokens"] = *r.prompt_tokens;
    if (r.completion_tokens) j["completion_tokens"] = *r.completion_tokens;
    return j.dump();
}

/// Generation settings shared by every prompt a pipeline issues.
struct LlmSettings {
    std::string model = "text-davinci-003";
    double temperature = 0.0;
    int max_tokens = 256;
    std::vector<std::string> stop;
};

struct TraceEntry {
    PromptKind kind;
    std::string prompt;
    std::string reply;
};

/// One task's view of the LLM: issues prompts (through the cache when one is
/// attached) and keeps that task's trace and ledger.
class Session {
public:
    Session(Backend& backend, ResponseCache* cache, LlmSettings settings = {})
        : backend_(backend), cache_(cache), settings_(std::move(settings)) {}

    std::string ask(PromptKind kind, std::string prompt) {
        CompletionRequest req{settings_.model, std::move(prompt), settings_.temperature, settings_.max_tokens,
                              settings_.stop};
        CompletionResponse r = cache_ ? cached_complete(backend_, *cache_, req) : complete(backend_, req);
        ledger_.record(r, kind);
        trace_.push_back({kind, std::move(req.prompt), r.text});
        return r.text;
    }

    const TokenLedger& ledger() const noexcept { return ledger_; }
    const std::vector<TraceEntry>& trace() const noexcept { return trace_; }
    const LlmSettings& settings() const noexcept { return settings_; }
    EndpointStyle style() const noexcept { return backend_.style(); }

private:
    Backend& backend_;
    ResponseCache* cache_;
    LlmSettings settings_;
    TokenLedger ledger_;
    std::vector<TraceEntry> trace_;
};

} // namespace unidm
