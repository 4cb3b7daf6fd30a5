#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "unidm/error.hpp"
#include "unidm/llmclient.hpp"

namespace unidm {

struct RetryPolicy {
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
    int max_attempts = 5;
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };

    std::chrono::milliseconds delay_before(int attempt) const {
        // attempt is 1-based; no delay before the first attempt
        double ms = static_cast<double>(base_delay.count());
        for (int i = 2; i < attempt; ++i) ms *= factor;
        return std::chrono::milliseconds(static_cast<long long>(ms));
    }
};

struct HttpBackendOptions {
    std::string base_url = "https://api.openai.com/v1";
    EndpointStyle style = EndpointStyle::Completions;
    std::string api_key;
    RetryPolicy retry;
    std::chrono::seconds timeout{120};
};

/// Reads UNIDM_API_KEY and, when set, UNIDM_BASE_URL.
inline HttpBackendOptions http_options_from_env(HttpBackendOptions base = {}) {
    if (const char* key = std::getenv("UNIDM_API_KEY")) base.api_key = key;
    if (const char* url = std::getenv("UNIDM_BASE_URL"); url && *url) base.base_url = url;
    return base;
}

/// Request body for either endpoint style; `stop` is omitted when empty.
inline nlohmann::json build_request_body(const CompletionRequest& r, EndpointStyle style) {
    nlohmann::json body;
    body["model"] = r.model;
    if (style == EndpointStyle::Chat)
        body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", r.prompt}}});
    else
        body["prompt"] = r.prompt;
    body["temperature"] = r.temperature;
    body["max_tokens"] = r.max_tokens;
    if (!r.stop.empty()) body["stop"] = r.stop;
    return body;
}

inline CompletionResponse parse_reply_body(const std::string& body, EndpointStyle style) {
    try {
        auto j = nlohmann::json::parse(body);
        const auto& choice = j.at("choices").at(0);
        CompletionResponse r;
        r.text = style == EndpointStyle::Chat ? choice.at("message").at("content").get<std::string>()
                                              : choice.at("text").get<std::string>();
        if (j.contains("usage") && j["usage"].is_object()) {
            r.prompt_tokens = j["usage"].value("prompt_tokens", std::uint64_t{0});
            r.completion_tokens = j["usage"].value("completion_tokens", std::uint64_t{0});
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedBackendReply, e.what());
    }
}

/// OpenAI-compatible HTTP backend. Connection errors, 429 and 5xx are retried
/// with exponential backoff; 401/403 fail immediately.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
        if (options_.api_key.empty())
            throw Error(ErrorCode::AuthFailure, "no API key configured (set UNIDM_API_KEY)");
        std::string url = options_.base_url;
        while (!url.empty() && url.back() == '/') url.pop_back();
        auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos)
            throw Error(ErrorCode::ConfigInvalid, "base URL needs a scheme: '" + options_.base_url + "'");
        auto path_start = url.find('/', scheme_end + 3);
        origin_ = url.substr(0, path_start);
        prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    }

    EndpointStyle style() const noexcept override { return options_.style; }

    std::string endpoint_path() const {
        return prefix_ + (options_.style == EndpointStyle::Chat ? "/chat/completions" : "/completions");
    }

    CompletionResponse complete(const CompletionRequest& request) override {
        const std::string body = build_request_body(request, options_.style).dump();
        const std::string path = endpoint_path();
        httplib::Headers headers = {{"Authorization", "Bearer " + options_.api_key}};

        std::string last_error;
        for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
            if (attempt > 1) options_.retry.sleep(options_.retry.delay_before(attempt));

            httplib::Client client(origin_);
            client.set_connection_timeout(options_.timeout);
            client.set_read_timeout(options_.timeout);
            client.set_write_timeout(options_.timeout);
            auto res = client.Post(path, headers, body, "application/json");
            if (!res) {
                last_error = "connection error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 401 || res->status == 403)
                throw Error(ErrorCode::AuthFailure, "HTTP " + std::to_string(res->status) + ": " + res->body);
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status < 200 || res->status >= 300)
                throw Error(ErrorCode::BackendUnavailable, "HTTP " + std::to_string(res->status) + ": " + res->body);
            return parse_reply_body(res->body, options_.style);
        }
        throw Error(ErrorCode::BackendUnavailable, "gave up after " + std::to_string(options_.retry.max_attempts) +
                                                       " attempts; last error: " + last_error);
    }

private:
    HttpBackendOptions options_;
    std::string origin_;
    std::string prefix_;
};

} // namespace unidm
