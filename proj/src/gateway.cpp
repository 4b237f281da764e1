#include "distrace/gateway.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <regex>
#include <thread>

#include "distrace/digest.hpp"
#include "distrace/errors.hpp"
#include "distrace/io.hpp"
#include "distrace/text.hpp"

namespace distrace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Transport/rate-limit failure class; the only class the gateway retries.
struct TransportError : BackendError {
    using BackendError::BackendError;
};

std::string to_string(ChatMode mode) {
    switch (mode) {
        case ChatMode::kDirect: return "direct";
        case ChatMode::kCot: return "cot";
        case ChatMode::kReasoning: return "reasoning";
    }
    return "direct";
}

ChatMode chat_mode_from_string(const std::string& s) {
    if (s == "direct") return ChatMode::kDirect;
    if (s == "cot") return ChatMode::kCot;
    if (s == "reasoning") return ChatMode::kReasoning;
    throw ConfigError("unknown chat mode: " + s);
}

int default_max_tokens(ChatMode mode) {
    return mode == ChatMode::kReasoning ? 16384 : 8192;
}

CacheKey cache_key(const ChatRequest& request) {
    json key;
    key["model_id"] = request.model_id;
    key["system_text"] = request.system_text;
    key["user_text"] = request.user_text;
    key["mode"] = to_string(request.mode);
    key["max_tokens"] = request.effective_max_tokens();
    key["temperature"] = request.decoding.temperature;
    key["deterministic"] = request.decoding.deterministic;
    return CacheKey{sha256_hex(key.dump())};
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

namespace {

std::string extract_between(const std::string& text, std::string_view open,
                            std::string_view close) {
    size_t a = text.find(open);
    if (a == std::string::npos) return {};
    a += open.size();
    size_t b = text.find(close, a);
    if (b == std::string::npos) return {};
    return text.substr(a, b - a);
}

/// Scriptable backend for tests and offline runs. The script is a JSON file:
///
///   {"rules": [{"match": {"system_contains": "...", "user_contains": "...",
///               "mode": "...", "model_id": "..."},
///              "fail": false, "fail_times": 0,
///              "response": {"reasoning": "...", "output": "...",
///                           "replacements": [{"find": "...", "replace": "..."}]}}],
///    "default": {"echo_user": true}}
///
/// First matching rule wins. Response strings may use the placeholders
/// {user}, {system}, {chunk} (text between CHUNK START/END lines) and
/// {trace} (between TRACE START/END or [BEGIN TRACE]/[END TRACE] lines);
/// replacements are applied after substitution.
class MockBackend : public Backend {
public:
    explicit MockBackend(const std::string& script_path) {
        if (script_path.empty()) return;  // pure echo backend
        json script;
        try {
            script = json::parse(read_file(script_path));
        } catch (const std::exception& e) {
            throw ConfigError("mock script " + script_path + ": " + e.what());
        }
        script_ = script;
        if (script_.contains("rules")) {
            fail_budgets_.assign(script_["rules"].size(), 0);
            for (size_t i = 0; i < script_["rules"].size(); ++i)
                fail_budgets_[i] = script_["rules"][i].value("fail_times", 0);
        }
    }

    std::string name() const override { return "mock"; }

    ChatResponse call(const ChatRequest& request) override {
        std::lock_guard<std::mutex> lock(mu_);
        if (script_.contains("rules")) {
            const json& rules = script_["rules"];
            for (size_t i = 0; i < rules.size(); ++i) {
                if (!matches(rules[i], request)) continue;
                if (rules[i].value("fail", false))
                    throw TransportError("mock: scripted failure (rule " + std::to_string(i) + ")");
                if (fail_budgets_[i] > 0) {
                    --fail_budgets_[i];
                    throw TransportError("mock: scripted transient failure (rule " +
                                         std::to_string(i) + ")");
                }
                return render(rules[i].value("response", json::object()), request);
            }
        }
        bool echo = true;
        if (script_.contains("default")) echo = script_["default"].value("echo_user", true);
        if (!echo) throw BackendError("mock: no rule matched and echo disabled");
        ChatResponse resp;
        resp.output_text = request.user_text;
        if (request.mode == ChatMode::kReasoning) resp.reasoning_trace = "";
        return resp;
    }

private:
    static bool matches(const json& rule, const ChatRequest& request) {
        if (!rule.contains("match")) return true;
        const json& m = rule["match"];
        if (m.contains("system_contains") &&
            request.system_text.find(m["system_contains"].get<std::string>()) ==
                std::string::npos)
            return false;
        if (m.contains("user_contains") &&
            request.user_text.find(m["user_contains"].get<std::string>()) == std::string::npos)
            return false;
        if (m.contains("mode") && m["mode"].get<std::string>() != to_string(request.mode))
            return false;
        if (m.contains("model_id") && m["model_id"].get<std::string>() != request.model_id)
            return false;
        return true;
    }

    static std::string substitute(std::string text, const ChatRequest& request) {
        if (text.find("{user}") != std::string::npos)
            text = replace_all(std::move(text), "{user}", request.user_text);
        if (text.find("{system}") != std::string::npos)
            text = replace_all(std::move(text), "{system}", request.system_text);
        if (text.find("{chunk}") != std::string::npos) {
            std::string chunk =
                extract_between(request.user_text, "CHUNK START\n", "\nCHUNK END");
            text = replace_all(std::move(text), "{chunk}", chunk);
        }
        if (text.find("{trace}") != std::string::npos) {
            std::string trace =
                extract_between(request.user_text, "TRACE START\n", "\nTRACE END");
            if (trace.empty())
                trace = extract_between(request.system_text, "[BEGIN TRACE]\n", "\n[END TRACE]");
            if (trace.empty())
                trace = extract_between(request.user_text, "[BEGIN TRACE]\n", "\n[END TRACE]");
            text = replace_all(std::move(text), "{trace}", trace);
        }
        return text;
    }

    ChatResponse render(const json& spec, const ChatRequest& request) const {
        ChatResponse resp;
        resp.output_text = substitute(spec.value("output", ""), request);
        if (spec.contains("reasoning"))
            resp.reasoning_trace = substitute(spec["reasoning"].get<std::string>(), request);
        if (spec.contains("replacements")) {
            for (const auto& r : spec["replacements"]) {
                resp.output_text = replace_all(std::move(resp.output_text),
                                               r.at("find").get<std::string>(),
                                               r.at("replace").get<std::string>());
                if (resp.reasoning_trace)
                    resp.reasoning_trace = replace_all(std::move(*resp.reasoning_trace),
                                                       r.at("find").get<std::string>(),
                                                       r.at("replace").get<std::string>());
            }
        }
        return resp;
    }

    json script_ = json::object();
    std::vector<int> fail_budgets_;
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible backend
// ---------------------------------------------------------------------------

class OpenAiBackend : public Backend {
public:
    explicit OpenAiBackend(BackendConfig config) : config_(std::move(config)) {
        static const std::regex url_re(R"((https?)://([^/]+)(/.*)?)", std::regex::icase);
        std::smatch m;
        if (!std::regex_match(config_.endpoint, m, url_re))
            throw ConfigError("invalid endpoint URL: " + config_.endpoint);
        base_ = m[1].str() + "://" + m[2].str();
        path_ = m[3].matched && m[3].length() > 0 ? m[3].str() : "/v1/chat/completions";
    }

    std::string name() const override { return "openai"; }

    ChatResponse call(const ChatRequest& request) override {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key || !*key)
            throw BackendError("api key env var not set: " + config_.api_key_env);

        json body;
        body["model"] = request.model_id;
        json messages = json::array();
        if (!request.system_text.empty())
            messages.push_back({{"role", "system"}, {"content", request.system_text}});
        if (!request.user_text.empty())
            messages.push_back({{"role", "user"}, {"content", request.user_text}});
        body["messages"] = messages;
        body["max_tokens"] = request.effective_max_tokens();
        body["temperature"] = request.decoding.deterministic ? 0.0 : request.decoding.temperature;

        httplib::Client client(base_);
        client.set_connection_timeout(30);
        client.set_read_timeout(600);
        httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
        auto result = client.Post(path_, headers, body.dump(), "application/json");
        if (!result)
            throw TransportError("transport failure: " + httplib::to_string(result.error()));
        if (result->status == 429 || result->status >= 500)
            throw TransportError("provider returned HTTP " + std::to_string(result->status));
        json payload;
        try {
            payload = json::parse(result->body);
        } catch (const std::exception&) {
            throw BackendError("unparseable provider response (HTTP " +
                               std::to_string(result->status) + ")");
        }
        if (result->status != 200 || payload.contains("error")) {
            std::string detail = payload.contains("error") ? payload["error"].dump() : result->body;
            throw BackendError("provider error (HTTP " + std::to_string(result->status) +
                               "): " + detail);
        }
        return parse_payload(payload);
    }

private:
    ChatResponse parse_payload(const json& payload) const {
        ChatResponse resp;
        const json& message = payload.at("choices").at(0).at("message");
        std::string content = message.value("content", "");
        if (message.contains("reasoning_content") && !message["reasoning_content"].is_null()) {
            resp.reasoning_trace = message["reasoning_content"].get<std::string>();
            resp.output_text = content;
        } else {
            // Providers that interleave thinking in the content stream are
            // normalized by the configured delimiters.
            size_t open = content.find(config_.think_open);
            size_t close = content.find(config_.think_close);
            if (open != std::string::npos && close != std::string::npos && close > open) {
                resp.reasoning_trace =
                    content.substr(open + config_.think_open.size(),
                                   close - open - config_.think_open.size());
                std::string rest = content.substr(0, open) +
                                   content.substr(close + config_.think_close.size());
                resp.output_text = trim(rest);
            } else {
                resp.output_text = content;
            }
        }
        if (payload.contains("usage")) {
            resp.usage.prompt_tokens = payload["usage"].value("prompt_tokens", 0);
            resp.usage.completion_tokens = payload["usage"].value("completion_tokens", 0);
        }
        return resp;
    }

    BackendConfig config_;
    std::string base_;
    std::string path_;
};

}  // namespace

BackendConfig load_backend_config(const std::string& path) {
    json obj;
    try {
        obj = json::parse(read_file(path));
    } catch (const std::exception& e) {
        throw ConfigError(std::string("backend config: ") + e.what());
    }
    BackendConfig config;
    config.kind = obj.value("backend", "mock");
    config.endpoint = obj.value("endpoint", "");
    config.model_id = obj.value("model_id", "");
    config.api_key_env = obj.value("api_key_env", "OPENAI_API_KEY");
    config.script_path = obj.value("script", "");
    config.cache_dir = obj.value("cache_dir", ".distrace-cache");
    config.think_open = obj.value("think_open", "<think>");
    config.think_close = obj.value("think_close", "</think>");
    config.max_retries = obj.value("max_retries", 3);
    config.retry_base_ms = obj.value("retry_base_ms", 250);

    // Relative paths resolve against the config file's directory.
    fs::path base = fs::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
    };
    resolve(config.script_path);
    resolve(config.cache_dir);
    return config;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    if (config.kind == "mock") return std::make_unique<MockBackend>(config.script_path);
    if (config.kind == "openai") return std::make_unique<OpenAiBackend>(config);
    throw ConfigError("unknown backend kind: " + config.kind);
}

std::unique_ptr<Gateway> make_gateway(const BackendConfig& config) {
    return std::make_unique<Gateway>(make_backend(config), config.cache_dir, config.max_retries,
                                     config.retry_base_ms);
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

struct Gateway::Flight {
    std::promise<ChatResponse> promise;
    std::shared_future<ChatResponse> future;
    Flight() : future(promise.get_future().share()) {}
};

Gateway::Gateway(std::unique_ptr<Backend> backend, std::string cache_dir, int max_retries,
                 int retry_base_ms)
    : backend_(std::move(backend)),
      cache_dir_(std::move(cache_dir)),
      max_retries_(max_retries),
      retry_base_ms_(retry_base_ms) {
    if (!cache_dir_.empty()) fs::create_directories(cache_dir_);
}

Gateway::~Gateway() = default;

std::optional<ChatResponse> Gateway::cache_read(const CacheKey& key) {
    if (cache_dir_.empty()) return std::nullopt;
    fs::path file = fs::path(cache_dir_) / (key.digest + ".json");
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    json obj;
    try {
        in >> obj;
        ChatResponse resp;
        const json& r = obj.at("response");
        if (r.contains("reasoning_trace") && !r["reasoning_trace"].is_null())
            resp.reasoning_trace = r["reasoning_trace"].get<std::string>();
        resp.output_text = r.at("output_text").get<std::string>();
        resp.usage.prompt_tokens = r.value("prompt_tokens", 0);
        resp.usage.completion_tokens = r.value("completion_tokens", 0);
        resp.from_cache = true;
        return resp;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "warning: corrupt cache entry %s: %s\n", file.string().c_str(),
                     e.what());
        return std::nullopt;
    }
}

void Gateway::cache_write(const CacheKey& key, const ChatRequest& request,
                          const ChatResponse& response) {
    if (cache_dir_.empty()) return;
    try {
        json obj;
        obj["request"] = {{"model_id", request.model_id},
                          {"system_text", request.system_text},
                          {"user_text", request.user_text},
                          {"mode", to_string(request.mode)},
                          {"max_tokens", request.effective_max_tokens()},
                          {"temperature", request.decoding.temperature},
                          {"deterministic", request.decoding.deterministic}};
        json r;
        if (response.reasoning_trace)
            r["reasoning_trace"] = *response.reasoning_trace;
        else
            r["reasoning_trace"] = nullptr;
        r["output_text"] = response.output_text;
        r["prompt_tokens"] = response.usage.prompt_tokens;
        r["completion_tokens"] = response.usage.completion_tokens;
        obj["response"] = r;
        fs::path file = fs::path(cache_dir_) / (key.digest + ".json");
        write_file(file.string(), obj.dump());
    } catch (const std::exception& e) {
        ++stats_.cache_write_failures;
        std::fprintf(stderr, "warning: cache write failed for %s: %s\n", key.digest.c_str(),
                     e.what());
    }
}

ChatResponse Gateway::call_with_retries(const ChatRequest& request) {
    int attempts = std::max(1, max_retries_);
    for (int attempt = 1;; ++attempt) {
        {
            std::lock_guard<std::mutex> lock(mu_);
            ++stats_.backend_calls;
        }
        try {
            return backend_->call(request);
        } catch (const TransportError&) {
            if (attempt >= attempts) throw;
            auto delay = std::chrono::milliseconds(
                static_cast<int64_t>(retry_base_ms_) << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
    }
}

ChatResponse Gateway::complete(const ChatRequest& request) {
    CacheKey key = cache_key(request);
    std::shared_ptr<Flight> flight;
    bool owner = false;
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (auto cached = cache_read(key)) {
            ++stats_.cache_hits;
            return *cached;
        }
        auto it = inflight_.find(key.digest);
        if (it != inflight_.end()) {
            flight = it->second;
        } else {
            flight = std::make_shared<Flight>();
            inflight_.emplace(key.digest, flight);
            owner = true;
        }
    }
    if (!owner) {
        // Single-flight: ride the call already in progress.
        ChatResponse resp = flight->future.get();
        resp.from_cache = true;
        return resp;
    }
    try {
        ChatResponse resp = call_with_retries(request);
        if (request.mode == ChatMode::kDirect) resp.reasoning_trace.reset();
        resp.from_cache = false;
        {
            std::lock_guard<std::mutex> lock(mu_);
            cache_write(key, request, resp);
            inflight_.erase(key.digest);
        }
        flight->promise.set_value(resp);
        return resp;
    } catch (...) {
        {
            std::lock_guard<std::mutex> lock(mu_);
            inflight_.erase(key.digest);
        }
        flight->promise.set_exception(std::current_exception());
        throw;
    }
}

BatchResult Gateway::batch_complete(const std::vector<ChatRequest>& requests,
                                    size_t max_in_flight) {
    if (max_in_flight < 1) throw ConfigError("batch_complete: max_in_flight must be >= 1");
    BatchResult result;
    result.responses.assign(requests.size(), std::nullopt);
    if (requests.empty()) return result;

    std::mutex failures_mu;
    std::atomic<size_t> next{0};
    size_t workers = std::min(max_in_flight, requests.size());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= requests.size()) return;
                try {
                    result.responses[i] = complete(requests[i]);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(failures_mu);
                    result.failures.push_back({i, e.what()});
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    std::sort(result.failures.begin(), result.failures.end(),
              [](const BatchItemFailure& a, const BatchItemFailure& b) { return a.index < b.index; });
    return result;
}

GatewayStats Gateway::stats() const {
    std::lock_guard<std::mutex> lock(mu_);
    return stats_;
}

}  // namespace distrace
