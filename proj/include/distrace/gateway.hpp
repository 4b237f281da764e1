#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace distrace {

enum class ChatMode { kDirect, kCot, kReasoning };

std::string to_string(ChatMode mode);
ChatMode chat_mode_from_string(const std::string& s);

struct Decoding {
    double temperature = 0.0;
    bool deterministic = true;
};

/// Token limits default per mode: 16384 for reasoning, 8192 otherwise.
int default_max_tokens(ChatMode mode);

struct ChatRequest {
    std::string model_id;
    std::string system_text;
    std::string user_text;
    ChatMode mode = ChatMode::kDirect;
    int max_tokens = 0;  // 0 = per-mode default
    Decoding decoding;

    int effective_max_tokens() const {
        return max_tokens > 0 ? max_tokens : default_max_tokens(mode);
    }
};

struct TokenUsage {
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
};

struct ChatResponse {
    std::optional<std::string> reasoning_trace;  // absent for mode=direct
    std::string output_text;
    TokenUsage usage;
    bool from_cache = false;
};

/// Content-addressed key over the full request: equal requests collide,
/// any field change rekeys. 64-hex-char SHA-256, stable across platforms
/// and process restarts.
struct CacheKey {
    std::string digest;
};

CacheKey cache_key(const ChatRequest& request);

/// One backend invocation. Throws BackendError on transport/provider failure.
class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse call(const ChatRequest& request) = 0;
    virtual std::string name() const = 0;
};

struct BackendConfig {
    std::string kind;  // "mock" | "openai"
    std::string endpoint;
    std::string model_id;
    std::string api_key_env = "OPENAI_API_KEY";
    std::string script_path;  // mock only
    std::string cache_dir;
    std::string think_open = "<think>";
    std::string think_close = "</think>";
    int max_retries = 3;
    int retry_base_ms = 250;
};

BackendConfig load_backend_config(const std::string& path);
std::unique_ptr<Backend> make_backend(const BackendConfig& config);

struct GatewayStats {
    int64_t backend_calls = 0;    // attempts against the backend
    int64_t cache_hits = 0;       // disk-cache hits
    int64_t cache_write_failures = 0;
};

struct BatchItemFailure {
    size_t index;
    std::string message;
};

struct BatchResult {
    /// Positionally aligned with the request list; nullopt where that
    /// item failed.
    std::vector<std::optional<ChatResponse>> responses;
    std::vector<BatchItemFailure> failures;

    bool all_ok() const { return failures.empty(); }
};

/// Provider-agnostic completion access with a content-addressed disk cache,
/// capped retries, and single-flight de-duplication of identical in-flight
/// requests. Shareable across threads.
class Gateway {
public:
    Gateway(std::unique_ptr<Backend> backend, std::string cache_dir,
            int max_retries = 3, int retry_base_ms = 250);
    ~Gateway();

    /// Cache hit: returns the stored response, from_cache=true, no backend
    /// call. Miss: calls the backend (with retries), persists, returns.
    ChatResponse complete(const ChatRequest& request);

    /// Fans out with at most max_in_flight uncompleted calls at any instant.
    /// Per-item failures are reported positionally; the batch continues.
    BatchResult batch_complete(const std::vector<ChatRequest>& requests, size_t max_in_flight);

    GatewayStats stats() const;
    const std::string& cache_dir() const { return cache_dir_; }

private:
    struct Flight;

    ChatResponse call_with_retries(const ChatRequest& request);
    std::optional<ChatResponse> cache_read(const CacheKey& key);
    void cache_write(const CacheKey& key, const ChatRequest& request, const ChatResponse& response);

    std::unique_ptr<Backend> backend_;
    std::string cache_dir_;
    int max_retries_;
    int retry_base_ms_;

    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Flight>> inflight_;
    GatewayStats stats_;
};

/// Convenience: gateway from a backend config file.
std::unique_ptr<Gateway> make_gateway(const BackendConfig& config);

}  // namespace distrace
