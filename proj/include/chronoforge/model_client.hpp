#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "chronoforge/common.hpp"

namespace chronoforge {

struct CompletionRequest {
    std::string prompt;
    int max_tokens = 32;
    double temperature = 0.0;
    int n_samples = 1;
    std::vector<std::string> stop;
    bool want_logprobs = false;
    // Distinguishes deliberate re-requests of the same prompt in the cache
    // (e.g. a question-generation retry). Not sent over the wire.
    int attempt = 0;

    void validate() const;
    nlohmann::ordered_json canonical_json() const;
};

struct CompletionResult {
    std::vector<std::string> texts;
    std::vector<std::optional<double>> mean_logprob;  // parallel to texts
};

class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual CompletionResult complete(const CompletionRequest& req) = 0;
    virtual bool supports_logprobs() const { return true; }
};

/// Counting semaphore that also records the highest concurrency it has seen.
class InFlightLimiter {
public:
    explicit InFlightLimiter(std::size_t max_in_flight);

    void acquire();
    void release();
    std::size_t peak() const;
    std::size_t limit() const { return max_; }

    class Guard {
    public:
        explicit Guard(InFlightLimiter& l) : l_(l) { l_.acquire(); }
        ~Guard() { l_.release(); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;

    private:
        InFlightLimiter& l_;
    };

private:
    std::size_t max_;
    std::size_t current_ = 0;
    std::size_t peak_ = 0;
    mutable std::mutex mu_;
    std::condition_variable cv_;
};

// ---- transport -------------------------------------------------------------

struct HttpResponse {
    int status = 0;  // 0 = connection failure
    std::string body;
};

using HeaderList = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& path, const std::string& body, const HeaderList& headers) = 0;
    virtual HttpResponse get(const std::string& path, const HeaderList& headers) = 0;
};

/// cpp-httplib backed transport. `base_url` may carry a path prefix
/// ("https://wikimedia.org/api/rest_v1"); request paths are appended to it.
class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(60));
    HttpResponse post(const std::string& path, const std::string& body, const HeaderList& headers) override;
    HttpResponse get(const std::string& path, const HeaderList& headers) override;

private:
    std::string origin_;
    std::string prefix_;
    std::chrono::seconds timeout_;
};

struct RetryPolicy {
    int max_retries = 5;
    std::chrono::milliseconds base_delay{250};
    std::chrono::milliseconds max_delay{8000};
    // Injected in tests to avoid real sleeping.
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };

    std::chrono::milliseconds delay_for(int attempt) const;
};

bool is_retryable_status(int status);

/// Sends `body` with retries on connection errors, 429 and 5xx. Returns the
/// final response; throws TransportError when retries are exhausted.
HttpResponse send_with_retries(const std::function<HttpResponse()>& send, const RetryPolicy& policy,
                               const std::string& what);

/// Client for a completions-style endpoint: POST <base>/v1/completions.
class HttpModelClient : public ModelClient {
public:
    HttpModelClient(std::shared_ptr<HttpTransport> transport, std::string model, RetryPolicy retry = {},
                    std::size_t max_in_flight = 8, std::optional<std::string> api_key = std::nullopt);

    CompletionResult complete(const CompletionRequest& req) override;
    const InFlightLimiter& limiter() const { return limiter_; }

    static nlohmann::json request_body(const CompletionRequest& req, const std::string& model);
    static CompletionResult parse_response(const std::string& body, const CompletionRequest& req);

private:
    std::shared_ptr<HttpTransport> transport_;
    std::string model_;
    RetryPolicy retry_;
    InFlightLimiter limiter_;
    std::optional<std::string> api_key_;
};

/// API key from CHRONOFORGE_API_KEY, if set and non-empty.
std::optional<std::string> api_key_from_env();

// ---- cache -------------------------------------------------------------------

/// Wraps a client with an append-only JSONL cache keyed by request hash.
/// `ns` separates otherwise identical requests to different models.
class CachingClient : public ModelClient {
public:
    CachingClient(std::shared_ptr<ModelClient> inner, std::filesystem::path cache_file, std::string ns);
    /// Compacts the file if this client appended to it.
    ~CachingClient() override;
    CachingClient(const CachingClient&) = delete;
    CachingClient& operator=(const CachingClient&) = delete;

    /// Rewrites the cache file with one line per key in key order, so the
    /// file content does not depend on request completion order.
    void compact();

    CompletionResult complete(const CompletionRequest& req) override;
    bool supports_logprobs() const override { return inner_->supports_logprobs(); }

    std::size_t hits() const;
    std::size_t misses() const;
    std::string key_for(const CompletionRequest& req) const;

private:
    std::shared_ptr<ModelClient> inner_;
    std::filesystem::path path_;
    std::string ns_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, CompletionResult> entries_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
    bool appended_ = false;
};

nlohmann::json result_to_json(const CompletionResult& r);
CompletionResult result_from_json(const nlohmann::json& j);

/// Cuts `text` at the earliest occurrence of any stop sequence.
std::string apply_stop(std::string text, const std::vector<std::string>& stop);

}  // namespace chronoforge
