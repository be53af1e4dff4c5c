#include "chronoforge/model_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <httplib.h>

namespace chronoforge {

void CompletionRequest::validate() const {
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
    if (temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
}

nlohmann::ordered_json CompletionRequest::canonical_json() const {
    nlohmann::ordered_json j;
    j["prompt"] = prompt;
    j["max_tokens"] = max_tokens;
    j["temperature"] = temperature;
    j["n"] = n_samples;
    j["stop"] = stop;
    j["logprobs"] = want_logprobs;
    j["attempt"] = attempt;
    return j;
}

// ---------------------------------------------------------------------------

InFlightLimiter::InFlightLimiter(std::size_t max_in_flight) : max_(std::max<std::size_t>(1, max_in_flight)) {}

void InFlightLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return current_ < max_; });
    ++current_;
    peak_ = std::max(peak_, current_);
}

void InFlightLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --current_;
    }
    cv_.notify_one();
}

std::size_t InFlightLimiter::peak() const {
    std::lock_guard lock(mu_);
    return peak_;
}

// ---------------------------------------------------------------------------

namespace {

std::pair<std::string, std::string> split_base_url(const std::string& url) {
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

httplib::Headers to_headers(const HeaderList& headers) {
    httplib::Headers out;
    for (const auto& [k, v] : headers) out.emplace(k, v);
    return out;
}

}  // namespace

HttplibTransport::HttplibTransport(std::string base_url, std::chrono::seconds timeout) : timeout_(timeout) {
    std::tie(origin_, prefix_) = split_base_url(base_url);
}

HttpResponse HttplibTransport::post(const std::string& path, const std::string& body, const HeaderList& headers) {
    httplib::Client cli(origin_);
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    cli.set_follow_location(true);
    auto res = cli.Post(prefix_ + path, to_headers(headers), body, "application/json");
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
}

HttpResponse HttplibTransport::get(const std::string& path, const HeaderList& headers) {
    httplib::Client cli(origin_);
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    cli.set_follow_location(true);
    auto res = cli.Get(prefix_ + path, to_headers(headers));
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
}

// ---------------------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::delay_for(int attempt) const {
    auto d = base_delay * (1LL << std::min(attempt, 20));
    return std::min<std::chrono::milliseconds>(d, max_delay);
}

bool is_retryable_status(int status) { return status == 0 || status == 429 || (status >= 500 && status < 600); }

HttpResponse send_with_retries(const std::function<HttpResponse()>& send, const RetryPolicy& policy,
                               const std::string& what) {
    HttpResponse res;
    for (int attempt = 0;; ++attempt) {
        res = send();
        if (!is_retryable_status(res.status)) return res;
        if (attempt >= policy.max_retries) break;
        if (policy.sleep) policy.sleep(policy.delay_for(attempt));
    }
    std::string detail = res.status == 0 ? "connection failed (" + res.body + ")" : "HTTP " + std::to_string(res.status);
    throw TransportError(what + ": giving up after " + std::to_string(policy.max_retries + 1) + " attempts, last " +
                         detail);
}

std::optional<std::string> api_key_from_env() {
    const char* key = std::getenv("CHRONOFORGE_API_KEY");
    if (!key || !*key) return std::nullopt;
    return std::string(key);
}

HttpModelClient::HttpModelClient(std::shared_ptr<HttpTransport> transport, std::string model, RetryPolicy retry,
                                 std::size_t max_in_flight, std::optional<std::string> api_key)
    : transport_(std::move(transport)),
      model_(std::move(model)),
      retry_(std::move(retry)),
      limiter_(max_in_flight),
      api_key_(std::move(api_key)) {}

nlohmann::json HttpModelClient::request_body(const CompletionRequest& req, const std::string& model) {
    nlohmann::json j;
    j["model"] = model;
    j["prompt"] = req.prompt;
    j["max_tokens"] = req.max_tokens;
    j["temperature"] = req.temperature;
    j["n"] = req.n_samples;
    if (!req.stop.empty()) j["stop"] = req.stop;
    if (req.want_logprobs) j["logprobs"] = 1;
    return j;
}

CompletionResult HttpModelClient::parse_response(const std::string& body, const CompletionRequest& req) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw TransportError(std::string("completion response is not JSON: ") + e.what());
    }
    if (!j.contains("choices") || !j["choices"].is_array()) throw TransportError("completion response lacks choices");
    auto choices = j["choices"];
    std::stable_sort(choices.begin(), choices.end(), [](const nlohmann::json& a, const nlohmann::json& b) {
        return a.value("index", 0) < b.value("index", 0);
    });
    CompletionResult out;
    for (const auto& c : choices) {
        out.texts.push_back(c.value("text", ""));
        std::optional<double> mean;
        auto lp = c.find("logprobs");
        if (lp != c.end() && lp->is_object() && lp->contains("token_logprobs")) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& v : (*lp)["token_logprobs"]) {
                if (v.is_number()) {
                    sum += v.get<double>();
                    ++n;
                }
            }
            if (n > 0) mean = sum / static_cast<double>(n);
        }
        if (req.want_logprobs && !mean) throw CapabilityError("endpoint returned no token log-probabilities");
        out.mean_logprob.push_back(mean);
    }
    if (static_cast<int>(out.texts.size()) != req.n_samples) {
        throw TransportError("expected " + std::to_string(req.n_samples) + " choices, got " +
                             std::to_string(out.texts.size()));
    }
    return out;
}

CompletionResult HttpModelClient::complete(const CompletionRequest& req) {
    req.validate();
    const std::string body = request_body(req, model_).dump();
    HeaderList headers;
    if (api_key_) headers.emplace_back("Authorization", "Bearer " + *api_key_);
    HttpResponse res;
    {
        InFlightLimiter::Guard guard(limiter_);
        res = send_with_retries([&] { return transport_->post("/v1/completions", body, headers); }, retry_,
                                "completion request");
    }
    if (res.status < 200 || res.status >= 300) {
        throw TransportError("completion request failed with HTTP " + std::to_string(res.status) + ": " +
                             res.body.substr(0, 200));
    }
    return parse_response(res.body, req);
}

// ---------------------------------------------------------------------------

nlohmann::json result_to_json(const CompletionResult& r) {
    nlohmann::json j;
    j["texts"] = r.texts;
    auto lps = nlohmann::json::array();
    for (const auto& lp : r.mean_logprob) lps.push_back(lp ? nlohmann::json(*lp) : nlohmann::json(nullptr));
    j["mean_logprob"] = std::move(lps);
    return j;
}

CompletionResult result_from_json(const nlohmann::json& j) {
    CompletionResult r;
    r.texts = j.at("texts").get<std::vector<std::string>>();
    for (const auto& v : j.at("mean_logprob")) {
        r.mean_logprob.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    }
    if (r.mean_logprob.size() != r.texts.size()) throw ParseError("cache entry with mismatched logprob count");
    return r;
}

CachingClient::CachingClient(std::shared_ptr<ModelClient> inner, std::filesystem::path cache_file, std::string ns)
    : inner_(std::move(inner)), path_(std::move(cache_file)), ns_(std::move(ns)) {
    std::ifstream in(path_);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            entries_[j.at("key").get<std::string>()] = result_from_json(j.at("result"));
        } catch (const std::exception&) {
            // a torn final line from an interrupted run is ignored; the request is simply redone
        }
    }
}

std::string CachingClient::key_for(const CompletionRequest& req) const {
    return hex64(fnv1a64(ns_ + "\n" + req.canonical_json().dump()));
}

CompletionResult CachingClient::complete(const CompletionRequest& req) {
    const std::string key = key_for(req);
    {
        std::lock_guard lock(mu_);
        if (auto it = entries_.find(key); it != entries_.end()) {
            ++hits_;
            return it->second;
        }
    }
    CompletionResult result = inner_->complete(req);
    std::lock_guard lock(mu_);
    ++misses_;
    if (entries_.emplace(key, result).second) {
        nlohmann::json line;
        line["key"] = key;
        line["request"] = req.canonical_json();
        line["result"] = result_to_json(result);
        if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
        std::ofstream out(path_, std::ios::app);
        out << line.dump() << '\n';
        if (!out) throw Error("cannot append to cache " + path_.string());
        appended_ = true;
    }
    return result;
}

CachingClient::~CachingClient() {
    try {
        if (appended_) compact();
    } catch (const std::exception&) {
        // the append log is still valid uncompacted
    }
}

void CachingClient::compact() {
    std::lock_guard lock(mu_);
    compact_jsonl(path_, "key");
    appended_ = false;
}

std::size_t CachingClient::hits() const {
    std::lock_guard lock(mu_);
    return hits_;
}

std::size_t CachingClient::misses() const {
    std::lock_guard lock(mu_);
    return misses_;
}

std::string apply_stop(std::string text, const std::vector<std::string>& stop) {
    std::size_t cut = text.size();
    for (const auto& s : stop) {
        if (s.empty()) continue;
        auto pos = text.find(s);
        if (pos != std::string::npos) cut = std::min(cut, pos);
    }
    text.resize(cut);
    return text;
}

}  // namespace chronoforge
