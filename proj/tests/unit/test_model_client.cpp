#include <doctest.h>

#include <atomic>
#include <thread>

#include "chronoforge/completion_server.hpp"
#include "chronoforge/model_client.hpp"
#include "chronoforge/prompting.hpp"
#include "chronoforge/stub_oracle.hpp"
#include "support.hpp"

using namespace chronoforge;
using testsupport::question;

namespace {

std::shared_ptr<Dataset> film_dataset() {
    auto ds = std::make_shared<Dataset>();
    ds->questions.push_back(testsupport::film_question());
    ds->questions.push_back(question("pair", "Which two films tied?", {{"Zulu", 2015, std::nullopt}, {"Alpha", 2015, std::nullopt}}));
    return ds;
}

std::string qa_prompt(const std::string& q, std::optional<Year> year) {
    auto strat = strategy_from_name(year ? "sensitive-time" : "insensitive", year);
    return build_qa_prompt(q, strat, fixture_shots(strat.example_kind));
}

// Scripted transport that also measures concurrency.
class FakeTransport : public HttpTransport {
public:
    std::vector<int> statuses;  // consumed in order, then 200
    std::atomic<int> posts{0};
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
    std::string last_body;
    HeaderList last_headers;
    std::mutex mu;

    HttpResponse post(const std::string&, const std::string& body, const HeaderList& headers) override {
        int now = ++in_flight;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::microseconds(200));
        int n = posts++;
        HttpResponse r;
        {
            std::lock_guard lock(mu);
            last_body = body;
            last_headers = headers;
            r.status = n < static_cast<int>(statuses.size()) ? statuses[n] : 200;
        }
        if (nlohmann::json::parse(body).value("n", 1) == 2) {
            r.body = R"({"choices":[{"index":1,"text":"second","logprobs":{"token_logprobs":[-1.0,-3.0]}},{"index":0,"text":"first","logprobs":null}]})";
        } else {
            r.body = R"({"choices":[{"index":0,"text":"only","logprobs":null}]})";
        }
        --in_flight;
        return r;
    }
    HttpResponse get(const std::string&, const HeaderList&) override { return {404, ""}; }
};

RetryPolicy no_sleep(int retries) {
    RetryPolicy p;
    p.max_retries = retries;
    p.sleep = [](std::chrono::milliseconds) {};
    return p;
}

}  // namespace

TEST_CASE("stub_answer") {
    auto q = testsupport::film_question();
    CHECK(stub_answer(q, 2020) == "Avengers: Endgame");
    CHECK(stub_answer(q, 1990) == kUnknownEntity);
    CHECK(stub_answer(q, 2023) == "Avatar");
    auto pair = question("p", "?", {{"Zulu", 2015, std::nullopt}, {"Alpha", 2015, std::nullopt}});
    CHECK(stub_answer(pair, 2023) == "Alpha");
    auto gap = question("g", "?", {{"Old", 2010, 2012}, {"New", 2020, std::nullopt}});
    CHECK(stub_answer(gap, 2016) == "Old");
}

TEST_CASE("stub oracle answers prompts as of its knowledge year") {
    StubOracle stub(film_dataset(), {2019, 0.0, 1});
    CompletionRequest req;
    req.prompt = qa_prompt("What is the highest-grossing film?", std::nullopt);
    req.stop = {"\n\n"};
    req.n_samples = 3;
    auto res = stub.complete(req);
    REQUIRE(res.texts.size() == 3);
    CHECK(trim(res.texts[0]) == "Avengers: Endgame");
    CHECK(res.texts[0] == res.texts[1]);
    CHECK(res.texts[1] == res.texts[2]);

    req.prompt = qa_prompt("What is the highest-grossing film?", 2012);
    CHECK(trim(stub.complete(req).texts[0]) == "Avatar");
    req.prompt = qa_prompt("What is the highest-grossing film?", 2023);
    CHECK(trim(stub.complete(req).texts[0]) == "Avengers: Endgame");
    req.prompt = qa_prompt("An unknown question?", 2023);
    CHECK(trim(stub.complete(req).texts[0]) == kUnknownEntity);

    req.prompt = adaptive_prompt("What is the highest-grossing film?");
    auto adaptive = trim(stub.complete(req).texts[0]);
    CHECK(adaptive == adaptive_completion(2019, "Avengers: Endgame"));

    StubOracle noisy(film_dataset(), {2019, 1.0, 1});
    req.prompt = qa_prompt("What is the highest-grossing film?", std::nullopt);
    CHECK(trim(noisy.complete(req).texts[0]) == kUnknownEntity);
    CHECK_THROWS_AS(StubOracle(film_dataset(), {2019, 1.5, 1}), ConfigError);
}

TEST_CASE("request validation") {
    CompletionRequest req;
    req.prompt = "x";
    req.n_samples = 0;
    CHECK_THROWS(req.validate());
    req.n_samples = 1;
    req.temperature = -1;
    CHECK_THROWS(req.validate());
}

TEST_CASE("http client retries on 429 and 5xx and sorts choices") {
    auto transport = std::make_shared<FakeTransport>();
    transport->statuses = {429, 503};
    HttpModelClient client(transport, "m", no_sleep(3), 4, std::string("secret"));
    CompletionRequest req;
    req.prompt = "p";
    req.n_samples = 2;
    auto res = client.complete(req);
    CHECK(transport->posts == 3);
    REQUIRE(res.texts.size() == 2);
    CHECK(res.texts[0] == "first");
    CHECK(res.texts[1] == "second");
    CHECK_FALSE(res.mean_logprob[0].has_value());
    CHECK(res.mean_logprob[1] == std::optional<double>(-2.0));
    bool auth = false;
    for (const auto& [k, v] : transport->last_headers) auth = auth || (k == "Authorization" && v == "Bearer secret");
    CHECK(auth);
    auto body = nlohmann::json::parse(transport->last_body);
    CHECK(body["model"] == "m");
    CHECK(body["n"] == 2);
}

TEST_CASE("http client gives up after the retry cap") {
    auto transport = std::make_shared<FakeTransport>();
    transport->statuses = {500, 500, 500, 500};
    HttpModelClient client(transport, "m", no_sleep(2), 4);
    CompletionRequest req;
    req.prompt = "p";
    CHECK_THROWS_AS(client.complete(req), TransportError);
    CHECK(transport->posts == 3);

    auto bad = std::make_shared<FakeTransport>();
    bad->statuses = {400};
    HttpModelClient strict(bad, "m", no_sleep(5), 4);
    CHECK_THROWS_AS(strict.complete(req), TransportError);
    CHECK(bad->posts == 1);
}

TEST_CASE("retry delays grow and are capped") {
    RetryPolicy p;
    CHECK(p.delay_for(1) > p.delay_for(0));
    CHECK(p.delay_for(30) <= p.max_delay);
    CHECK(is_retryable_status(0));
    CHECK(is_retryable_status(429));
    CHECK(is_retryable_status(502));
    CHECK_FALSE(is_retryable_status(404));
}

TEST_CASE("in-flight limit holds under a 1000-request burst") {
    auto transport = std::make_shared<FakeTransport>();
    HttpModelClient client(transport, "m", no_sleep(0), 5);
    parallel_for(1000, 32, [&](std::size_t i) {
        CompletionRequest req;
        req.prompt = "p" + std::to_string(i);
        client.complete(req);
    });
    CHECK(transport->posts == 1000);
    CHECK(transport->peak <= 5);
    CHECK(client.limiter().peak() <= 5);
}

TEST_CASE("caching client persists results and skips repeated calls") {
    testsupport::TempDir dir("cache");
    const auto path = dir.path() / "cache.jsonl";
    auto ds = film_dataset();
    auto stub = std::make_shared<StubOracle>(ds, StubOracleConfig{2019, 0.0, 1});
    CompletionRequest req;
    req.prompt = qa_prompt("What is the highest-grossing film?", std::nullopt);
    req.want_logprobs = true;
    CompletionResult first;
    {
        CachingClient cache(stub, path, "stub");
        first = cache.complete(req);
        cache.complete(req);
        CHECK(cache.hits() == 1);
        CHECK(cache.misses() == 1);
        CompletionRequest retry = req;
        retry.attempt = 1;
        CHECK(cache.key_for(retry) != cache.key_for(req));
    }
    CHECK(stub->calls() == 1);
    CachingClient warm(stub, path, "stub");
    auto again = warm.complete(req);
    CHECK(stub->calls() == 1);
    CHECK(again.texts == first.texts);
    CHECK(again.mean_logprob == first.mean_logprob);
    CachingClient other(stub, path, "other-model");
    other.complete(req);
    CHECK(stub->calls() == 2);

    write_file(path, read_file(path) + "{\"key\": \"torn");
    CachingClient torn(stub, path, "stub");
    torn.complete(req);
    CHECK(torn.hits() == 1);
}

TEST_CASE("cache file content does not depend on request order") {
    testsupport::TempDir dir("cache-order");
    auto ds = film_dataset();
    auto stub = std::make_shared<StubOracle>(ds, StubOracleConfig{2019, 0.0, 1});
    std::vector<CompletionRequest> reqs;
    for (Year y : {2005, 2012, 2020, 2023}) {
        CompletionRequest r;
        r.prompt = qa_prompt("What is the highest-grossing film?", y);
        reqs.push_back(r);
    }
    auto fill = [&](const std::filesystem::path& path, std::vector<CompletionRequest> order) {
        CachingClient cache(stub, path, "stub");
        for (const auto& r : order) cache.complete(r);
    };
    fill(dir.path() / "a.jsonl", reqs);
    std::reverse(reqs.begin(), reqs.end());
    fill(dir.path() / "b.jsonl", reqs);
    const auto a = read_file(dir.path() / "a.jsonl");
    CHECK(a == read_file(dir.path() / "b.jsonl"));
    CHECK(std::count(a.begin(), a.end(), '\n') == 4);

    write_file(dir.path() / "a.jsonl", a + a + "{\"key\": \"torn");
    {
        CachingClient cache(stub, dir.path() / "a.jsonl", "stub");
        cache.compact();
    }
    CHECK(read_file(dir.path() / "a.jsonl") == a);
}

TEST_CASE("apply_stop cuts at the earliest stop sequence") {
    CHECK(apply_stop("abc\n\ndef", {"\n\n"}) == "abc");
    CHECK(apply_stop("abcXdefY", {"Y", "X"}) == "abc");
    CHECK(apply_stop("abc", {}) == "abc");
}

TEST_CASE("completions contract round trip through the HTTP server") {
    auto stub = std::make_shared<StubOracle>(film_dataset(), StubOracleConfig{2019, 0.0, 1});
    CompletionServer server(stub, "stub-2019");
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread th([&] { server.serve(); });

    auto transport = std::make_shared<HttplibTransport>("http://127.0.0.1:" + std::to_string(port));
    HttpModelClient client(transport, "stub-2019", no_sleep(2), 4);
    CompletionRequest req;
    req.prompt = qa_prompt("What is the highest-grossing film?", 2015);
    req.stop = {"\n\n"};
    req.n_samples = 2;
    req.want_logprobs = true;
    auto res = client.complete(req);
    REQUIRE(res.texts.size() == 2);
    CHECK(trim(res.texts[0]) == "Avatar");
    CHECK(res.mean_logprob[0].has_value());
    CHECK(stub->complete(req).texts == res.texts);

    auto health = transport->get("/health", {});
    CHECK(health.status == 200);
    auto bad = transport->post("/v1/completions", R"({"prompt": 3})", {{"Content-Type", "application/json"}});
    CHECK(bad.status == 400);

    server.stop();
    th.join();
}

TEST_CASE("request_from_body validates the contract") {
    auto req = request_from_body(nlohmann::json::parse(R"({"prompt":"p","max_tokens":8,"temperature":0.5,"n":3,"stop":["\n"],"logprobs":1})"));
    CHECK(req.prompt == "p");
    CHECK(req.max_tokens == 8);
    CHECK(req.n_samples == 3);
    CHECK(req.stop == std::vector<std::string>{"\n"});
    CHECK(req.want_logprobs);
    CHECK(request_from_body(nlohmann::json::parse(R"({"prompt":"p","stop":"\n"})")).stop.size() == 1);
    CHECK_THROWS_AS(request_from_body(nlohmann::json::parse(R"({"max_tokens":8})")), FormatError);
    CHECK_THROWS_AS(request_from_body(nlohmann::json::parse(R"({"prompt":"p","n":0})")), FormatError);

    CompletionResult r{{"a", "b"}, {-0.5, std::nullopt}};
    auto body = completion_response_body(r, "m");
    CHECK(body["choices"].size() == 2);
    CHECK(body["choices"][1]["index"] == 1);
    CompletionRequest plain;
    plain.n_samples = 2;
    auto parsed = HttpModelClient::parse_response(body.dump(), plain);
    CHECK(parsed.texts == r.texts);
    CHECK(parsed.mean_logprob == r.mean_logprob);
}
