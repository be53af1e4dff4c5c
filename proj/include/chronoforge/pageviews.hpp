#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "chronoforge/model_client.hpp"
#include "chronoforge/temporal_kb.hpp"

namespace chronoforge {

struct MonthlyViews {
    int year = 0;
    int month = 0;
    std::uint64_t views = 0;

    friend bool operator==(const MonthlyViews&, const MonthlyViews&) = default;
};

struct MonthRange {
    int from_year = 2016;
    int from_month = 1;
    int to_year = 2023;
    int to_month = 12;

    bool contains(int year, int month) const;
};

/// Where monthly counts come from. Throws NotFoundError for unknown pages.
class PageviewSource {
public:
    virtual ~PageviewSource() = default;
    virtual std::vector<MonthlyViews> monthly(const std::string& page_title, const MonthRange& range) = 0;
};

/// "Foo bar/baz" -> "Foo_bar%2Fbaz".
std::string encode_title(std::string_view page_title);

/// Base URL from CHRONOFORGE_PV_BASE, else the public Wikimedia REST API.
std::string pv_base_from_env();

/// Per-article monthly endpoint of the Wikimedia REST API.
class WikimediaSource : public PageviewSource {
public:
    WikimediaSource(std::shared_ptr<HttpTransport> transport, RetryPolicy retry = {});
    std::vector<MonthlyViews> monthly(const std::string& page_title, const MonthRange& range) override;

    static std::string request_path(const std::string& page_title, const MonthRange& range);
    static std::vector<MonthlyViews> parse_response(const std::string& body, const MonthRange& range);

private:
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
};

/// Deterministic offline counts: a per-title log-normal level with monthly
/// jitter. Titles listed in `missing` report not-found.
class SyntheticPageviewSource : public PageviewSource {
public:
    explicit SyntheticPageviewSource(std::uint64_t seed, std::vector<std::string> missing = {});
    std::vector<MonthlyViews> monthly(const std::string& page_title, const MonthRange& range) override;

private:
    std::uint64_t seed_;
    std::vector<std::string> missing_;
};

/// Mean monthly views over months with data.
double mean_views(const std::vector<MonthlyViews>& months);

/// Caching front end. Raw months are stored in `pageviews.jsonl` so the
/// mean is recomputed identically from cache.
class PageviewClient {
public:
    PageviewClient(std::shared_ptr<PageviewSource> source, std::filesystem::path cache_file, MonthRange range = {});
    /// Compacts the cache file into title order if this client appended to it.
    ~PageviewClient();
    PageviewClient(const PageviewClient&) = delete;
    PageviewClient& operator=(const PageviewClient&) = delete;

    /// Throws NotFoundError or NoDataError.
    double fetch_avg_monthly(const std::string& page_title);
    std::size_t source_calls() const;

private:
    struct Entry {
        bool found = true;
        std::vector<MonthlyViews> months;
    };
    Entry lookup(const std::string& page_title);

    std::shared_ptr<PageviewSource> source_;
    std::filesystem::path path_;
    MonthRange range_;
    mutable std::mutex mu_;
    std::map<std::string, Entry> cache_;
    std::size_t source_calls_ = 0;
    bool appended_ = false;
};

struct AnnotationReport {
    std::size_t questions = 0;
    std::size_t annotated = 0;
    std::size_t failed = 0;
    std::map<std::string, std::size_t> errors;  // by error kind
    std::optional<double> train_mean;
};

/// Fills popularity for every question; failures leave it empty. Throws
/// Error when the failure rate exceeds max_failure_rate.
AnnotationReport annotate_popularity(Dataset& ds, PageviewClient& client, double max_failure_rate = 0.5,
                                     std::size_t workers = 4);

}  // namespace chronoforge
