#include "chronoforge/pageviews.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace chronoforge {

bool MonthRange::contains(int year, int month) const {
    const int k = year * 12 + month;
    return k >= from_year * 12 + from_month && k <= to_year * 12 + to_month;
}

std::string encode_title(std::string_view page_title) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (char ch : page_title) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (c == ' ') {
            out += '_';
        } else if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out;
}

std::string pv_base_from_env() {
    const char* v = std::getenv("CHRONOFORGE_PV_BASE");
    if (v && *v) return v;
    return "https://wikimedia.org/api/rest_v1";
}

WikimediaSource::WikimediaSource(std::shared_ptr<HttpTransport> transport, RetryPolicy retry)
    : transport_(std::move(transport)), retry_(std::move(retry)) {}

std::string WikimediaSource::request_path(const std::string& page_title, const MonthRange& range) {
    static const int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const int y = range.to_year;
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    const int last = range.to_month == 2 && leap ? 29 : days[range.to_month - 1];
    char span[64];
    std::snprintf(span, sizeof span, "%04d%02d0100/%04d%02d%02d00", range.from_year, range.from_month, y,
                  range.to_month, last);
    return "/metrics/pageviews/per-article/en.wikipedia/all-access/user/" + encode_title(page_title) + "/monthly/" +
           span;
}

std::vector<MonthlyViews> WikimediaSource::parse_response(const std::string& body, const MonthRange& range) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("items") || !j["items"].is_array()) {
        throw FormatError("pageviews: malformed response");
    }
    std::vector<MonthlyViews> out;
    for (const auto& item : j["items"]) {
        const std::string ts = item.value("timestamp", "");
        if (ts.size() < 6 || !item.contains("views")) throw FormatError("pageviews: malformed item");
        MonthlyViews m{std::stoi(ts.substr(0, 4)), std::stoi(ts.substr(4, 2)), item["views"].get<std::uint64_t>()};
        if (range.contains(m.year, m.month)) out.push_back(m);
    }
    return out;
}

std::vector<MonthlyViews> WikimediaSource::monthly(const std::string& page_title, const MonthRange& range) {
    const std::string path = request_path(page_title, range);
    HeaderList headers{{"User-Agent", "chronoforge/1.0 (research tooling)"}};
    auto resp = send_with_retries([&] { return transport_->get(path, headers); }, retry_, "pageviews " + page_title);
    if (resp.status == 404) throw NotFoundError("no pageview data for page '" + page_title + "'");
    if (resp.status != 200) {
        throw TransportError("pageviews HTTP " + std::to_string(resp.status) + " for '" + page_title + "'");
    }
    return parse_response(resp.body, range);
}

SyntheticPageviewSource::SyntheticPageviewSource(std::uint64_t seed, std::vector<std::string> missing)
    : seed_(seed), missing_(std::move(missing)) {}

std::vector<MonthlyViews> SyntheticPageviewSource::monthly(const std::string& page_title, const MonthRange& range) {
    for (const auto& m : missing_) {
        if (m == page_title) throw NotFoundError("no pageview data for page '" + page_title + "'");
    }
    // level between e^4 (~55) and e^11 (~60k) views a month
    const double level = 4.0 + 7.0 * keyed_uniform(seed_, "pv#" + page_title);
    std::vector<MonthlyViews> out;
    for (int k = range.from_year * 12 + range.from_month - 1; k <= range.to_year * 12 + range.to_month - 1; ++k) {
        const int year = k / 12;
        const int month = k % 12 + 1;
        const double jitter = keyed_uniform(seed_, "pv#" + page_title + "#" + std::to_string(k)) - 0.5;
        out.push_back({year, month, static_cast<std::uint64_t>(std::llround(std::exp(level + 0.4 * jitter)))});
    }
    return out;
}

double mean_views(const std::vector<MonthlyViews>& months) {
    if (months.empty()) throw NoDataError("no months with pageview data");
    std::uint64_t total = 0;
    for (const auto& m : months) total += m.views;
    return static_cast<double>(total) / static_cast<double>(months.size());
}

PageviewClient::PageviewClient(std::shared_ptr<PageviewSource> source, std::filesystem::path cache_file,
                               MonthRange range)
    : source_(std::move(source)), path_(std::move(cache_file)), range_(range) {
    std::ifstream in(path_);
    for (std::string line; std::getline(in, line);) {
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        try {
            Entry e;
            e.found = j.at("found").get<bool>();
            for (const auto& m : j.at("months")) {
                e.months.push_back({m.at(0).get<int>(), m.at(1).get<int>(), m.at(2).get<std::uint64_t>()});
            }
            cache_[j.at("title").get<std::string>()] = std::move(e);
        } catch (const nlohmann::json::exception&) {
            continue;
        }
    }
}

PageviewClient::~PageviewClient() {
    try {
        if (appended_) compact_jsonl(path_, "title");
    } catch (const std::exception&) {
        // the append log is still valid uncompacted
    }
}

PageviewClient::Entry PageviewClient::lookup(const std::string& page_title) {
    {
        std::lock_guard lock(mu_);
        auto it = cache_.find(page_title);
        if (it != cache_.end()) return it->second;
        ++source_calls_;
    }
    Entry e;
    try {
        e.months = source_->monthly(page_title, range_);
    } catch (const NotFoundError&) {
        e.found = false;
    }
    nlohmann::ordered_json j;
    j["title"] = page_title;
    j["found"] = e.found;
    j["months"] = nlohmann::ordered_json::array();
    for (const auto& m : e.months) j["months"].push_back({m.year, m.month, m.views});
    std::lock_guard lock(mu_);
    if (!path_.empty()) {
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        std::ofstream out(path_, std::ios::app);
        out << j.dump() << "\n";
        appended_ = true;
    }
    cache_[page_title] = e;
    return e;
}

double PageviewClient::fetch_avg_monthly(const std::string& page_title) {
    auto e = lookup(page_title);
    if (!e.found) throw NotFoundError("no pageview data for page '" + page_title + "'");
    return mean_views(e.months);
}

std::size_t PageviewClient::source_calls() const {
    std::lock_guard lock(mu_);
    return source_calls_;
}

AnnotationReport annotate_popularity(Dataset& ds, PageviewClient& client, double max_failure_rate,
                                     std::size_t workers) {
    std::set<std::string> title_set;
    for (const auto& q : ds.questions) title_set.insert(q.page_title);
    std::vector<std::string> titles(title_set.begin(), title_set.end());
    std::vector<std::optional<double>> values(titles.size());
    std::vector<std::string> errors(titles.size());
    parallel_for(titles.size(), workers, [&](std::size_t i) {
        try {
            values[i] = client.fetch_avg_monthly(titles[i]);
        } catch (const NotFoundError&) {
            errors[i] = "not_found";
        } catch (const NoDataError&) {
            errors[i] = "no_data";
        } catch (const TransportError&) {
            errors[i] = "transport";
        } catch (const FormatError&) {
            errors[i] = "format";
        }
    });
    std::map<std::string, std::optional<double>> by_title;
    std::map<std::string, std::string> err_by_title;
    for (std::size_t i = 0; i < titles.size(); ++i) {
        by_title[titles[i]] = values[i];
        err_by_title[titles[i]] = errors[i];
    }
    AnnotationReport r;
    double train_sum = 0.0;
    std::size_t train_n = 0;
    for (auto& q : ds.questions) {
        ++r.questions;
        q.popularity = by_title[q.page_title];
        if (q.popularity) {
            ++r.annotated;
            auto it = ds.split_assignment.find(q.id);
            if (it != ds.split_assignment.end() && it->second == Split::train) {
                train_sum += *q.popularity;
                ++train_n;
            }
        } else {
            ++r.failed;
            ++r.errors[err_by_title[q.page_title]];
        }
    }
    if (train_n) r.train_mean = train_sum / static_cast<double>(train_n);
    if (r.questions && static_cast<double>(r.failed) / static_cast<double>(r.questions) > max_failure_rate) {
        throw Error("popularity lookup failed for " + std::to_string(r.failed) + " of " +
                    std::to_string(r.questions) + " questions");
    }
    return r;
}

}  // namespace chronoforge
