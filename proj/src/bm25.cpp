#include "chronoforge/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

namespace chronoforge {

namespace {

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a",    "an",   "and",   "are",   "as",   "at",    "be",   "but",  "by",  "for",  "if",
        "in",   "into", "is",    "it",    "no",   "not",   "of",   "on",   "or",  "such", "that",
        "the",  "their", "then", "there", "these", "they", "this", "to",   "was", "will", "with"};
    return words;
}

bool word_char(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

}  // namespace

std::vector<std::string> bm25_tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && !stopwords().count(cur)) out.push_back(cur);
        cur.clear();
    };
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (word_char(c)) {
            cur += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
        } else {
            flush();
        }
    }
    flush();
    return out;
}

Bm25Index::Bm25Index(const std::vector<std::string>& docs, Bm25Params params) : p_(params) {
    terms_.reserve(docs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        terms_.push_back(bm25_tokenize(docs[i]));
        doc_len_.push_back(static_cast<double>(terms_.back().size()));
        total += doc_len_.back();
        std::unordered_map<std::string, int> tf;
        for (const auto& t : terms_.back()) ++tf[t];
        for (const auto& [t, n] : tf) postings_[t].emplace_back(i, n);
    }
    avgdl_ = docs.empty() ? 0.0 : total / static_cast<double>(docs.size());
    self_.resize(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) self_[i] = score(terms_[i], terms_[i]);
}

double Bm25Index::idf(const std::string& term) const {
    const double N = static_cast<double>(doc_len_.size());
    auto it = postings_.find(term);
    const double n = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
    return std::log(1.0 + (N - n + 0.5) / (n + 0.5));
}

double Bm25Index::term_weight(double idf, double tf, double dl) const {
    const double norm = avgdl_ > 0.0 ? dl / avgdl_ : 1.0;
    return idf * tf * (p_.k1 + 1.0) / (tf + p_.k1 * (1.0 - p_.b + p_.b * norm));
}

double Bm25Index::score(const std::vector<std::string>& query_terms, const std::vector<std::string>& doc_terms) const {
    if (query_terms.empty() || doc_terms.empty()) return 0.0;
    std::unordered_map<std::string, int> tf;
    for (const auto& t : doc_terms) ++tf[t];
    const double dl = static_cast<double>(doc_terms.size());
    double s = 0.0;
    for (const auto& q : query_terms) {
        auto it = tf.find(q);
        if (it != tf.end()) s += term_weight(idf(q), it->second, dl);
    }
    return s;
}

double Bm25Index::score(std::string_view query, std::string_view doc) const {
    return score(bm25_tokenize(query), bm25_tokenize(doc));
}

std::vector<std::pair<std::size_t, double>> Bm25Index::score_against_all(std::size_t i) const {
    std::unordered_map<std::size_t, double> acc;
    for (const auto& q : terms_[i]) {
        auto it = postings_.find(q);
        if (it == postings_.end()) continue;
        const double w = idf(q);
        for (const auto& [doc, tf] : it->second) acc[doc] += term_weight(w, tf, doc_len_[doc]);
    }
    std::vector<std::pair<std::size_t, double>> out(acc.begin(), acc.end());
    std::sort(out.begin(), out.end());
    return out;
}

double normalized_bm25_sim(std::string_view x, std::string_view y, const Bm25Index& index) {
    const auto xt = bm25_tokenize(x);
    const double self = index.score(xt, xt);
    if (self <= 0.0) return 0.0;
    return std::clamp(index.score(xt, bm25_tokenize(y)) / self, 0.0, 1.0);
}

}  // namespace chronoforge
