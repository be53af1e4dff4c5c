#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace chronoforge {

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

/// Lowercased alphanumeric runs with English stopwords removed. Bytes >= 0x80
/// count as word characters so accented names stay whole.
std::vector<std::string> bm25_tokenize(std::string_view text);

/// In-memory inverted index with Lucene-style BM25 scoring.
class Bm25Index {
public:
    explicit Bm25Index(const std::vector<std::string>& docs, Bm25Params params = {});

    std::size_t size() const { return doc_len_.size(); }
    double idf(const std::string& term) const;

    /// BM25 of `query` against the text `doc` using this index's statistics.
    double score(std::string_view query, std::string_view doc) const;
    double score(const std::vector<std::string>& query_terms, const std::vector<std::string>& doc_terms) const;

    /// Scores of indexed doc `i`, used as a query, against every indexed doc
    /// sharing a term with it (including itself).
    std::vector<std::pair<std::size_t, double>> score_against_all(std::size_t i) const;
    double self_score(std::size_t i) const { return self_[i]; }

private:
    double term_weight(double idf, double tf, double dl) const;

    Bm25Params p_;
    std::vector<std::vector<std::string>> terms_;
    std::vector<double> doc_len_;
    double avgdl_ = 0.0;
    std::unordered_map<std::string, std::vector<std::pair<std::size_t, int>>> postings_;
    std::vector<double> self_;
};

/// BM25(x, y) / BM25(x, x), clamped to [0, 1]; 0 when x has no terms.
double normalized_bm25_sim(std::string_view x, std::string_view y, const Bm25Index& index);

}  // namespace chronoforge
