#include "chronoforge/curation.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "chronoforge/csv.hpp"

namespace chronoforge {

void CurationConfig::validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(dup_hi) || !unit(dup_q) || !unit(dup_a)) throw ConfigError("dedup thresholds must be in [0, 1]");
    if (!unit(bias_keep_rate)) throw ConfigError("bias_keep_rate must be in [0, 1]");
    if (max_avg_answers_per_year <= 0 || max_avg_answer_len <= 0) throw ConfigError("noise limits must be positive");
    if (epoch > horizon) throw ConfigError("epoch is after horizon");
    if (bm25.k1 < 0 || bm25.b < 0 || bm25.b > 1) throw ConfigError("bm25 parameters out of range");
}

// ---------------------------------------------------------------------------
// extraction

std::vector<TimedAnswer> merge_answers(std::vector<TimedAnswer> answers) {
    std::sort(answers.begin(), answers.end(), [](const TimedAnswer& a, const TimedAnswer& b) {
        if (a.text != b.text) return a.text < b.text;
        return a.start_year < b.start_year;
    });
    std::vector<TimedAnswer> out;
    for (auto& a : answers) {
        if (!out.empty() && out.back().text == a.text) {
            auto& last = out.back();
            if (!last.end_year) continue;  // open interval already covers it
            if (a.start_year <= *last.end_year + 1) {
                if (!a.end_year) {
                    last.end_year.reset();
                } else {
                    last.end_year = std::max(*last.end_year, *a.end_year);
                }
                continue;
            }
        }
        out.push_back(std::move(a));
    }
    std::sort(out.begin(), out.end(), [](const TimedAnswer& a, const TimedAnswer& b) {
        if (a.start_year != b.start_year) return a.start_year < b.start_year;
        return a.text < b.text;
    });
    return out;
}

std::vector<TimedAnswer> extract_answers(const ExtractedTable& t, const TemporalColumnSpec& spec, std::size_t column,
                                         bool succession, ExtractionStats* stats) {
    if (column >= t.header.size()) throw std::out_of_range("answer column out of range");
    ExtractionStats local;
    ExtractionStats& st = stats ? *stats : local;
    auto intervals = row_intervals(t, spec, succession);
    st.succession_extended = intervals.succession_extended;
    std::vector<TimedAnswer> answers;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& iv = intervals.rows[i];
        if (!iv) {
            ++st.rows_unparseable;
            continue;
        }
        std::string text = collapse_whitespace(t.rows[i][column]);
        if (text.empty()) {
            ++st.rows_empty;
            continue;
        }
        answers.push_back({std::move(text), iv->start_year, iv->end_year});
    }
    return merge_answers(std::move(answers));
}

// ---------------------------------------------------------------------------
// cleaning

namespace {

const std::unordered_set<std::string>& country_codes() {
    static const std::unordered_set<std::string> codes = [] {
        // ISO 3166-1 alpha-3, then IOC/FIFA codes that differ from it
        static const char* list =
            "AFG ALA ALB DZA ASM AND AGO AIA ATA ATG ARG ARM ABW AUS AUT AZE BHS BHR BGD BRB BLR BEL BLZ BEN BMU "
            "BTN BOL BES BIH BWA BVT BRA IOT BRN BGR BFA BDI CPV KHM CMR CAN CYM CAF TCD CHL CHN CXR CCK COL COM "
            "COG COD COK CRI CIV HRV CUB CUW CYP CZE DNK DJI DMA DOM ECU EGY SLV GNQ ERI EST SWZ ETH FLK FRO FJI "
            "FIN FRA GUF PYF ATF GAB GMB GEO DEU GHA GIB GRC GRL GRD GLP GUM GTM GGY GIN GNB GUY HTI HMD VAT HND "
            "HKG HUN ISL IND IDN IRN IRQ IRL IMN ISR ITA JAM JPN JEY JOR KAZ KEN KIR PRK KOR KWT KGZ LAO LVA LBN "
            "LSO LBR LBY LIE LTU LUX MAC MDG MWI MYS MDV MLI MLT MHL MTQ MRT MUS MYT MEX FSM MDA MCO MNG MNE MSR "
            "MAR MOZ MMR NAM NRU NPL NLD NCL NZL NIC NER NGA NIU NFK MKD MNP NOR OMN PAK PLW PSE PAN PNG PRY PER "
            "PHL PCN POL PRT PRI QAT REU ROU RUS RWA BLM SHN KNA LCA MAF SPM VCT WSM SMR STP SAU SEN SRB SYC SLE "
            "SGP SXM SVK SVN SLB SOM ZAF SGS SSD ESP LKA SDN SUR SJM SWE CHE SYR TWN TJK TZA THA TLS TGO TKL TON "
            "TTO TUN TUR TKM TCA TUV UGA UKR ARE GBR USA UMI URY UZB VUT VEN VNM VGB VIR WLF ESH YEM ZMB ZWE "
            "ALG ANG ANT ARU BAH BAN BER BHU BIZ BOT BRU BUL BUR CAM CAY CGO CHA CHI CRC CRO DEN ESA FIJ GAM GBS "
            "GEQ GER GRE GRN GUA GUI HAI HON INA IRI ISV KSA KUW LAT LIB LES MAD MAS MAW MGL MRI MYA NCA NED NEP "
            "NGR NIG OMA PAR PHI PLE POR PUR RSA SAM SEY SIN SKN SLO SOL SRI SUD SUI TAN TGA TPE TRI UAE URU VAN "
            "VIE VIN ZAM ZIM ENG SCO WAL NIR KOS FRG URS YUG TCH GDR";
        std::unordered_set<std::string> s;
        std::istringstream in(list);
        for (std::string code; in >> code;) s.insert(code);
        return s;
    }();
    return codes;
}

bool starts_capitalized(std::string_view s) {
    if (s.empty()) return false;
    unsigned char c0 = static_cast<unsigned char>(s[0]);
    if (c0 >= 'A' && c0 <= 'Z') return true;
    // UTF-8 Latin-1 capitals U+00C0..U+00DE (except U+00D7)
    if (c0 == 0xC3 && s.size() > 1) {
        unsigned char c1 = static_cast<unsigned char>(s[1]);
        return c1 >= 0x80 && c1 <= 0x9E && c1 != 0x97;
    }
    // Latin Extended-A capitals sit at even code points U+0100..U+017F
    if ((c0 == 0xC4 || c0 == 0xC5) && s.size() > 1) {
        unsigned char c1 = static_cast<unsigned char>(s[1]);
        return (c1 & 1) == 0;
    }
    return false;
}

std::string strip_markup(std::string_view in) {
    std::string s(in);
    auto remove_nested = [&](std::string_view open, std::string_view close) {
        for (;;) {
            auto start = s.find(open);
            if (start == std::string::npos) return;
            auto end = s.find(close, start + open.size());
            if (end == std::string::npos) {
                s.erase(start);
                return;
            }
            // innermost pair first, so nested templates unwind
            auto inner = s.rfind(open, end);
            if (inner != std::string::npos && inner > start) start = inner;
            s.erase(start, end + close.size() - start);
        }
    };
    remove_nested("{{", "}}");
    remove_nested("<!--", "-->");

    // [[target|label]] -> label, [[target]] -> target
    for (;;) {
        auto start = s.find("[[");
        if (start == std::string::npos) break;
        auto end = s.find("]]", start);
        if (end == std::string::npos) {
            s.erase(start, 2);
            continue;
        }
        std::string inner = s.substr(start + 2, end - start - 2);
        auto bar = inner.rfind('|');
        if (bar != std::string::npos) inner = inner.substr(bar + 1);
        s.replace(start, end + 2 - start, inner);
    }

    std::string out;
    bool in_tag = false;
    for (char c : s) {
        if (c == '<') in_tag = true;
        else if (c == '>' && in_tag) in_tag = false;
        else if (!in_tag) out += c;
    }

    static const std::pair<const char*, const char*> entities[] = {
        {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&nbsp;", " "}};
    for (const auto& [from, to] : entities) {
        for (std::size_t pos; (pos = out.find(from)) != std::string::npos;) out.replace(pos, std::strlen(from), to);
    }
    for (std::size_t pos; (pos = out.find("''")) != std::string::npos;) out.erase(pos, 2);

    // footnote markers such as [1], [a], [note 3]
    std::string cleaned;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] == '[') {
            auto end = out.find(']', i);
            if (end != std::string::npos && end - i <= 12) {
                i = end;
                continue;
            }
        }
        cleaned += out[i];
    }
    return cleaned;
}

bool is_sentinel(std::string_view text) {
    static const std::unordered_set<std::string> sentinels = {
        "n/a", "na", "n.a.", "tba", "tbd", "tbc", "unknown", "none", "vacant", "?", "-", "--",
        "\xE2\x80\x93", "\xE2\x80\x94", "to be announced", "to be determined", "to be confirmed", "not available"};
    std::string t = to_lower_ascii(trim(text));
    while (!t.empty() && t.back() == '.' && t != "n.a.") t.pop_back();
    return t.empty() || sentinels.count(t) > 0;
}

}  // namespace

bool is_country_code(std::string_view token) { return country_codes().count(std::string(token)) > 0; }

std::optional<std::string> clean_answer(std::string_view text) {
    if (is_sentinel(text)) return std::nullopt;
    std::string s = collapse_whitespace(strip_markup(text));
    while (!s.empty() && (s.back() == '*' || s.back() == '^')) s.pop_back();
    for (std::string_view dagger : {"\xE2\x80\xA0", "\xE2\x80\xA1"}) {
        while (s.size() >= dagger.size() && s.compare(s.size() - dagger.size(), dagger.size(), dagger) == 0) {
            s.erase(s.size() - dagger.size());
        }
    }
    s = trim(s);

    if (s.size() > 4 && s[3] == ' ' && is_country_code(std::string_view(s).substr(0, 3)) &&
        starts_capitalized(std::string_view(s).substr(4))) {
        s = trim(s.substr(4));
    }
    if (s.empty() || is_sentinel(s)) return std::nullopt;
    return s;
}

// ---------------------------------------------------------------------------
// noise

std::optional<std::string> noise_filter(const TemporalQuestion& q, const CurationConfig& cfg) {
    std::size_t covered = 0;
    std::size_t total = 0;
    for (Year y = cfg.epoch; y <= cfg.horizon; ++y) {
        auto n = answers_at(q, y, cfg.horizon).size();
        if (n == 0) continue;
        ++covered;
        total += n;
    }
    if (covered == 0) return "no_covered_years";
    if (static_cast<double>(total) / static_cast<double>(covered) > cfg.max_avg_answers_per_year) {
        return "avg_answers";
    }
    std::set<std::string> texts;
    for (const auto& a : q.answers) texts.insert(a.text);
    std::size_t tokens = 0;
    for (const auto& t : texts) tokens += split_whitespace(t).size();
    if (static_cast<double>(tokens) / static_cast<double>(texts.size()) > cfg.max_avg_answer_len) return "avg_len";
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// dedup

std::string answer_operand(const TemporalQuestion& q) {
    std::set<std::string> texts;
    for (const auto& a : q.answers) texts.insert(a.text);
    return join(std::vector<std::string>(texts.begin(), texts.end()), " ");
}

std::optional<std::string> duplicate_rule(const SimilarityScore& s, const CurationConfig& cfg) {
    if (s.question_sim > cfg.dup_hi) return "q_hi";
    if (s.answer_sim > cfg.dup_hi) return "a_hi";
    if (s.question_sim > cfg.dup_q && s.answer_sim > cfg.dup_a) return "joint";
    return std::nullopt;
}

namespace {

struct PairKey {
    std::size_t i, j;
    bool operator==(const PairKey&) const = default;
};
struct PairKeyHash {
    std::size_t operator()(const PairKey& k) const { return std::hash<std::size_t>()(k.i * 0x9E3779B97F4A7C15ULL ^ k.j); }
};

// Directed ratios BM25(x_i, x_j) / BM25(x_i, x_i) for all overlapping pairs,
// folded into min over both directions.
std::unordered_map<PairKey, double, PairKeyHash> mutual_similarities(const std::vector<std::string>& docs,
                                                                     const Bm25Params& params, std::size_t workers) {
    Bm25Index index(docs, params);
    std::vector<std::vector<std::pair<std::size_t, double>>> directed(docs.size());
    parallel_for(docs.size(), workers, [&](std::size_t i) {
        const double self = index.self_score(i);
        if (self <= 0.0) return;
        for (const auto& [j, s] : index.score_against_all(i)) {
            if (j != i) directed[i].emplace_back(j, std::clamp(s / self, 0.0, 1.0));
        }
    });
    std::unordered_map<PairKey, double, PairKeyHash> forward;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        for (const auto& [j, s] : directed[i]) {
            if (i < j) forward[{i, j}] = s;
        }
    }
    std::unordered_map<PairKey, double, PairKeyHash> out;
    for (std::size_t j = 0; j < docs.size(); ++j) {
        for (const auto& [i, s] : directed[j]) {
            if (i < j) {
                auto it = forward.find({i, j});
                if (it != forward.end()) out[{i, j}] = std::min(it->second, s);
            }
        }
    }
    return out;
}

std::vector<std::string> question_docs(const std::vector<TemporalQuestion>& qs) {
    std::vector<std::string> docs;
    docs.reserve(qs.size());
    for (const auto& q : qs) docs.push_back(q.text);
    return docs;
}

std::vector<std::string> answer_docs(const std::vector<TemporalQuestion>& qs) {
    std::vector<std::string> docs;
    docs.reserve(qs.size());
    for (const auto& q : qs) docs.push_back(answer_operand(q));
    return docs;
}

double directed_sim(const Bm25Index& index, const std::string& x, const std::string& y) {
    return normalized_bm25_sim(x, y, index);
}

}  // namespace

SimilarityScore pair_similarity(const std::vector<TemporalQuestion>& qs, std::size_t i, std::size_t j,
                                const CurationConfig& cfg) {
    const auto qd = question_docs(qs);
    const auto ad = answer_docs(qs);
    Bm25Index qi(qd, cfg.bm25);
    Bm25Index ai(ad, cfg.bm25);
    SimilarityScore s;
    s.question_sim = std::min(directed_sim(qi, qd[i], qd[j]), directed_sim(qi, qd[j], qd[i]));
    s.answer_sim = std::min(directed_sim(ai, ad[i], ad[j]), directed_sim(ai, ad[j], ad[i]));
    return s;
}

std::vector<DuplicatePair> find_duplicate_pairs(const std::vector<TemporalQuestion>& qs, const CurationConfig& cfg) {
    auto qsim = mutual_similarities(question_docs(qs), cfg.bm25, cfg.workers);
    auto asim = mutual_similarities(answer_docs(qs), cfg.bm25, cfg.workers);
    std::set<std::pair<std::size_t, std::size_t>> keys;
    for (const auto& [k, v] : qsim) keys.emplace(k.i, k.j);
    for (const auto& [k, v] : asim) keys.emplace(k.i, k.j);
    std::vector<DuplicatePair> out;
    for (const auto& [i, j] : keys) {
        SimilarityScore s;
        if (auto it = qsim.find({i, j}); it != qsim.end()) s.question_sim = it->second;
        if (auto it = asim.find({i, j}); it != asim.end()) s.answer_sim = it->second;
        if (auto rule = duplicate_rule(s, cfg)) out.push_back({i, j, s, *rule});
    }
    return out;
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

}  // namespace

DedupResult dedup(std::vector<TemporalQuestion> qs, const CurationConfig& cfg) {
    DedupResult result;
    for (std::size_t round = 1;; ++round) {
        auto pairs = find_duplicate_pairs(qs, cfg);
        if (pairs.empty()) break;
        result.rounds = round;

        std::vector<std::size_t> parent(qs.size());
        std::iota(parent.begin(), parent.end(), 0);
        for (const auto& p : pairs) {
            auto a = find_root(parent, p.i);
            auto b = find_root(parent, p.j);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }

        auto better = [&](std::size_t a, std::size_t b) {
            auto wa = split_whitespace(qs[a].text).size();
            auto wb = split_whitespace(qs[b].text).size();
            if (wa != wb) return wa < wb;
            return qs[a].id < qs[b].id;
        };
        std::unordered_map<std::size_t, std::size_t> survivor;  // root -> index
        for (std::size_t i = 0; i < qs.size(); ++i) {
            auto r = find_root(parent, i);
            auto it = survivor.find(r);
            if (it == survivor.end() || better(i, it->second)) survivor[r] = i;
        }

        // strongest incident edge per removed node, for the log
        std::unordered_map<std::size_t, const DuplicatePair*> edge;
        auto strength = [](const DuplicatePair& p) { return p.score.question_sim + p.score.answer_sim; };
        for (const auto& p : pairs) {
            for (std::size_t node : {p.i, p.j}) {
                auto it = edge.find(node);
                if (it == edge.end() || strength(p) > strength(*it->second)) edge[node] = &p;
            }
        }

        std::vector<TemporalQuestion> next;
        std::vector<DedupDecision> decisions;
        for (std::size_t i = 0; i < qs.size(); ++i) {
            std::size_t keep = survivor[find_root(parent, i)];
            if (keep == i) {
                next.push_back(qs[i]);
                continue;
            }
            const DuplicatePair& p = *edge.at(i);
            std::size_t partner = p.i == i ? p.j : p.i;
            decisions.push_back({qs[i].id, qs[keep].id, qs[partner].id, p.score, p.rule, round});
        }
        std::sort(decisions.begin(), decisions.end(),
                  [](const DedupDecision& a, const DedupDecision& b) { return a.removed_id < b.removed_id; });
        result.log.insert(result.log.end(), decisions.begin(), decisions.end());
        qs = std::move(next);
    }
    result.kept = std::move(qs);
    return result;
}

// ---------------------------------------------------------------------------
// bias

bool is_numeric_answer(std::string_view text) {
    std::string s;
    for (std::size_t i = 0; i < text.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (c == ',' || c == '%' || c == '$' || std::isspace(c)) continue;
        // UTF-8 currency signs: £ (C2 A3), ¥ (C2 A5), € (E2 82 AC)
        if (c == 0xC2 && i + 1 < text.size() && (text[i + 1] == '\xA3' || text[i + 1] == '\xA5')) {
            ++i;
            continue;
        }
        if (c == 0xE2 && i + 2 < text.size() && text[i + 1] == '\x82' && text[i + 2] == '\xAC') {
            i += 2;
            continue;
        }
        s += static_cast<char>(c);
    }
    if (s.empty()) return false;
    std::size_t i = 0;
    if (s[i] == '+' || s[i] == '-') ++i;
    std::size_t digits = 0;
    bool dot = false;
    for (; i < s.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(s[i]))) {
            ++digits;
        } else if (s[i] == '.' && !dot) {
            dot = true;
        } else {
            return false;
        }
    }
    return digits > 0;
}

BiasResult bias_reduction(std::vector<TemporalQuestion> qs, const CurationConfig& cfg) {
    std::unordered_map<std::string, std::size_t> occurrences;
    for (const auto& q : qs) {
        std::set<std::string> texts;
        for (const auto& a : q.answers) texts.insert(a.text);
        for (const auto& t : texts) ++occurrences[t];
    }
    BiasResult r;
    for (auto& q : qs) {
        bool numeric = false;
        bool frequent = false;
        for (const auto& a : q.answers) {
            numeric = numeric || is_numeric_answer(a.text);
            frequent = frequent || occurrences[a.text] > cfg.bias_occurrence_cap;
        }
        if (!numeric && !frequent) {
            r.kept.push_back(std::move(q));
            continue;
        }
        ++r.flagged;
        if (keyed_uniform(cfg.seed, "bias#" + q.id) < cfg.bias_keep_rate) {
            ++r.flagged_kept;
            r.kept.push_back(std::move(q));
        } else {
            ++r.reasons[numeric ? "numeric" : "frequent_answer"];
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// pipeline

namespace {

AttritionRow make_row(std::string stage, std::size_t in, std::size_t kept, std::map<std::string, std::size_t> reasons) {
    return {std::move(stage), in, kept, in - kept, std::move(reasons)};
}

}  // namespace

CurationResult curate(const std::vector<GeneratedPair>& pairs, const std::vector<TemporalTable>& tables,
                      const CurationConfig& cfg) {
    cfg.validate();
    CurationResult res;
    std::unordered_map<std::string, const TemporalTable*> by_id;
    for (const auto& t : tables) by_id[t.table.table_id] = &t;

    // extract
    std::vector<TemporalQuestion> qs;
    std::map<std::string, std::size_t> reasons;
    std::set<std::string> seen_ids;
    std::set<std::string> extended_tables;
    for (const auto& p : pairs) {
        auto it = by_id.find(p.table_id);
        if (it == by_id.end()) {
            ++reasons["unknown_table"];
            continue;
        }
        const auto& t = *it->second;
        auto col = t.table.column_index(p.column);
        if (!col) {
            ++reasons["unknown_column"];
            continue;
        }
        auto spec = primary_temporal_spec(t.specs, *col);
        if (!spec) {
            ++reasons["no_temporal_column"];
            continue;
        }
        TemporalQuestion q;
        q.id = t.table.table_id + "#c" + std::to_string(*col);
        if (!seen_ids.insert(q.id).second) {
            ++reasons["duplicate_column"];
            continue;
        }
        ExtractionStats st;
        q.answers = extract_answers(t.table, *spec, *col, cfg.succession, &st);
        if (st.succession_extended) extended_tables.insert(t.table.table_id);
        if (q.answers.empty()) {
            ++reasons["no_answers"];
            continue;
        }
        q.text = p.question;
        q.page_title = t.table.page_title;
        q.section = join(t.table.section_path, " / ");
        q.column = t.table.header[*col];
        qs.push_back(std::move(q));
    }
    {
        auto row = make_row("extract", pairs.size(), qs.size(), reasons);
        row.reasons["flag:succession_extended_tables"] = extended_tables.size();
        res.attrition.push_back(std::move(row));
    }

    // clean
    {
        std::vector<TemporalQuestion> next;
        std::map<std::string, std::size_t> r;
        std::size_t answers_rejected = 0;
        for (auto& q : qs) {
            std::vector<TimedAnswer> kept;
            for (auto& a : q.answers) {
                if (auto c = clean_answer(a.text)) {
                    kept.push_back({*c, a.start_year, a.end_year});
                } else {
                    ++answers_rejected;
                }
            }
            if (kept.empty()) {
                ++r["all_answers_rejected"];
                continue;
            }
            q.answers = merge_answers(std::move(kept));
            next.push_back(std::move(q));
        }
        auto row = make_row("clean", qs.size(), next.size(), r);
        row.reasons["flag:answers_rejected"] = answers_rejected;
        res.attrition.push_back(std::move(row));
        qs = std::move(next);
    }

    // noise
    {
        std::vector<TemporalQuestion> next;
        std::map<std::string, std::size_t> r;
        for (auto& q : qs) {
            if (auto why = noise_filter(q, cfg)) {
                ++r[*why];
            } else {
                next.push_back(std::move(q));
            }
        }
        res.attrition.push_back(make_row("noise_filter", qs.size(), next.size(), r));
        qs = std::move(next);
    }

    // sensitivity
    {
        std::vector<TemporalQuestion> next;
        std::map<std::string, std::size_t> r;
        for (auto& q : qs) {
            if (sensitivity(q, cfg.epoch, cfg.horizon, cfg.horizon) >= cfg.min_sensitivity) {
                next.push_back(std::move(q));
            } else {
                ++r["low_sensitivity"];
            }
        }
        res.attrition.push_back(make_row("sensitivity", qs.size(), next.size(), r));
        qs = std::move(next);
    }

    // dedup
    {
        const std::size_t in = qs.size();
        auto d = dedup(std::move(qs), cfg);
        std::map<std::string, std::size_t> r;
        for (const auto& dec : d.log) ++r["duplicate_" + dec.rule];
        res.attrition.push_back(make_row("dedup", in, d.kept.size(), r));
        res.dedup_log = std::move(d.log);
        qs = std::move(d.kept);
    }

    // bias
    {
        const std::size_t in = qs.size();
        auto b = bias_reduction(std::move(qs), cfg);
        auto row = make_row("bias_reduction", in, b.kept.size(), b.reasons);
        row.reasons["flag:flagged_kept"] = b.flagged_kept;
        res.attrition.push_back(std::move(row));
        qs = std::move(b.kept);
    }

    std::sort(qs.begin(), qs.end(), [](const TemporalQuestion& a, const TemporalQuestion& b) { return a.id < b.id; });
    res.questions = std::move(qs);
    return res;
}

std::string attrition_csv(const std::vector<AttritionRow>& rows) {
    std::string out = "stage,input_count,kept,dropped,reason_histogram_json\n";
    for (const auto& r : rows) {
        nlohmann::ordered_json hist = nlohmann::ordered_json::object();
        for (const auto& [k, v] : r.reasons) hist[k] = v;
        out += csv::format_row({r.stage, std::to_string(r.input_count), std::to_string(r.kept),
                                std::to_string(r.dropped), hist.dump()});
        out += "\n";
    }
    return out;
}

nlohmann::ordered_json dedup_decision_to_json(const DedupDecision& d) {
    nlohmann::ordered_json j;
    j["removed_id"] = d.removed_id;
    j["kept_id"] = d.kept_id;
    j["partner_id"] = d.partner_id;
    j["question_sim"] = d.score.question_sim;
    j["answer_sim"] = d.score.answer_sim;
    j["rule"] = d.rule;
    j["round"] = d.round;
    return j;
}

}  // namespace chronoforge
