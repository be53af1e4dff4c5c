#include "chronoforge/wiki_tables.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>

#include "chronoforge/csv.hpp"

namespace fs = std::filesystem;

namespace chronoforge {

std::optional<std::size_t> ExtractedTable::column_index(std::string_view name) const {
    const std::string wanted = to_lower_ascii(collapse_whitespace(name));
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (to_lower_ascii(collapse_whitespace(header[i])) == wanted) return i;
    }
    return std::nullopt;
}

const char* to_string(TemporalKind k) {
    switch (k) {
        case TemporalKind::point_year: return "point_year";
        case TemporalKind::range: return "range";
        case TemporalKind::start_end_pair: return "start_end_pair";
    }
    return "point_year";
}

TemporalKind temporal_kind_from_string(std::string_view s) {
    if (s == "point_year") return TemporalKind::point_year;
    if (s == "range") return TemporalKind::range;
    if (s == "start_end_pair") return TemporalKind::start_end_pair;
    throw ParseError("unknown temporal kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// interval grammar

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

int to_int(std::string_view s) {
    int v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    return v;
}

bool is_open_word(std::string_view s) {
    static const std::set<std::string, std::less<>> words = {"present", "incumbent", "current", "ongoing",
                                                             "now", "to date", "date"};
    return words.count(s) > 0;
}

int month_number(std::string_view s) {
    static const std::array<const char*, 12> names = {"january", "february", "march",     "april",
                                                      "may",     "june",     "july",      "august",
                                                      "september", "october", "november", "december"};
    for (std::size_t i = 0; i < names.size(); ++i) {
        std::string_view full = names[i];
        if (s == full || (s.size() >= 3 && full.substr(0, s.size()) == s)) return static_cast<int>(i) + 1;
    }
    if (s == "sept") return 9;
    return 0;
}

// Collapses the dash family (hyphen, en/em dash, minus, slash, " to ") to a
// single '-' with no surrounding spaces.
std::string normalize_dashes(std::string_view in) {
    std::string s;
    s.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(in[i]);
        if (c == 0xE2 && i + 2 < in.size()) {
            unsigned char c1 = static_cast<unsigned char>(in[i + 1]);
            unsigned char c2 = static_cast<unsigned char>(in[i + 2]);
            if ((c1 == 0x80 && (c2 >= 0x90 && c2 <= 0x95)) || (c1 == 0x88 && c2 == 0x92)) {
                s += '-';
                i += 2;
                continue;
            }
        }
        s += static_cast<char>(c == '/' ? '-' : c);
    }
    for (std::size_t pos; (pos = s.find(" to ")) != std::string::npos;) s.replace(pos, 4, "-");
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == ' ' && ((i + 1 < s.size() && s[i + 1] == '-') || (!out.empty() && out.back() == '-'))) continue;
        out += s[i];
    }
    return out;
}

std::string strip_footnotes(std::string_view in) {
    std::string out;
    int depth = 0;
    for (char c : in) {
        if (c == '[') {
            ++depth;
        } else if (c == ']' && depth > 0) {
            --depth;
        } else if (depth == 0) {
            out += c;
        }
    }
    return out;
}

[[noreturn]] void fail(std::string_view cell, const char* why) {
    throw ParseError("unparseable interval '" + std::string(cell) + "': " + why);
}

Year checked(std::string_view cell, Year y, const IntervalContext& ctx) {
    if (y < ctx.min_year || y > ctx.max_year) fail(cell, "year outside the accepted range");
    return y;
}

std::optional<Year> parse_month_date(const std::vector<std::string>& tokens) {
    auto day_ok = [](const std::string& t) { return all_digits(t) && t.size() <= 2 && to_int(t) >= 1 && to_int(t) <= 31; };
    auto year_ok = [](const std::string& t) { return all_digits(t) && t.size() == 4; };
    if (tokens.size() == 3 && day_ok(tokens[0]) && month_number(tokens[1]) && year_ok(tokens[2])) return to_int(tokens[2]);
    if (tokens.size() == 3 && month_number(tokens[0]) && day_ok(tokens[1]) && year_ok(tokens[2])) return to_int(tokens[2]);
    if (tokens.size() == 2 && month_number(tokens[0]) && year_ok(tokens[1])) return to_int(tokens[1]);
    return std::nullopt;
}

}  // namespace

RowInterval parse_interval(std::string_view cell, const IntervalContext& ctx) {
    const std::string cleaned = to_lower_ascii(trim(strip_footnotes(cell)));
    if (cleaned.empty()) fail(cell, "empty cell");

    if (is_open_word(cleaned)) {
        if (!ctx.paired_start) fail(cell, "open marker without a paired start year");
        return {*ctx.paired_start, std::nullopt};
    }

    const std::string s = normalize_dashes(cleaned);

    if (s.size() >= 4 && all_digits(std::string_view(s).substr(0, 4)) && (s.size() == 4 || !is_digit(s[4]))) {
        const Year start = checked(cell, to_int(std::string_view(s).substr(0, 4)), ctx);
        std::string_view rest = std::string_view(s).substr(4);
        if (rest.empty()) return {start, start};
        if (rest[0] == '.' && rest.size() > 1 && std::all_of(rest.begin() + 1, rest.end(), [](char c) { return c == '0'; })) {
            return {start, start};
        }
        if (rest[0] == '-') {
            rest.remove_prefix(1);
            if (rest.empty() || is_open_word(rest)) return {start, std::nullopt};
            if (rest.size() == 2 && all_digits(rest)) {
                Year end = (start / 100) * 100 + to_int(rest);
                if (end < start) end += 100;
                return {start, checked(cell, end, ctx)};
            }
            if (rest.size() == 4 && all_digits(rest)) {
                Year end = checked(cell, to_int(rest), ctx);
                if (end < start) fail(cell, "range ends before it starts");
                return {start, end};
            }
            if (rest.size() == 5 && all_digits(rest.substr(0, 2)) && rest[2] == '-' && all_digits(rest.substr(3))) {
                int month = to_int(rest.substr(0, 2));
                int day = to_int(rest.substr(3));
                if (month >= 1 && month <= 12 && day >= 1 && day <= 31) return {start, start};
            }
        }
        fail(cell, "unrecognised year form");
    }

    std::string spaced = s;
    std::replace(spaced.begin(), spaced.end(), ',', ' ');
    if (auto y = parse_month_date(split_whitespace(spaced))) {
        Year year = checked(cell, *y, ctx);
        return {year, year};
    }
    fail(cell, "no year found");
}

std::string format_interval(const RowInterval& interval) {
    std::string out = std::to_string(interval.start_year);
    if (!interval.end_year) return out + "–present";
    if (*interval.end_year == interval.start_year) return out;
    return out + "–" + std::to_string(*interval.end_year);
}

// ---------------------------------------------------------------------------
// ingestion

std::optional<ExtractedTable> table_from_csv(std::string_view csv_text, RaggedPolicy ragged, std::size_t* repaired,
                                             std::size_t* dropped) {
    auto rows = csv::parse(csv_text);
    if (rows.size() < 2) return std::nullopt;
    ExtractedTable t;
    t.header = std::move(rows.front());
    const std::size_t arity = t.header.size();
    for (std::size_t i = 1; i < rows.size(); ++i) {
        auto& row = rows[i];
        if (row.size() != arity) {
            bool repairable = ragged == RaggedPolicy::pad &&
                              (row.size() < arity || std::all_of(row.begin() + static_cast<std::ptrdiff_t>(arity), row.end(),
                                                                 [](const std::string& c) { return trim(c).empty(); }));
            if (!repairable) {
                if (dropped) ++*dropped;
                continue;
            }
            row.resize(arity);
            if (repaired) ++*repaired;
        }
        t.rows.push_back(std::move(row));
    }
    if (t.rows.empty()) return std::nullopt;
    return t;
}

namespace {

struct TableFile {
    fs::path path;
    std::string slug;
    std::string stem;
    nlohmann::json meta;
};

bool natural_less(const std::string& a, const std::string& b) {
    auto split = [](const std::string& s) {
        std::size_t p = s.find_last_not_of("0123456789");
        std::size_t digits_at = p == std::string::npos ? 0 : p + 1;
        return std::pair{s.substr(0, digits_at),
                         digits_at < s.size() ? std::stoll(s.substr(digits_at)) : -1LL};
    };
    auto [pa, na] = split(a);
    auto [pb, nb] = split(b);
    return pa != pb ? pa < pb : (na != nb ? na < nb : a < b);
}

std::optional<nlohmann::json> lookup_table_key(const nlohmann::json& meta, const char* field, const std::string& stem) {
    auto it = meta.find(field);
    if (it == meta.end() || !it->is_object()) return std::nullopt;
    if (auto e = it->find(stem); e != it->end()) return *e;
    std::size_t p = stem.find_last_not_of("0123456789");
    if (p != std::string::npos && p + 1 < stem.size()) {
        if (auto e = it->find(stem.substr(p + 1)); e != it->end()) return *e;
    }
    return std::nullopt;
}

}  // namespace

std::vector<ExtractedTable> parse_tables(const fs::path& root, const ParseTablesConfig& cfg, ParseTablesReport* report) {
    if (!fs::is_directory(root)) throw Error("table root is not a directory: " + root.string());
    ParseTablesReport local;
    ParseTablesReport& rep = report ? *report : local;

    std::vector<fs::path> pages;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) pages.push_back(entry.path());
    }
    std::sort(pages.begin(), pages.end());

    std::vector<TableFile> files;
    for (const auto& page : pages) {
        nlohmann::json meta = nlohmann::json::object();
        if (fs::exists(page / "meta.json")) {
            try {
                meta = nlohmann::json::parse(read_file(page / "meta.json"));
            } catch (const std::exception& e) {
                rep.warnings.push_back("bad meta.json in " + page.string() + ": " + e.what());
            }
        }
        std::vector<TableFile> page_files;
        for (const auto& entry : fs::directory_iterator(page)) {
            if (entry.is_regular_file() && entry.path().extension() == ".csv") {
                page_files.push_back({entry.path(), page.filename().string(), entry.path().stem().string(), meta});
            }
        }
        std::sort(page_files.begin(), page_files.end(),
                  [](const TableFile& a, const TableFile& b) { return natural_less(a.stem, b.stem); });
        files.insert(files.end(), page_files.begin(), page_files.end());
    }
    rep.files_seen += files.size();

    struct Slot {
        std::optional<ExtractedTable> table;
        std::size_t repaired = 0, dropped = 0;
        bool empty = false;
        std::optional<std::string> error;
    };
    std::vector<Slot> slots(files.size());
    parallel_for(files.size(), cfg.workers, [&](std::size_t i) {
        const auto& f = files[i];
        Slot& slot = slots[i];
        try {
            auto t = table_from_csv(read_file(f.path), cfg.ragged, &slot.repaired, &slot.dropped);
            if (!t) {
                slot.empty = true;
                return;
            }
            t->table_id = f.slug + "/" + f.stem;
            t->page_title = f.meta.value("page_title", "");
            if (t->page_title.empty()) {
                t->page_title = f.slug;
                std::replace(t->page_title.begin(), t->page_title.end(), '_', ' ');
            }
            if (auto sections = lookup_table_key(f.meta, "sections", f.stem); sections && sections->is_array()) {
                for (const auto& s : *sections) t->section_path.push_back(s.get<std::string>());
            }
            if (auto caption = lookup_table_key(f.meta, "captions", f.stem); caption && caption->is_string()) {
                t->caption = caption->get<std::string>();
            }
            slot.table = std::move(t);
        } catch (const std::exception& e) {
            slot.error = f.path.string() + ": " + e.what();
        }
    });

    std::vector<ExtractedTable> out;
    for (auto& slot : slots) {
        rep.rows_repaired += slot.repaired;
        rep.rows_dropped += slot.dropped;
        if (slot.error) {
            ++rep.skipped_unreadable;
            rep.warnings.push_back("skipped unreadable table " + *slot.error);
        } else if (slot.empty) {
            ++rep.skipped_empty;
        } else if (slot.table) {
            out.push_back(std::move(*slot.table));
        }
    }
    rep.tables_emitted += out.size();
    return out;
}

// ---------------------------------------------------------------------------
// detection

namespace {

std::vector<std::string> header_words(std::string_view header) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : to_lower_ascii(header)) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur += c;
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

// Header without any parenthetical part, e.g. "Year(s)" -> "year".
std::string header_core(std::string_view header) {
    std::string out;
    int depth = 0;
    for (char c : header) {
        if (c == '(') ++depth;
        else if (c == ')' && depth > 0) --depth;
        else if (depth == 0) out += c;
    }
    return to_lower_ascii(collapse_whitespace(out));
}

enum class Marker { none, start, end };

struct MarkedHeader {
    Marker marker = Marker::none;
    std::vector<std::string> remainder;
};

MarkedHeader mark(std::string_view header) {
    static const std::set<std::string> start_words = {"began", "begin", "start", "started", "from", "took", "assumed", "entered"};
    static const std::set<std::string> end_words = {"ended", "end", "until", "to", "left", "exited"};
    auto words = header_words(header);
    if (words.empty()) return {};
    auto try_marker = [&](const std::set<std::string>& set, Marker m) -> std::optional<MarkedHeader> {
        if (set.count(words.front())) return MarkedHeader{m, {words.begin() + 1, words.end()}};
        if (words.size() > 1 && set.count(words.back())) return MarkedHeader{m, {words.begin(), words.end() - 1}};
        return std::nullopt;
    };
    if (auto m = try_marker(start_words, Marker::start)) return *m;
    if (auto m = try_marker(end_words, Marker::end)) return *m;
    return {};
}

struct ColumnStats {
    std::size_t non_empty = 0;
    std::size_t parsed = 0;
    bool any_range = false;
};

ColumnStats column_stats(const ExtractedTable& t, std::size_t col, const IntervalContext& grammar) {
    ColumnStats st;
    for (const auto& row : t.rows) {
        const std::string cell = trim(row[col]);
        if (cell.empty()) continue;
        ++st.non_empty;
        try {
            RowInterval iv = parse_interval(cell, grammar);
            ++st.parsed;
            if (!iv.end_year || *iv.end_year != iv.start_year) st.any_range = true;
        } catch (const ParseError&) {
        }
    }
    return st;
}

bool keyword_header(std::string_view header, const DetectConfig& cfg) {
    const std::string core = header_core(header);
    for (const auto& kw : cfg.header_keywords) {
        if (core == kw) return true;
    }
    return false;
}

}  // namespace

std::vector<TemporalColumnSpec> detect_temporal_columns(const ExtractedTable& t, const DetectConfig& cfg) {
    std::vector<TemporalColumnSpec> specs;
    const std::size_t n = t.header.size();
    if (t.rows.empty()) return specs;

    std::vector<ColumnStats> stats(n);
    for (std::size_t c = 0; c < n; ++c) stats[c] = column_stats(t, c, cfg.grammar);

    auto qualifies = [&](std::size_t c) {
        const auto& st = stats[c];
        if (st.non_empty == 0) return false;
        double ratio = static_cast<double>(st.parsed) / static_cast<double>(st.non_empty);
        if (ratio >= cfg.cell_parse_threshold) return true;
        return keyword_header(t.header[c], cfg) && st.parsed > 0;
    };

    std::vector<bool> used(n, false);
    std::vector<MarkedHeader> marks(n);
    for (std::size_t c = 0; c < n; ++c) marks[c] = mark(t.header[c]);
    for (std::size_t s = 0; s < n; ++s) {
        if (marks[s].marker != Marker::start || !qualifies(s)) continue;
        for (std::size_t e = s + 1; e < n; ++e) {
            if (used[e] || marks[e].marker != Marker::end || marks[e].remainder != marks[s].remainder) continue;
            specs.push_back({s, TemporalKind::start_end_pair, e});
            used[s] = used[e] = true;
            break;
        }
    }
    for (std::size_t c = 0; c < n; ++c) {
        if (used[c] || !qualifies(c)) continue;
        specs.push_back({c, stats[c].any_range ? TemporalKind::range : TemporalKind::point_year, std::nullopt});
    }
    std::sort(specs.begin(), specs.end(),
              [](const TemporalColumnSpec& a, const TemporalColumnSpec& b) { return a.column_index < b.column_index; });
    return specs;
}

std::optional<TemporalColumnSpec> primary_temporal_spec(const std::vector<TemporalColumnSpec>& specs,
                                                        std::optional<std::size_t> answer_column) {
    auto rank = [](TemporalKind k) {
        switch (k) {
            case TemporalKind::start_end_pair: return 0;
            case TemporalKind::range: return 1;
            case TemporalKind::point_year: return 2;
        }
        return 3;
    };
    auto involves = [&](const TemporalColumnSpec& s) {
        return answer_column && (s.column_index == *answer_column || s.paired_end_index == answer_column);
    };
    const TemporalColumnSpec* best = nullptr;
    for (bool allow_answer_column : {false, true}) {
        for (const auto& s : specs) {
            if (!allow_answer_column && involves(s)) continue;
            if (!best || rank(s.kind) < rank(best->kind)) best = &s;
        }
        if (best) return *best;
    }
    return std::nullopt;
}

RowIntervals row_intervals(const ExtractedTable& t, const TemporalColumnSpec& spec, bool succession,
                           const IntervalContext& grammar) {
    RowIntervals out;
    out.rows.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        try {
            RowInterval iv = parse_interval(row.at(spec.column_index), grammar);
            if (spec.kind == TemporalKind::start_end_pair && spec.paired_end_index) {
                const std::string end_cell = trim(row.at(*spec.paired_end_index));
                if (end_cell.empty()) {
                    iv.end_year.reset();
                } else {
                    IntervalContext ctx = grammar;
                    ctx.paired_start = iv.start_year;
                    RowInterval end = parse_interval(end_cell, ctx);
                    iv.end_year = end.end_year;
                    if (iv.end_year && *iv.end_year < iv.start_year) throw ParseError("end before start");
                }
            }
            out.rows.emplace_back(iv);
        } catch (const ParseError&) {
            out.rows.emplace_back(std::nullopt);
        }
    }

    if (succession && spec.kind == TemporalKind::point_year) {
        std::vector<std::size_t> dated;
        for (std::size_t i = 0; i < out.rows.size(); ++i) {
            if (out.rows[i]) dated.push_back(i);
        }
        bool increasing = dated.size() >= 2;
        for (std::size_t k = 1; k < dated.size() && increasing; ++k) {
            increasing = out.rows[dated[k]]->start_year > out.rows[dated[k - 1]]->start_year;
        }
        if (increasing) {
            for (std::size_t k = 0; k < dated.size(); ++k) {
                auto& iv = *out.rows[dated[k]];
                if (k + 1 < dated.size()) {
                    iv.end_year = out.rows[dated[k + 1]]->start_year - 1;
                } else {
                    iv.end_year.reset();
                }
            }
            out.succession_extended = true;
        }
    }
    return out;
}

bool covers_range(const ExtractedTable& t, const TemporalColumnSpec& spec, Year from, Year to) {
    auto intervals = row_intervals(t, spec, false);
    for (Year y = from; y <= to; ++y) {
        bool covered = std::any_of(intervals.rows.begin(), intervals.rows.end(),
                                   [&](const std::optional<RowInterval>& iv) { return iv && iv->covers(y); });
        if (!covered) return false;
    }
    return true;
}

std::vector<TemporalTable> filter_contemporary(std::vector<TemporalTable> tables, Year from, Year to) {
    std::vector<TemporalTable> kept;
    for (auto& t : tables) {
        auto spec = primary_temporal_spec(t.specs);
        if (spec && covers_range(t.table, *spec, from, to)) kept.push_back(std::move(t));
    }
    return kept;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json table_to_json(const TemporalTable& t) {
    nlohmann::ordered_json j;
    j["table_id"] = t.table.table_id;
    j["page_title"] = t.table.page_title;
    j["section_path"] = t.table.section_path;
    j["caption"] = t.table.caption ? nlohmann::ordered_json(*t.table.caption) : nullptr;
    j["header"] = t.table.header;
    j["rows"] = t.table.rows;
    auto specs = nlohmann::ordered_json::array();
    for (const auto& s : t.specs) {
        nlohmann::ordered_json sj;
        sj["column_index"] = s.column_index;
        sj["kind"] = to_string(s.kind);
        sj["paired_end_index"] = s.paired_end_index ? nlohmann::ordered_json(*s.paired_end_index) : nullptr;
        specs.push_back(std::move(sj));
    }
    j["temporal_columns"] = std::move(specs);
    return j;
}

TemporalTable table_from_json(const nlohmann::json& j) {
    TemporalTable t;
    try {
        t.table.table_id = j.at("table_id").get<std::string>();
        t.table.page_title = j.at("page_title").get<std::string>();
        t.table.section_path = j.at("section_path").get<std::vector<std::string>>();
        if (j.contains("caption") && !j["caption"].is_null()) t.table.caption = j["caption"].get<std::string>();
        t.table.header = j.at("header").get<std::vector<std::string>>();
        t.table.rows = j.at("rows").get<std::vector<std::vector<std::string>>>();
        for (const auto& sj : j.value("temporal_columns", nlohmann::json::array())) {
            TemporalColumnSpec s;
            s.column_index = sj.at("column_index").get<std::size_t>();
            s.kind = temporal_kind_from_string(sj.at("kind").get<std::string>());
            if (sj.contains("paired_end_index") && !sj["paired_end_index"].is_null()) {
                s.paired_end_index = sj["paired_end_index"].get<std::size_t>();
            }
            if (s.column_index >= t.table.header.size() ||
                (s.paired_end_index && *s.paired_end_index >= t.table.header.size())) {
                throw ParseError("temporal column index out of range in " + t.table.table_id);
            }
            t.specs.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad table record: ") + e.what());
    }
    for (const auto& row : t.table.rows) {
        if (row.size() != t.table.header.size()) throw ParseError("ragged row in " + t.table.table_id);
    }
    return t;
}

}  // namespace chronoforge
