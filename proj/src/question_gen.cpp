#include "chronoforge/question_gen.hpp"

#include <algorithm>
#include <cctype>

#include "chronoforge/csv.hpp"

namespace chronoforge {

namespace {

constexpr std::string_view kQueryTail = "Generated questions for Query asking for information in a specific column:";

}  // namespace

void QGPromptConfig::validate() const {
    if (fewshot_examples.empty()) throw ConfigError("question generation needs at least one demonstration");
    if (sample_years.empty()) throw ConfigError("question generation needs at least one sample year");
    if (temperature < 0) throw ConfigError("question generation temperature must be >= 0");
}

QGPromptConfig default_qg_config() {
    QGPromptConfig cfg;
    cfg.instruction = std::string(embedded_asset("qg/instruction"));
    for (int n = 1; n <= 8; ++n) {
        cfg.fewshot_examples.emplace_back(embedded_asset("qg/example_" + std::to_string(n)));
    }
    return cfg;
}

std::string fixture_response(std::size_t n) {
    const std::string block(embedded_asset("qg/example_" + std::to_string(n)));
    const std::string head =
        "Generated questions for Example " + std::to_string(n) + " asking for information in a specific column:\n";
    auto pos = block.find(head);
    if (pos == std::string::npos) throw FormatError("demonstration " + std::to_string(n) + " has no response block");
    std::string resp = block.substr(pos + head.size());
    while (!resp.empty() && resp.back() == '\n') resp.pop_back();
    return resp;
}

std::string table_description(std::string_view page_title, const std::vector<std::string>& sections) {
    return std::string(page_title) + " " + join(sections, ", ") + ".";
}

std::optional<std::string> build_query_block(const TemporalTable& t, const QGPromptConfig& cfg) {
    auto spec = primary_temporal_spec(t.specs);
    if (!spec) return std::nullopt;
    auto intervals = row_intervals(t.table, *spec, true);

    std::string rows;
    for (std::size_t i = 0; i < t.table.rows.size(); ++i) {
        const auto& iv = intervals.rows[i];
        if (!iv) continue;
        bool hit = std::any_of(cfg.sample_years.begin(), cfg.sample_years.end(), [&](Year y) { return iv->covers(y); });
        if (hit) rows += csv::format_row(t.table.rows[i]) + "\n";
    }
    if (rows.empty()) return std::nullopt;

    std::string out = "Query:\nTable description: this table is about ";
    out += table_description(t.table.page_title, t.table.section_path);
    out += "\n";
    if (t.table.caption && !t.table.caption->empty()) out += "Table caption: " + *t.table.caption + "\n";
    out += "Table content:\n";
    out += csv::format_row(t.table.header) + "\n";
    out += rows;
    out += "\n";
    out += kQueryTail;
    return out;
}

std::optional<std::string> build_qg_prompt(const TemporalTable& t, const QGPromptConfig& cfg) {
    cfg.validate();
    auto query = build_query_block(t, cfg);
    if (!query) return std::nullopt;
    std::string out = cfg.instruction;
    for (const auto& ex : cfg.fewshot_examples) out += ex;
    out += *query;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// Matches "<label> <digits>: <rest>" and returns rest.
std::optional<std::string> labelled(std::string_view line, std::string_view label) {
    if (line.size() <= label.size() || line.substr(0, label.size()) != label) return std::nullopt;
    line.remove_prefix(label.size());
    if (line.empty() || line[0] != ' ') return std::nullopt;
    line.remove_prefix(1);
    std::size_t digits = 0;
    while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
    if (digits == 0 || digits >= line.size() || line[digits] != ':') return std::nullopt;
    return trim(line.substr(digits + 1));
}

}  // namespace

std::vector<ColumnQuestion> parse_qg_response(std::string_view text, const ExtractedTable& t, std::size_t* dropped) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        std::string line = trim(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
        if (!line.empty()) lines.push_back(std::move(line));
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }

    std::vector<ColumnQuestion> raw;
    bool rejection = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].find(kNoQuestions) != std::string::npos) rejection = true;
        auto column = labelled(lines[i], "Column");
        if (!column) continue;
        if (i + 1 < lines.size()) {
            if (auto question = labelled(lines[i + 1], "Question")) {
                raw.push_back({*column, *question});
                ++i;
            }
        }
    }
    if (raw.empty()) {
        if (rejection) return {};
        throw FormatError("response has neither column/question pairs nor the rejection sentence");
    }

    std::vector<ColumnQuestion> out;
    std::set<std::size_t> used;
    for (auto& cq : raw) {
        auto idx = t.column_index(cq.column_name);
        if (!idx || cq.question_text.empty() || !used.insert(*idx).second) {
            if (dropped) ++*dropped;
            continue;
        }
        cq.column_name = t.header[*idx];
        out.push_back(std::move(cq));
    }
    return out;
}

// ---------------------------------------------------------------------------

QGResult generate_questions(ModelClient& client, const std::vector<TemporalTable>& tables, const QGPromptConfig& cfg,
                            std::size_t workers) {
    cfg.validate();
    struct Slot {
        bool skipped = false;
        bool rejected = false;
        std::size_t dropped = 0;
        std::size_t retries = 0;
        std::vector<ColumnQuestion> pairs;
        std::optional<std::string> failure;
    };
    std::vector<Slot> slots(tables.size());

    parallel_for(tables.size(), workers, [&](std::size_t i) {
        Slot& slot = slots[i];
        auto prompt = build_qg_prompt(tables[i], cfg);
        if (!prompt) {
            slot.skipped = true;
            return;
        }
        for (int attempt = 0; attempt < 2; ++attempt) {
            CompletionRequest req;
            req.prompt = *prompt;
            req.temperature = cfg.temperature;
            req.max_tokens = cfg.max_tokens;
            req.attempt = attempt;
            try {
                auto res = client.complete(req);
                slot.dropped = 0;
                slot.pairs = parse_qg_response(res.texts.at(0), tables[i].table, &slot.dropped);
                if (slot.pairs.size() > cfg.max_questions) slot.pairs.resize(cfg.max_questions);
                slot.rejected = slot.pairs.empty() && slot.dropped == 0;
                slot.failure.reset();
                return;
            } catch (const FormatError& e) {
                slot.failure = std::string("format: ") + e.what();
                if (attempt == 0) ++slot.retries;
            } catch (const TransportError& e) {
                slot.failure = std::string("transport: ") + e.what();
                return;
            }
        }
    });

    QGResult result;
    result.report.tables = tables.size();
    for (std::size_t i = 0; i < tables.size(); ++i) {
        const Slot& slot = slots[i];
        const auto& t = tables[i].table;
        result.report.format_retries += slot.retries;
        if (slot.skipped) {
            ++result.report.skipped_no_rows;
            continue;
        }
        if (slot.failure) {
            result.failures.push_back({t.table_id, *slot.failure});
            continue;
        }
        if (slot.rejected) ++result.report.rejected;
        if (!slot.pairs.empty()) ++result.report.tables_with_pairs;
        result.report.dropped_pairs += slot.dropped;
        for (const auto& cq : slot.pairs) {
            result.pairs.push_back({t.table_id, t.page_title, cq.column_name, cq.question_text});
        }
    }
    result.report.pairs = result.pairs.size();
    return result;
}

nlohmann::ordered_json pair_to_json(const GeneratedPair& p) {
    nlohmann::ordered_json j;
    j["page_title"] = p.page_title;
    j["table_id"] = p.table_id;
    j["column"] = p.column;
    j["question"] = p.question;
    return j;
}

GeneratedPair pair_from_json(const nlohmann::json& j) {
    try {
        return {j.at("table_id").get<std::string>(), j.at("page_title").get<std::string>(),
                j.at("column").get<std::string>(), j.at("question").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad question pair: ") + e.what());
    }
}

}  // namespace chronoforge
