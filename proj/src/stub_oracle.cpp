#include "chronoforge/stub_oracle.hpp"

#include <algorithm>
#include <set>

#include "chronoforge/csv.hpp"
#include "chronoforge/prompting.hpp"
#include "chronoforge/question_gen.hpp"
#include "chronoforge/wiki_tables.hpp"

namespace chronoforge {

std::string stub_answer(const TemporalQuestion& q, Year Y, Year horizon) {
    Year earliest = Y;
    for (const auto& a : q.answers) earliest = std::min(earliest, a.start_year);
    for (Year y = Y; y >= earliest; --y) {
        if (auto a = canonical_answer_at(q, y, horizon)) return *a;
    }
    return std::string(kUnknownEntity);
}

StubOracle::StubOracle(std::shared_ptr<const Dataset> dataset, StubOracleConfig cfg)
    : ds_(std::move(dataset)), cfg_(cfg) {
    if (cfg_.noise_rate < 0.0 || cfg_.noise_rate > 1.0) throw ConfigError("stub noise_rate must be in [0, 1]");
    if (ds_) {
        std::vector<const TemporalQuestion*> sorted;
        for (const auto& q : ds_->questions) sorted.push_back(&q);
        std::sort(sorted.begin(), sorted.end(),
                  [](const TemporalQuestion* a, const TemporalQuestion* b) { return a->id < b->id; });
        for (const auto* q : sorted) by_text_.emplace(q->text, q);
    }
}

namespace {

constexpr std::string_view kQGTail = "Generated questions for Query asking for information in a specific column:";
constexpr std::string_view kAsOfHead = "As of year ";
constexpr std::string_view kAsOfTail = ", the answer is:";

std::string description_line(std::string_view block) {
    constexpr std::string_view head = "Table description: ";
    auto pos = block.find(head);
    if (pos == std::string_view::npos) return {};
    auto end = block.find('\n', pos);
    return std::string(block.substr(pos, end - pos));
}

}  // namespace

std::string StubOracle::answer_qa(std::string_view prompt, std::size_t sample, bool sampled, bool* known) const {
    *known = false;
    auto pos = prompt.rfind(kQuestionPrefix);
    if (pos == std::string_view::npos) return std::string(kUnknownEntity);
    std::string_view rest = prompt.substr(pos + kQuestionPrefix.size());
    auto nl = rest.find('\n');
    if (nl == std::string_view::npos) return std::string(kUnknownEntity);
    const std::string question(rest.substr(0, nl));
    const std::string lead = trim(rest.substr(nl + 1));

    auto it = by_text_.find(question);
    if (it == by_text_.end()) return std::string(kUnknownEntity);
    const TemporalQuestion& q = *it->second;
    const Year horizon = ds_->horizon;

    enum class Form { plain, as_of, adaptive } form;
    Year asked = cfg_.knowledge_year;
    if (lead.empty()) {
        form = Form::adaptive;
    } else if (lead == kPlainLeadIn) {
        form = Form::plain;
    } else if (lead.rfind(kAsOfHead, 0) == 0 && lead.size() > kAsOfHead.size() + kAsOfTail.size() &&
               lead.compare(lead.size() - kAsOfTail.size(), kAsOfTail.size(), kAsOfTail) == 0) {
        form = Form::as_of;
        try {
            asked = std::stoi(lead.substr(kAsOfHead.size(), lead.size() - kAsOfHead.size() - kAsOfTail.size()));
        } catch (const std::exception&) {
            return std::string(kUnknownEntity);
        }
    } else {
        return std::string(kUnknownEntity);
    }
    const Year effective = std::min(asked, cfg_.knowledge_year);

    const std::string noise_key =
        q.id + "#" + std::to_string(effective) + "#" + std::to_string(sampled ? sample : std::size_t{0});
    if (cfg_.noise_rate > 0.0 && keyed_uniform(cfg_.seed, noise_key) < cfg_.noise_rate) {
        return std::string(kUnknownEntity);
    }

    std::string answer = stub_answer(q, effective, horizon);
    if (answer == kUnknownEntity) return answer;
    *known = true;
    if (form == Form::adaptive) {
        Year latest = effective;
        while (!canonical_answer_at(q, latest, horizon)) --latest;
        return adaptive_completion(latest, answer);
    }
    return answer;
}

std::string StubOracle::answer_qg(std::string_view prompt) const {
    auto qpos = prompt.rfind("Query:\n");
    if (qpos == std::string_view::npos) return std::string(kNoQuestions);
    std::string_view query = prompt.substr(qpos);

    const std::string desc = description_line(query);
    for (std::size_t n = 1; n <= 8; ++n) {
        if (description_line(embedded_asset("qg/example_" + std::to_string(n))) == desc) return fixture_response(n);
    }

    constexpr std::string_view about_head = "Table description: this table is about ";
    std::string about = desc.size() > about_head.size() ? desc.substr(about_head.size()) : desc;
    if (!about.empty() && about.back() == '.') about.pop_back();
    about = collapse_whitespace(about);

    constexpr std::string_view content_head = "Table content:\n";
    auto cpos = query.find(content_head);
    auto tail = query.rfind(kQGTail);
    if (cpos == std::string_view::npos || tail == std::string_view::npos || tail < cpos) {
        return std::string(kNoQuestions);
    }
    auto table = table_from_csv(query.substr(cpos + content_head.size(), tail - cpos - content_head.size()),
                                RaggedPolicy::pad);
    if (!table) return std::string(kNoQuestions);
    auto specs = detect_temporal_columns(*table);
    std::set<std::size_t> temporal;
    for (const auto& s : specs) {
        temporal.insert(s.column_index);
        if (s.paired_end_index) temporal.insert(*s.paired_end_index);
    }

    std::string out;
    std::size_t k = 0;
    for (std::size_t c = 0; c < table->header.size() && k < 10; ++c) {
        if (temporal.count(c)) continue;
        if (!out.empty()) out += "\n";
        out += "Column " + std::to_string(k) + ": " + table->header[c] + "\n";
        out += "Question " + std::to_string(k) + ": What is the current " + to_lower_ascii(table->header[c]) +
               " listed for " + about + "?\n";
        ++k;
    }
    return k == 0 ? std::string(kNoQuestions) : out;
}

CompletionResult StubOracle::complete(const CompletionRequest& req) {
    req.validate();
    ++calls_;
    CompletionResult res;
    std::string_view trimmed = req.prompt;
    while (!trimmed.empty() && (trimmed.back() == '\n' || trimmed.back() == ' ')) trimmed.remove_suffix(1);
    const bool qg = trimmed.ends_with(kQGTail);
    const bool sampled = req.temperature > 0.0;
    for (int s = 0; s < req.n_samples; ++s) {
        std::string text;
        bool known = false;
        if (qg) {
            text = answer_qg(req.prompt);
            known = true;
        } else {
            text = answer_qa(req.prompt, static_cast<std::size_t>(s), sampled, &known);
            // a real model keeps going past the answer; stop sequences trim it
            text = apply_stop(" " + text + "\n\n" + std::string(kQuestionPrefix), req.stop);
        }
        res.texts.push_back(std::move(text));
        const double u = keyed_uniform(cfg_.seed, req.prompt + "#" + std::to_string(s));
        res.mean_logprob.push_back(known ? -0.05 - 0.3 * u : -1.5 - u);
    }
    return res;
}

}  // namespace chronoforge
