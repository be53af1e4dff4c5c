#include "chronoforge/temporal_kb.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace chronoforge {

const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    throw ParseError("unknown split '" + std::string(s) + "'");
}

const TemporalQuestion* Dataset::find(std::string_view id) const {
    for (const auto& q : questions) {
        if (q.id == id) return &q;
    }
    return nullptr;
}

std::vector<const TemporalQuestion*> Dataset::split(Split s) const {
    std::vector<const TemporalQuestion*> out;
    for (const auto& q : questions) {
        auto it = split_assignment.find(q.id);
        if (it != split_assignment.end() && it->second == s) out.push_back(&q);
    }
    return out;
}

AnswerSet answers_at(const TemporalQuestion& q, Year t, Year horizon) {
    AnswerSet out;
    for (const auto& a : q.answers) {
        if (a.valid_at(t, horizon)) out.insert(a.text);
    }
    return out;
}

std::size_t sensitivity(const TemporalQuestion& q, Year from, Year to, Year horizon) {
    if (from > to) {
        throw std::invalid_argument("sensitivity: reversed range " + std::to_string(from) + ".." +
                                    std::to_string(to));
    }
    std::set<AnswerSet> distinct;
    for (Year t = from; t <= to; ++t) distinct.insert(answers_at(q, t, horizon));
    return distinct.size();
}

bool answerable_throughout(const TemporalQuestion& q, Year from, Year to, Year horizon) {
    for (Year t = from; t <= to; ++t) {
        bool any = std::any_of(q.answers.begin(), q.answers.end(),
                               [&](const TimedAnswer& a) { return a.valid_at(t, horizon); });
        if (!any) return false;
    }
    return true;
}

std::optional<std::string> canonical_answer_at(const TemporalQuestion& q, Year t, Year horizon) {
    auto set = answers_at(q, t, horizon);
    if (set.empty()) return std::nullopt;
    return *set.begin();
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json question_to_json(const TemporalQuestion& q, std::optional<Split> split) {
    nlohmann::ordered_json j;
    j["id"] = q.id;
    j["question"] = q.text;
    auto answers = nlohmann::ordered_json::array();
    for (const auto& a : q.answers) {
        nlohmann::ordered_json aj;
        aj["text"] = a.text;
        aj["start_year"] = a.start_year;
        aj["end_year"] = a.end_year ? nlohmann::ordered_json(*a.end_year) : nullptr;
        answers.push_back(std::move(aj));
    }
    j["answers"] = std::move(answers);
    j["page_title"] = q.page_title;
    j["section"] = q.section;
    j["column"] = q.column;
    j["popularity"] = q.popularity ? nlohmann::ordered_json(*q.popularity) : nullptr;
    j["split"] = split ? nlohmann::ordered_json(to_string(*split)) : nullptr;
    return j;
}

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(std::string("missing field \"") + key + "\"");
    return *it;
}

}  // namespace

TemporalQuestion question_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("record is not a JSON object");
    TemporalQuestion q;
    try {
        q.id = require(j, "id").get<std::string>();
        q.text = require(j, "question").get<std::string>();
        const auto& answers = require(j, "answers");
        if (!answers.is_array()) throw ParseError("\"answers\" is not an array");
        for (const auto& aj : answers) {
            TimedAnswer a;
            a.text = require(aj, "text").get<std::string>();
            a.start_year = require(aj, "start_year").get<Year>();
            auto end = aj.find("end_year");
            if (end != aj.end() && !end->is_null()) a.end_year = end->get<Year>();
            q.answers.push_back(std::move(a));
        }
        q.page_title = j.value("page_title", "");
        q.section = j.value("section", "");
        q.column = j.value("column", "");
        auto pop = j.find("popularity");
        if (pop != j.end() && !pop->is_null()) q.popularity = pop->get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad field type: ") + e.what());
    }
    return q;
}

void validate_question(const TemporalQuestion& q) {
    if (q.id.empty()) throw ValidationError("question with empty id");
    if (q.answers.empty()) throw ValidationError("question " + q.id + " has no answers");
    for (const auto& a : q.answers) {
        if (trim(a.text).empty()) throw ValidationError("question " + q.id + " has an empty answer");
        if (a.end_year && *a.end_year < a.start_year) {
            throw ValidationError("question " + q.id + ": answer '" + a.text + "' ends (" +
                                  std::to_string(*a.end_year) + ") before it starts (" +
                                  std::to_string(a.start_year) + ")");
        }
    }
    if (q.popularity && *q.popularity < 0) throw ValidationError("question " + q.id + " has negative popularity");
}

void validate_dataset(const Dataset& ds) {
    std::unordered_set<std::string> ids;
    for (const auto& q : ds.questions) {
        validate_question(q);
        if (!ids.insert(q.id).second) throw ValidationError("duplicate id " + q.id);
    }
    if (ds.split_assignment.empty()) return;
    for (const auto& [id, split] : ds.split_assignment) {
        if (!ids.count(id)) throw ValidationError("split assignment names unknown id " + id);
    }
    std::unordered_map<std::string, Split> page_split;
    for (const auto& q : ds.questions) {
        auto it = ds.split_assignment.find(q.id);
        if (it == ds.split_assignment.end()) throw ValidationError("question " + q.id + " has no split");
        auto [pit, inserted] = page_split.emplace(q.page_title, it->second);
        if (!inserted && pit->second != it->second) {
            throw ValidationError("page '" + q.page_title + "' appears in more than one split");
        }
    }
}

std::string dataset_to_jsonl(const Dataset& ds) {
    std::string out;
    for (const auto& q : ds.questions) {
        std::optional<Split> split;
        if (auto it = ds.split_assignment.find(q.id); it != ds.split_assignment.end()) split = it->second;
        out += question_to_json(q, split).dump();
        out += '\n';
    }
    return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) { write_file(path, dataset_to_jsonl(ds)); }

Dataset load_dataset(const std::filesystem::path& path, Year horizon, Year epoch) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset " + path.string());
    Dataset ds;
    ds.horizon = horizon;
    ds.epoch = epoch;
    std::string line;
    std::size_t lineno = 0;
    std::size_t with_split = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
        }
        TemporalQuestion q;
        try {
            q = question_from_json(j);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), lineno);
        }
        auto split = j.find("split");
        if (split != j.end() && !split->is_null()) {
            try {
                ds.split_assignment[q.id] = split_from_string(split->get<std::string>());
            } catch (const ParseError& e) {
                throw ParseError(e.what(), lineno);
            }
            ++with_split;
        }
        ds.questions.push_back(std::move(q));
    }
    if (with_split != 0 && with_split != ds.questions.size()) {
        throw ValidationError("dataset mixes split and unsplit records");
    }
    validate_dataset(ds);
    return ds;
}

// ---------------------------------------------------------------------------
// split_dataset

namespace {

struct PageGroup {
    std::string page;
    std::vector<std::size_t> members;
};

// Picks pages (in the given order) whose sizes sum to exactly `target`.
// Greedy first; falls back to an exact subset-sum when greedy overshoots.
std::optional<std::vector<std::size_t>> pick_pages(const std::vector<const PageGroup*>& pages,
                                                   std::size_t target) {
    std::vector<std::size_t> chosen;
    std::size_t total = 0;
    for (std::size_t i = 0; i < pages.size() && total < target; ++i) {
        std::size_t n = pages[i]->members.size();
        if (total + n <= target) {
            chosen.push_back(i);
            total += n;
        }
    }
    if (total == target) return chosen;

    // reach[i][s]: sum s achievable using a subset of the first i pages
    const std::size_t m = pages.size();
    std::vector<std::vector<bool>> reach(m + 1, std::vector<bool>(target + 1, false));
    reach[0][0] = true;
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t n = pages[i]->members.size();
        for (std::size_t s = 0; s <= target; ++s) {
            if (!reach[i][s]) continue;
            reach[i + 1][s] = true;
            if (s + n <= target) reach[i + 1][s + n] = true;
        }
    }
    if (!reach[m][target]) return std::nullopt;
    chosen.clear();
    std::size_t s = target;
    for (std::size_t i = m; i > 0; --i) {
        if (reach[i - 1][s]) continue;
        chosen.push_back(i - 1);
        s -= pages[i - 1]->members.size();
    }
    std::reverse(chosen.begin(), chosen.end());
    return chosen;
}

}  // namespace

Dataset split_dataset(std::vector<TemporalQuestion> questions, const SplitConfig& cfg, Year horizon,
                      Year epoch) {
    std::map<std::string, PageGroup> by_page;
    for (std::size_t i = 0; i < questions.size(); ++i) {
        auto& g = by_page[questions[i].page_title];
        g.page = questions[i].page_title;
        g.members.push_back(i);
    }

    std::vector<const PageGroup*> candidates;
    std::size_t eligible_questions = 0;
    for (const auto& [page, group] : by_page) {
        bool all_eligible = std::all_of(group.members.begin(), group.members.end(), [&](std::size_t i) {
            return answerable_throughout(questions[i], epoch, horizon, horizon);
        });
        if (all_eligible) {
            candidates.push_back(&group);
            eligible_questions += group.members.size();
        }
    }

    auto sizing_error = [&](const std::string& which) {
        return SizingError("cannot fill " + which + " split exactly: requested dev=" + std::to_string(cfg.dev_size) +
                           " test=" + std::to_string(cfg.test_size) + ", but only " +
                           std::to_string(eligible_questions) + " eligible questions on " +
                           std::to_string(candidates.size()) + " eligible pages are available (max dev+test=" +
                           std::to_string(eligible_questions) + ")");
    };
    if (eligible_questions < cfg.dev_size + cfg.test_size) throw sizing_error("dev/test");

    std::mt19937_64 rng(cfg.seed);
    portable_shuffle(candidates, rng);

    Dataset ds;
    ds.horizon = horizon;
    ds.epoch = epoch;
    std::set<std::string> assigned_pages;

    auto take = [&](std::size_t target, Split split, const char* name) {
        std::vector<const PageGroup*> pool;
        for (const auto* g : candidates) {
            if (!assigned_pages.count(g->page)) pool.push_back(g);
        }
        auto picked = pick_pages(pool, target);
        if (!picked) throw sizing_error(name);
        for (std::size_t idx : *picked) {
            assigned_pages.insert(pool[idx]->page);
            for (std::size_t i : pool[idx]->members) ds.split_assignment[questions[i].id] = split;
        }
    };
    take(cfg.dev_size, Split::dev, "dev");
    take(cfg.test_size, Split::test, "test");
    for (const auto& q : questions) {
        if (!ds.split_assignment.count(q.id)) ds.split_assignment[q.id] = Split::train;
    }
    ds.questions = std::move(questions);
    validate_dataset(ds);
    return ds;
}

}  // namespace chronoforge
