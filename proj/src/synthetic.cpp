#include "chronoforge/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include <json.hpp>

#include "chronoforge/csv.hpp"

namespace chronoforge {

namespace {

const std::vector<std::string> kOnsets = {"b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v",
                                          "z", "br", "dr", "gr", "kl", "st", "th", "tr", "vr", "sh"};
const std::vector<std::string> kVowels = {"a", "e", "i", "o", "u", "ae", "ia", "ou", "ei"};
const std::vector<std::string> kCodas = {"", "", "n", "r", "l", "s", "th", "m", "x", "nd", "rk", "st"};

class NameForge {
public:
    explicit NameForge(std::uint64_t seed) : rng_(seed) {}

    std::string word(std::size_t syllables) {
        std::string w;
        for (std::size_t i = 0; i < syllables; ++i) {
            w += pick(kOnsets) + pick(kVowels);
            if (i + 1 == syllables) w += pick(kCodas);
        }
        w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
        return w;
    }

    /// Two-word name whose words are unused so far, so distinct names share
    /// no token.
    std::string person() {
        for (;;) {
            std::string a = word(2);
            std::string b = word(2 + bounded_index(rng_, 2));
            if (a == b || used_.count(a) || used_.count(b)) continue;
            used_.insert(a);
            used_.insert(b);
            return a + " " + b;
        }
    }

    std::string unique_word(std::size_t syllables) {
        for (;;) {
            std::string w = word(syllables);
            if (used_.insert(w).second) return w;
        }
    }

    std::mt19937_64& rng() { return rng_; }

private:
    const std::string& pick(const std::vector<std::string>& v) { return v[bounded_index(rng_, v.size())]; }

    std::mt19937_64 rng_;
    std::set<std::string> used_;
};

const std::vector<std::string> kRoles = {"mayor",      "head coach", "chief justice", "director",  "speaker",
                                         "chancellor", "captain",    "principal",     "governor",  "curator",
                                         "editor",     "conductor",  "commissioner",  "president", "treasurer"};
const std::vector<std::string> kBodies = {"city council", "football club",  "high court",   "observatory",
                                          "parliament",   "university",     "rowing club",  "academy",
                                          "province",     "museum",         "gazette",      "orchestra",
                                          "harbour board", "chess federation", "guild"};

}  // namespace

std::vector<TemporalQuestion> synthetic_questions(const SyntheticDatasetConfig& cfg) {
    NameForge forge(cfg.seed);
    auto& rng = forge.rng();
    std::vector<TemporalQuestion> out;
    std::string place;
    std::set<std::string> texts;
    for (std::size_t i = 0; i < cfg.questions; ++i) {
        if (i % cfg.per_page == 0) place = forge.unique_word(3);
        TemporalQuestion q;
        char id[32];
        std::snprintf(id, sizeof id, "synth/q%04zu", i);
        q.id = id;
        q.page_title = place;
        q.section = "Office holders";
        const std::size_t k = i % cfg.per_page;
        const std::string& role = kRoles[(i / cfg.per_page + k) % kRoles.size()];
        const std::string& body = kBodies[(i / cfg.per_page * 7 + k) % kBodies.size()];
        q.column = role;
        q.text = "Who is the " + role + " of the " + place + " " + body + "?";
        if (!texts.insert(q.text).second) q.text = "Who is the " + role + " of the " + place + " " + body + " (" + std::to_string(k) + ")?";

        const double u = keyed_uniform(cfg.seed, "shape#" + q.id);
        const bool yearly = u < cfg.yearly_fraction;
        const bool overlap = i < cfg.overlap_questions;
        Year y = kDefaultEpoch;
        std::string previous;
        while (y <= kDefaultHorizon) {
            Year len = 1;
            if (!yearly && !overlap) len = 1 + static_cast<Year>(bounded_index(rng, 3));
            if (y + len - 1 > kDefaultHorizon) len = kDefaultHorizon - y + 1;
            std::string name = forge.person();
            if (overlap && y == 2020) name = previous + " Jr.";
            TimedAnswer a{name, y, y + len - 1};
            if (a.end_year == kDefaultHorizon) a.end_year.reset();
            q.answers.push_back(a);
            previous = name;
            y += len;
        }
        if (!overlap && keyed_uniform(cfg.seed, "covalid#" + q.id) < cfg.covalid_fraction) {
            Year start = kDefaultEpoch + static_cast<Year>(bounded_index(rng, 20));
            q.answers.push_back({forge.person(), start, start + 2});
        }
        std::sort(q.answers.begin(), q.answers.end(), [](const TimedAnswer& a, const TimedAnswer& b) {
            if (a.start_year != b.start_year) return a.start_year < b.start_year;
            return a.text < b.text;
        });
        q.popularity = std::round(std::exp(3.0 + 8.0 * keyed_uniform(cfg.seed, "pop#" + place)) * 10.0) / 10.0;
        out.push_back(std::move(q));
    }
    return out;
}

namespace {

std::string render(const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (const auto& r : rows) out += csv::format_row(r) + "\n";
    return out;
}

}  // namespace

std::vector<SyntheticTable> synthetic_tables(std::uint64_t seed) {
    NameForge forge(seed);
    auto& rng = forge.rng();
    std::vector<SyntheticTable> out;
    auto add = [&](std::string title, std::vector<std::string> sections, std::vector<std::vector<std::string>> rows) {
        std::string slug = title;
        std::replace(slug.begin(), slug.end(), ' ', '_');
        out.push_back({slug, std::move(title), std::move(sections), render(rows)});
    };

    // per-year winners
    const std::string cup = forge.unique_word(3);
    std::vector<std::vector<std::string>> cup_rows{{"Year", "Winner", "Runner-up", "Venue"}};
    for (Year y = 2000; y <= 2023; ++y) {
        cup_rows.push_back({std::to_string(y), forge.unique_word(2) + " " + forge.unique_word(2),
                            forge.unique_word(2) + " " + forge.unique_word(3), forge.unique_word(3) + " Arena"});
    }
    add(cup + " Cup", {"Results", "Finals"}, cup_rows);

    // same competition mirrored on a second page with a reworded header
    {
        auto rows = cup_rows;
        rows[0] = {"Season", "Champion", "Finalist", "Stadium"};
        add("List of " + cup + " Cup finals", {"Finals by year"}, rows);
    }

    // season-labelled champions
    std::vector<std::vector<std::string>> seasons{{"Season", "Champions", "Top scorer", "Goals"}};
    for (Year y = 2000; y <= 2022; ++y) {
        char label[16];
        std::snprintf(label, sizeof label, "%d\xE2\x80\x93%02d", y, (y + 1) % 100);
        seasons.push_back({label, forge.unique_word(3) + " United", forge.person(),
                           std::to_string(14 + bounded_index(rng, 20))});
    }
    add(forge.unique_word(3) + " Premier League", {"Champions"}, seasons);

    // office holders with start/end and an incumbent
    std::vector<std::vector<std::string>> mayors{{"Mayor", "Took office", "Left office", "Party"}};
    const char* months[] = {"January", "March", "May", "July", "September", "November"};
    for (Year y = 1999; y <= 2021;) {
        Year len = 2 + static_cast<Year>(bounded_index(rng, 3));
        std::string start = y % 2 ? std::to_string(y) : std::string(months[bounded_index(rng, 6)]) + " 4, " + std::to_string(y);
        std::string end = y + len > 2023 ? "Incumbent" : std::to_string(y + len);
        mayors.push_back({forge.person(), start, end, forge.unique_word(2) + " Party"});
        y += len;
    }
    mayors.back()[2] = "Incumbent";
    add("List of mayors of " + forge.unique_word(3), {"Mayors", "Since 1999"}, mayors);

    // numeric answers
    std::vector<std::vector<std::string>> pop{{"Year", "Population", "Households"}};
    long people = 20000 + static_cast<long>(bounded_index(rng, 5000));
    for (Year y = 2000; y <= 2023; ++y) {
        people += 150 + static_cast<long>(bounded_index(rng, 400));
        char buf[32];
        std::snprintf(buf, sizeof buf, "%ld,%03ld", people / 1000, people % 1000);
        pop.push_back({std::to_string(y), buf, std::to_string(people / 3)});
    }
    add(forge.unique_word(3) + " Island", {"Demographics"}, pop);

    // long free-text answers
    std::vector<std::vector<std::string>> events{{"Year", "Highlight"}};
    for (Year y = 2000; y <= 2023; ++y) {
        events.push_back({std::to_string(y), "The " + forge.unique_word(2) + " festival moved to the old " +
                                                 forge.unique_word(2) + " quarter after a long public debate about parking and noise"});
    }
    add(forge.unique_word(3) + " Festival", {"History"}, events);

    // many co-valid answers per year
    std::vector<std::vector<std::string>> crowd{{"Year", "Member"}};
    for (Year y = 2000; y <= 2023; ++y) {
        for (int k = 0; k < 7; ++k) crowd.push_back({std::to_string(y), forge.person()});
    }
    add(forge.unique_word(3) + " Council", {"Membership"}, crowd);

    // entirely before the window
    std::vector<std::vector<std::string>> old{{"Year", "Keeper"}};
    for (Year y = 1980; y <= 1995; ++y) old.push_back({std::to_string(y), forge.person()});
    add(forge.unique_word(3) + " Lighthouse", {"Keepers"}, old);

    // placeholder rows
    std::vector<std::vector<std::string>> tba{{"Year", "Host city"}};
    for (Year y = 2000; y <= 2023; ++y) tba.push_back({std::to_string(y), y >= 2022 ? "TBA" : forge.unique_word(3)});
    add(forge.unique_word(3) + " Games", {"Hosts"}, tba);

    // country-coded names
    static const char* codes[] = {"KEN", "ETH", "GER", "NED", "JPN", "BRA", "USA", "POR"};
    std::vector<std::vector<std::string>> marathon{{"Year", "Men's winner", "Time"}};
    for (Year y = 2000; y <= 2023; ++y) {
        char t[16];
        std::snprintf(t, sizeof t, "2:%02zu:%02zu", 5 + bounded_index(rng, 10), bounded_index(rng, 60));
        marathon.push_back({std::to_string(y), std::string(codes[bounded_index(rng, 8)]) + " " + forge.person(), t});
    }
    add(forge.unique_word(3) + " Marathon", {"Winners"}, marathon);

    // wiki markup in cells
    std::vector<std::vector<std::string>> markup{{"Year", "Chief editor"}};
    for (Year y = 2000; y <= 2023; y += 2) {
        std::string name = forge.person();
        markup.push_back({std::to_string(y) + "\xE2\x80\x93" + std::to_string(y + 2),
                          "[[" + name + " (editor)|" + name + "]][" + std::to_string(1 + bounded_index(rng, 9)) + "]"});
    }
    add("The " + forge.unique_word(3) + " Gazette", {"Editors"}, markup);

    // too few changes
    std::vector<std::vector<std::string>> stable{{"Head coach", "From", "To"}};
    stable.push_back({forge.person(), "2001", "2008"});
    stable.push_back({forge.person(), "2009", "2015"});
    stable.push_back({forge.person(), "2016", "present"});
    add(forge.unique_word(3) + " Rowing Club", {"Coaches"}, stable);

    return out;
}

void write_synthetic_tables(const std::vector<SyntheticTable>& tables, const std::filesystem::path& root) {
    for (const auto& t : tables) {
        const auto dir = root / t.slug;
        std::filesystem::create_directories(dir);
        write_file(dir / "table_0.csv", t.csv);
        nlohmann::ordered_json meta;
        meta["page_title"] = t.page_title;
        meta["sections"]["table_0"] = t.sections;
        write_file(dir / "meta.json", meta.dump(2) + "\n");
    }
}

}  // namespace chronoforge
