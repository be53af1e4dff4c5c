#pragma once

#include <filesystem>
#include <initializer_list>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chronoforge/common.hpp"
#include "chronoforge/temporal_kb.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(CF_SOURCE_DIR); }
inline fs::path fixture(const std::string& rel) { return source_dir() / "tests" / "fixtures" / rel; }
inline fs::path cli_path() { return fs::path(CF_CLI_PATH); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("chronoforge-" + tag + "-" + std::to_string(rd()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

struct Span {
    std::string text;
    chronoforge::Year start;
    std::optional<chronoforge::Year> end;
};

inline chronoforge::TemporalQuestion question(std::string id, std::string text, std::initializer_list<Span> spans,
                                              std::string page = "") {
    chronoforge::TemporalQuestion q;
    q.id = std::move(id);
    q.text = std::move(text);
    q.page_title = page.empty() ? q.id : std::move(page);
    q.section = "s";
    q.column = "c";
    for (const auto& s : spans) q.answers.push_back({s.text, s.start, s.end});
    return q;
}

/// The highest-grossing-film timeline.
inline chronoforge::TemporalQuestion film_question() {
    return question("film", "What is the highest-grossing film?",
                    {{"Titanic", 1998, 2009}, {"Avatar", 2010, 2018}, {"Avengers: Endgame", 2019, 2021},
                     {"Avatar", 2022, std::nullopt}});
}

}  // namespace testsupport
