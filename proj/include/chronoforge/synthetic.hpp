#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chronoforge/temporal_kb.hpp"

namespace chronoforge {

struct SyntheticDatasetConfig {
    std::size_t questions = 500;
    std::uint64_t seed = 7;
    std::size_t per_page = 5;
    double yearly_fraction = 0.7;   // answer changes every year
    double covalid_fraction = 0.1;  // a second answer shares some years
    std::size_t overlap_questions = 2;  // 2020 answer extends the 2019 name
};

/// Fictional questions with an answer in every year from epoch to horizon.
/// Unsplit; popularity is filled with deterministic values.
std::vector<TemporalQuestion> synthetic_questions(const SyntheticDatasetConfig& cfg = {});

struct SyntheticTable {
    std::string slug;
    std::string page_title;
    std::vector<std::string> sections;
    std::string csv;
};

/// Twelve small tables exercising the curation filters: per-year and
/// season winners, office-holders with start/end columns, numeric,
/// long-text, crowded, near-duplicate, non-covering, placeholder,
/// country-coded, wiki-markup and low-sensitivity cases.
std::vector<SyntheticTable> synthetic_tables(std::uint64_t seed = 11);

/// Writes each table as <root>/<slug>/table_0.csv with a meta.json.
void write_synthetic_tables(const std::vector<SyntheticTable>& tables, const std::filesystem::path& root);

}  // namespace chronoforge
