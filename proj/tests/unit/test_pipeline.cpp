#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "chronoforge/pipeline.hpp"
#include "support.hpp"

using namespace chronoforge;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const fs::path& dir, const std::string& extra = "") {
    auto text = read_file(testsupport::source_dir() / "fixtures" / "run.toml");
    const std::string from = "dump_root = \"corpus\"\nworkdir = \"../work\"";
    auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, from.size(),
                 "dump_root = \"" + (testsupport::source_dir() / "fixtures" / "corpus").string() + "\"\nworkdir = \"work\"");
    auto path = dir / "run.toml";
    std::ofstream(path) << text << extra;
    return path;
}

int cli(const std::string& args, const fs::path& log) {
    auto cmd = "\"" + testsupport::cli_path().string() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("cli runs every stage and short-circuits reruns") {
    testsupport::TempDir dir("cli");
    auto config = write_config(dir.path());
    auto log = dir.path() / "log.txt";
    const auto cfg_arg = " --config \"" + config.string() + "\"";

    CHECK(cli("eval" + cfg_arg, log) == 3);
    CHECK(read_file(log).find("annotated.jsonl") != std::string::npos);

    for (const auto& stage : pipeline_stages()) {
        INFO(stage);
        CHECK(cli(stage + cfg_arg, log) == 0);
    }
    const auto work = dir.path() / "work";
    for (const char* name : {"tables.jsonl", "pairs.jsonl", "curated.jsonl", "attrition.csv", "dataset.jsonl",
                             "annotated.jsonl", "selection.json", "adaptive_years.json", "train_target_2019.jsonl",
                             "train_adaptive.jsonl", "hparams.toml", "eval_sensitive-time-2019.jsonl",
                             "report_sensitive-time-2019.csv", "audit_sample.csv"}) {
        INFO(name);
        CHECK(fs::exists(work / name));
    }

    auto cfg = load_run_config(config);
    const auto before = hash_tree(work);
    for (const auto& stage : pipeline_stages()) {
        INFO(stage);
        CHECK(run_stage(stage, cfg).skipped);
    }
    CHECK(hash_tree(work) == before);
    std::ofstream(work / "curated.jsonl", std::ios::app) << "\n";
    CHECK_FALSE(run_stage("curate", cfg).skipped);
    CHECK(hash_tree(work) == before);
    StageOptions force;
    force.force = true;
    CHECK_FALSE(run_stage("report", cfg, force).skipped);

    CHECK(cli("eval --target-year 2010" + cfg_arg, log) == 0);
    CHECK(fs::exists(work / "eval_sensitive-time-2010.jsonl"));
    CHECK(cli("report --target-year 2010" + cfg_arg, log) == 0);
    CHECK(fs::exists(work / "report_sensitive-time-2010.csv"));

    CHECK(cli("select-data --strategy bogus" + cfg_arg, log) == 2);
}

TEST_CASE("cli configuration errors") {
    testsupport::TempDir dir("badcfg");
    auto log = dir.path() / "log.txt";
    auto config = write_config(dir.path(), "\n[extra]\nkey = 1\n");
    CHECK(cli("extract-tables --config \"" + config.string() + "\"", log) == 2);
    CHECK(cli("extract-tables --config \"" + (dir.path() / "none.toml").string() + "\"", log) == 2);

    auto big = write_config(dir.path(), "");
    std::string text = read_file(big);
    text.replace(text.find("test_size = 4"), 13, "test_size = 400");
    std::ofstream(big) << text;
    auto cfg = load_run_config(big);
    for (const auto& stage : {"extract-tables", "gen-questions", "curate"}) run_stage(stage, cfg);
    CHECK_THROWS_AS(run_stage("split", cfg), SizingError);
    CHECK(cli("split --config \"" + big.string() + "\"", log) == 2);
}
