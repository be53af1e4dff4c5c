#include <csignal>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "chronoforge/completion_server.hpp"
#include "chronoforge/config.hpp"
#include "chronoforge/pipeline.hpp"
#include "chronoforge/stub_oracle.hpp"
#include "chronoforge/synthetic.hpp"

namespace cf = chronoforge;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kMissingInput = 3, kTransport = 4 };

cf::CompletionServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

void print_result(const cf::StageResult& r) {
    std::cout << r.stage << (r.skipped ? ": up to date" : ": done") << "\n";
    for (const auto& o : r.outputs) std::cout << "  wrote " << o << "\n";
    if (!r.counts.empty()) std::cout << "  " << r.counts.dump() << "\n";
}

int serve(const std::string& config_path, const std::string& host, int port) {
    std::shared_ptr<const cf::Dataset> ds;
    cf::StubOracleConfig stub;
    if (!config_path.empty()) {
        auto cfg = cf::load_run_config(config_path);
        stub = cfg.stub;
        for (const char* name : {"annotated.jsonl", "dataset.jsonl", "curated.jsonl"}) {
            if (fs::exists(cfg.workdir / name)) {
                ds = std::make_shared<const cf::Dataset>(cf::load_dataset(cfg.workdir / name));
                break;
            }
        }
    }
    auto oracle = std::make_shared<cf::StubOracle>(ds, stub);
    cf::CompletionServer server(oracle, "stub-" + std::to_string(stub.knowledge_year));
    int bound = server.bind(host, port);
    if (bound < 0) {
        std::cerr << "error: cannot bind " << host << ":" << port << "\n";
        return kFailure;
    }
    std::cout << "serving stub oracle (knowledge year " << stub.knowledge_year << ", "
              << (ds ? std::to_string(ds->questions.size()) + " questions" : std::string("no dataset"))
              << ") on http://" << host << ":" << bound << "/v1/completions" << std::endl;
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.serve();
    g_server = nullptr;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Build and evaluate time-sensitive QA datasets from Wikipedia tables."};
    app.require_subcommand(1);

    std::string config_path;
    cf::StageOptions opts;
    std::string strategy, compare, run_name;
    int target_year = 0;
    double hit_threshold = 0.0;

    struct StageCmd {
        std::string name;
        CLI::App* cmd;
    };
    std::vector<StageCmd> stages;
    const std::map<std::string, std::string> help = {
        {"extract-tables", "parse dump tables and keep those with contemporary temporal columns"},
        {"gen-questions", "ask the model for one question per answerable column"},
        {"curate", "extract timelines, clean, filter, deduplicate and rebalance"},
        {"split", "page-disjoint train/dev/test split"},
        {"fetch-popularity", "annotate questions with average monthly pageviews"},
        {"select-data", "choose finetuning questions (correctness, popularity, confidence, random)"},
        {"assign-adaptive", "find each question's latest known year"},
        {"emit-train", "write target-year and adaptive training files plus hparams"},
        {"eval", "run the model over the test split"},
        {"report", "aggregate evaluation records into CSV and plot data"},
        {"sample-audit", "draw a seeded sample of curated questions for manual review"}};
    for (const auto& name : cf::pipeline_stages()) {
        auto* cmd = app.add_subcommand(name, help.at(name));
        cmd->add_option("--config", config_path, "run configuration (TOML)")->required();
        cmd->add_flag("--force", opts.force, "ignore the manifest and recompute");
        if (name == "select-data" || name == "assign-adaptive" || name == "emit-train" || name == "eval" ||
            name == "report") {
            cmd->add_option("--target-year", target_year, "target year");
        }
        if (name == "select-data") cmd->add_option("--strategy", strategy, "correctness|popularity|confidence|random");
        if (name == "eval" || name == "report") {
            cmd->add_option("--strategy", strategy, "insensitive|insensitive-time|sensitive|sensitive-time");
            cmd->add_option("--hit-threshold", hit_threshold, "token F1 needed to count a year as hit");
            cmd->add_option("--compare", compare, "baseline eval records (JSONL)");
            cmd->add_option("--run-name", run_name, "name used in output file names");
        }
        stages.push_back({name, cmd});
    }

    auto* serve_cmd = app.add_subcommand("stub-serve", "serve the stub oracle behind the completions API");
    std::string host = "127.0.0.1";
    int port = 8089;
    serve_cmd->add_option("--config", config_path, "run configuration (TOML)");
    serve_cmd->add_option("--host", host, "bind address");
    serve_cmd->add_option("--port", port, "port (0 picks a free one)");

    auto* synth_cmd = app.add_subcommand("synth-corpus", "write the synthetic fixture tables");
    std::string synth_out;
    std::uint64_t synth_seed = 11;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--seed", synth_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (serve_cmd->parsed()) return serve(config_path, host, port);
        if (synth_cmd->parsed()) {
            cf::write_synthetic_tables(cf::synthetic_tables(synth_seed), synth_out);
            std::cout << "wrote synthetic tables to " << synth_out << "\n";
            return kOk;
        }
        for (const auto& s : stages) {
            if (!s.cmd->parsed()) continue;
            if (target_year) opts.target_year = target_year;
            if (!strategy.empty()) opts.strategy = strategy;
            if (hit_threshold > 0.0) opts.hit_threshold = hit_threshold;
            if (!compare.empty()) opts.compare = fs::absolute(compare).string();
            if (!run_name.empty()) opts.run_name = run_name;
            auto cfg = cf::load_run_config(config_path);
            print_result(cf::run_stage(s.name, cfg, opts));
            return kOk;
        }
    } catch (const cf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const cf::SizingError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const cf::StageInputMissing& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kMissingInput;
    } catch (const cf::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return kTransport;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
