#include "chronoforge/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "chronoforge/alignment.hpp"
#include "chronoforge/csv.hpp"
#include "chronoforge/curation.hpp"
#include "chronoforge/eval_harness.hpp"
#include "chronoforge/pageviews.hpp"
#include "chronoforge/prompting.hpp"
#include "chronoforge/question_gen.hpp"
#include "chronoforge/stub_oracle.hpp"
#include "chronoforge/wiki_tables.hpp"

namespace chronoforge {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const std::vector<std::string>& pipeline_stages() {
    static const std::vector<std::string> stages = {
        "extract-tables", "gen-questions", "curate", "split",  "fetch-popularity", "select-data",
        "assign-adaptive", "emit-train",   "eval",   "report", "sample-audit"};
    return stages;
}

std::uint64_t hash_tree(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) acc += fs::relative(f, root).generic_string() + "\t" + hex64(hash_file(f)) + "\n";
    return fnv1a64(acc);
}

std::shared_ptr<ModelClient> make_client(const RunConfig& cfg, std::shared_ptr<const Dataset> dataset) {
    std::shared_ptr<ModelClient> inner;
    std::string ns;
    if (cfg.client.kind == "stub") {
        inner = std::make_shared<StubOracle>(std::move(dataset), cfg.stub);
        ns = "stub:" + std::to_string(cfg.stub.knowledge_year) + ":" + std::to_string(cfg.stub.noise_rate) + ":" +
             std::to_string(cfg.stub.seed);
    } else {
        RetryPolicy retry;
        retry.max_retries = cfg.client.max_retries;
        auto transport = std::make_shared<HttplibTransport>(cfg.client.base_url, std::chrono::seconds(cfg.client.timeout_s));
        inner = std::make_shared<HttpModelClient>(transport, cfg.client.model, retry, cfg.client.max_in_flight,
                                                  api_key_from_env());
        ns = "http:" + cfg.client.base_url + ":" + cfg.client.model;
    }
    return std::make_shared<CachingClient>(inner, cfg.cache_dir / "cache.jsonl", ns);
}

namespace {

// ---- artifacts and manifests ------------------------------------------------------

struct Artifact {
    std::string name;
    std::string producer;
};

const Artifact kTables{"tables.jsonl", "extract-tables"};
const Artifact kPairs{"pairs.jsonl", "gen-questions"};
const Artifact kCurated{"curated.jsonl", "curate"};
const Artifact kDataset{"dataset.jsonl", "split"};
const Artifact kAnnotated{"annotated.jsonl", "fetch-popularity"};
const Artifact kSelection{"selection.json", "select-data"};
const Artifact kAdaptive{"adaptive_years.json", "assign-adaptive"};

fs::path require(const RunConfig& cfg, const Artifact& a) {
    fs::path p = cfg.workdir / a.name;
    if (!fs::exists(p)) throw StageInputMissing(p.string(), a.producer);
    return p;
}

class StageRun {
public:
    StageRun(std::string stage, const RunConfig& cfg, const StageOptions& opts, std::string primary)
        : cfg_(cfg), opts_(opts), primary_(std::move(primary)) {
        result_.stage = std::move(stage);
        manifest_["stage"] = result_.stage;
        manifest_["artifact"] = primary_;
        manifest_["inputs"] = ojson::object();
    }

    void input(const std::string& label, std::uint64_t hash) { manifest_["inputs"][label] = hex64(hash); }
    void input_file(const fs::path& p) { input(p.filename().string(), hash_file(p)); }
    void config(const ojson& c) { manifest_["config_hash"] = hex64(fnv1a64(c.dump())); }

    fs::path manifest_path() const { return cfg_.workdir / (primary_ + ".manifest.json"); }

    /// True when a previous run with identical inputs and config left intact outputs.
    bool up_to_date() {
        if (opts_.force || !fs::exists(manifest_path())) return false;
        auto old = nlohmann::json::parse(read_file(manifest_path()), nullptr, false);
        if (old.is_discarded()) return false;
        if (old.value("inputs", nlohmann::json()) != nlohmann::json(manifest_["inputs"])) return false;
        if (old.value("config_hash", "") != manifest_.value("config_hash", "")) return false;
        if (!old.contains("outputs")) return false;
        for (const auto& [name, hash] : old["outputs"].items()) {
            fs::path p = cfg_.workdir / name;
            if (!fs::exists(p) || hex64(hash_file(p)) != hash.get<std::string>()) return false;
            result_.outputs.push_back(p.string());
        }
        result_.skipped = true;
        result_.counts = old.value("counts", ojson::object());
        return true;
    }

    void write(const std::string& name, std::string_view content) {
        fs::create_directories(cfg_.workdir);
        write_file(cfg_.workdir / name, content);
        outputs_.push_back(name);
    }

    ojson& counts() { return result_.counts; }

    StageResult finish() {
        if (result_.skipped) return result_;
        manifest_["outputs"] = ojson::object();
        for (const auto& name : outputs_) {
            manifest_["outputs"][name] = hex64(hash_file(cfg_.workdir / name));
            result_.outputs.push_back((cfg_.workdir / name).string());
        }
        manifest_["counts"] = result_.counts;
        write_file(manifest_path(), manifest_.dump(2) + "\n");
        return result_;
    }

private:
    const RunConfig& cfg_;
    const StageOptions& opts_;
    std::string primary_;
    ojson manifest_;
    std::vector<std::string> outputs_;
    StageResult result_;
};

std::vector<TemporalTable> load_tables(const fs::path& p) {
    std::vector<TemporalTable> out;
    std::istringstream in(read_file(p));
    for (std::string line; std::getline(in, line);) {
        if (!trim(line).empty()) out.push_back(table_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

std::vector<GeneratedPair> load_pairs(const fs::path& p) {
    std::vector<GeneratedPair> out;
    std::istringstream in(read_file(p));
    for (std::string line; std::getline(in, line);) {
        if (!trim(line).empty()) out.push_back(pair_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

ojson client_json(const RunConfig& cfg) {
    auto j = cfg.to_json();
    ojson c;
    c["client"] = j["client"];
    if (cfg.client.kind == "stub") c["stub"] = j["stub"];
    return c;
}

std::shared_ptr<const Dataset> load_shared(const fs::path& p) {
    return std::make_shared<const Dataset>(load_dataset(p));
}

// ---- stages -----------------------------------------------------------------------

StageResult extract_tables(const RunConfig& cfg, const StageOptions& opts) {
    StageRun run("extract-tables", cfg, opts, kTables.name);
    run.input("dump_root", hash_tree(cfg.dump_root));
    run.config(ojson{{"filter_contemporary", cfg.filter_contemporary}});
    if (run.up_to_date()) return run.finish();

    ParseTablesReport report;
    ParseTablesConfig pc;
    pc.workers = cfg.workers;
    auto tables = parse_tables(cfg.dump_root, pc, &report);
    std::vector<TemporalTable> temporal;
    std::size_t no_temporal = 0;
    for (auto& t : tables) {
        auto specs = detect_temporal_columns(t);
        if (specs.empty()) {
            ++no_temporal;
            continue;
        }
        temporal.push_back({std::move(t), std::move(specs)});
    }
    const std::size_t before_filter = temporal.size();
    if (cfg.filter_contemporary) temporal = filter_contemporary(std::move(temporal));
    std::string out;
    for (const auto& t : temporal) out += table_to_json(t).dump() + "\n";
    run.write(kTables.name, out);
    run.counts() = ojson{{"files_seen", report.files_seen},
                         {"tables_parsed", tables.size()},
                         {"rows_repaired", report.rows_repaired},
                         {"rows_dropped", report.rows_dropped},
                         {"no_temporal_column", no_temporal},
                         {"not_contemporary", before_filter - temporal.size()},
                         {"tables", temporal.size()}};
    return run.finish();
}

StageResult gen_questions(const RunConfig& cfg, const StageOptions& opts) {
    const auto tables_path = require(cfg, kTables);
    StageRun run("gen-questions", cfg, opts, kPairs.name);
    run.input_file(tables_path);
    run.config(client_json(cfg));
    if (run.up_to_date()) return run.finish();

    auto tables = load_tables(tables_path);
    auto client = make_client(cfg, nullptr);
    auto res = generate_questions(*client, tables, default_qg_config(), cfg.workers);
    std::size_t transport_failures = 0;
    for (const auto& f : res.failures) {
        if (f.reason.rfind("transport", 0) == 0) ++transport_failures;
    }
    if (!tables.empty() && res.pairs.empty() && transport_failures == res.failures.size() && transport_failures > 0) {
        throw TransportError("question generation failed for every table: " + res.failures.front().reason);
    }
    std::string out;
    for (const auto& p : res.pairs) out += pair_to_json(p).dump() + "\n";
    run.write(kPairs.name, out);
    std::string failures;
    for (const auto& f : res.failures) failures += ojson{{"table_id", f.table_id}, {"reason", f.reason}}.dump() + "\n";
    run.write("qg_failures.jsonl", failures);
    const auto& r = res.report;
    run.counts() = ojson{{"tables", r.tables},
                         {"skipped_no_rows", r.skipped_no_rows},
                         {"rejected", r.rejected},
                         {"tables_with_pairs", r.tables_with_pairs},
                         {"pairs", r.pairs},
                         {"dropped_pairs", r.dropped_pairs},
                         {"format_retries", r.format_retries},
                         {"failures", res.failures.size()}};
    return run.finish();
}

StageResult curate_stage(const RunConfig& cfg, const StageOptions& opts) {
    const auto tables_path = require(cfg, kTables);
    const auto pairs_path = require(cfg, kPairs);
    StageRun run("curate", cfg, opts, kCurated.name);
    run.input_file(tables_path);
    run.input_file(pairs_path);
    run.config(cfg.to_json()["curation"]);
    if (run.up_to_date()) return run.finish();

    auto res = curate(load_pairs(pairs_path), load_tables(tables_path), cfg.curation);
    Dataset ds;
    ds.questions = res.questions;
    run.write(kCurated.name, dataset_to_jsonl(ds));
    run.write("attrition.csv", attrition_csv(res.attrition));
    std::string log;
    for (const auto& d : res.dedup_log) log += dedup_decision_to_json(d).dump() + "\n";
    run.write("dedup_log.jsonl", log);
    run.counts() = ojson{{"pairs", res.attrition.empty() ? 0 : res.attrition.front().input_count},
                         {"questions", res.questions.size()},
                         {"dedup_removed", res.dedup_log.size()}};
    return run.finish();
}

StageResult split_stage(const RunConfig& cfg, const StageOptions& opts) {
    const auto curated = require(cfg, kCurated);
    StageRun run("split", cfg, opts, kDataset.name);
    run.input_file(curated);
    run.config(cfg.to_json()["split"]);
    if (run.up_to_date()) return run.finish();

    auto ds = split_dataset(load_dataset(curated).questions, cfg.split);
    run.write(kDataset.name, dataset_to_jsonl(ds));
    run.counts() = ojson{{"train", ds.split(Split::train).size()},
                         {"dev", ds.split(Split::dev).size()},
                         {"test", ds.split(Split::test).size()}};
    return run.finish();
}

StageResult fetch_popularity(const RunConfig& cfg, const StageOptions& opts) {
    const auto dataset = require(cfg, kDataset);
    StageRun run("fetch-popularity", cfg, opts, kAnnotated.name);
    run.input_file(dataset);
    run.config(cfg.to_json()["pageviews"]);
    if (run.up_to_date()) return run.finish();

    std::shared_ptr<PageviewSource> source;
    if (cfg.pageviews.source == "synthetic") {
        source = std::make_shared<SyntheticPageviewSource>(cfg.pageviews.seed);
    } else {
        source = std::make_shared<WikimediaSource>(std::make_shared<HttplibTransport>(pv_base_from_env()));
    }
    PageviewClient client(source, cfg.cache_dir / "pageviews.jsonl");
    auto ds = load_dataset(dataset);
    auto report = annotate_popularity(ds, client, cfg.pageviews.max_failure_rate, cfg.workers);
    run.write(kAnnotated.name, dataset_to_jsonl(ds));
    run.counts() = ojson{{"questions", report.questions},
                         {"annotated", report.annotated},
                         {"failed", report.failed},
                         {"window", "2016-01..2023-12"}};
    if (report.train_mean) run.counts()["train_mean_popularity"] = *report.train_mean;
    for (const auto& [k, v] : report.errors) run.counts()["error_" + k] = v;
    return run.finish();
}

AlignmentConfig alignment_config(const RunConfig& cfg, const StageOptions& opts) {
    AlignmentConfig a = cfg.alignment;
    if (opts.target_year) a.target_year = *opts.target_year;
    if (opts.strategy) a.strategy = selection_strategy_from_name(*opts.strategy);
    a.validate();
    return a;
}

ojson alignment_json(const AlignmentConfig& a) {
    return ojson{{"target_year", a.target_year},
                 {"n_samples", a.n_samples},
                 {"select_k", a.select_k},
                 {"adaptive_threshold", a.adaptive_threshold},
                 {"cutoff_year", a.cutoff_year},
                 {"strategy", to_string(a.strategy)},
                 {"seed", a.seed},
                 {"sample_temperature", a.sample_temperature},
                 {"max_tokens", a.max_tokens}};
}

void check_scored(const ScoreMap& scores) {
    if (scores.empty()) return;
    for (const auto& [id, s] : scores) {
        if (s) return;
    }
    throw TransportError("every scoring request failed");
}

StageResult select_data(const RunConfig& cfg, const StageOptions& opts) {
    const auto annotated = require(cfg, kAnnotated);
    const auto a = alignment_config(cfg, opts);
    StageRun run("select-data", cfg, opts, kSelection.name);
    run.input_file(annotated);
    ojson c = client_json(cfg);
    c["alignment"] = alignment_json(a);
    run.config(c);
    if (run.up_to_date()) return run.finish();

    auto ds = load_shared(annotated);
    auto train = ds->split(Split::train);
    std::vector<const TemporalQuestion*> candidates;
    for (const auto* q : train) {
        if (!answers_at(*q, a.target_year, ds->horizon).empty()) candidates.push_back(q);
    }
    SelectionInputs inputs;
    if (a.strategy == SelectionStrategy::correctness || a.strategy == SelectionStrategy::confidence) {
        auto client = make_client(cfg, ds);
        if (a.strategy == SelectionStrategy::correctness) {
            inputs.correctness = score_all(*client, candidates, a.target_year, a);
            check_scored(inputs.correctness);
        } else {
            inputs.confidence = confidence_all(*client, candidates, a.target_year, a);
            check_scored(inputs.confidence);
        }
    }
    auto ids = select_training(train, inputs, a);
    ojson j;
    j["strategy"] = to_string(a.strategy);
    j["target_year"] = a.target_year;
    j["k"] = a.select_k;
    j["ids"] = ids;
    const ScoreMap& scores = a.strategy == SelectionStrategy::confidence ? inputs.confidence : inputs.correctness;
    ojson sj = ojson::object();
    for (const auto& id : ids) {
        auto it = scores.find(id);
        if (it != scores.end() && it->second) sj[id] = *it->second;
    }
    j["scores"] = sj;
    run.write(kSelection.name, j.dump(2) + "\n");
    std::size_t unscored = 0;
    for (const auto& [id, s] : scores) unscored += s ? 0 : 1;
    run.counts() = ojson{{"train", train.size()},
                         {"candidates", candidates.size()},
                         {"selected", ids.size()},
                         {"unscored", unscored}};
    return run.finish();
}

StageResult assign_adaptive(const RunConfig& cfg, const StageOptions& opts) {
    const auto annotated = require(cfg, kAnnotated);
    const auto a = alignment_config(cfg, opts);
    StageRun run("assign-adaptive", cfg, opts, kAdaptive.name);
    run.input_file(annotated);
    ojson c = client_json(cfg);
    c["alignment"] = alignment_json(a);
    run.config(c);
    if (run.up_to_date()) return run.finish();

    auto ds = load_shared(annotated);
    auto train = ds->split(Split::train);
    auto client = make_client(cfg, ds);
    auto years = assign_all(*client, train, a);
    ojson j = ojson::object();
    std::map<std::string, std::size_t> histogram;
    std::size_t none = 0;
    for (const auto& [id, y] : years) {
        j[id] = y ? ojson(*y) : ojson(nullptr);
        if (y) ++histogram[std::to_string(*y)];
        else ++none;
    }
    if (!train.empty() && none == train.size()) {
        // distinguish "knows nothing" from "could not be reached"
        CompletionRequest probe;
        probe.prompt = scoring_prompt(*train.front(), a.cutoff_year);
        probe.stop = {"\n\n"};
        client->complete(probe);
    }
    run.write(kAdaptive.name, j.dump(2) + "\n");
    run.counts() = ojson{{"questions", train.size()}, {"unassigned", none}, {"by_year", histogram}};
    return run.finish();
}

StageResult emit_train(const RunConfig& cfg, const StageOptions& opts) {
    const auto annotated = require(cfg, kAnnotated);
    const auto selection = require(cfg, kSelection);
    const fs::path adaptive = cfg.workdir / kAdaptive.name;
    auto sel = nlohmann::json::parse(read_file(selection));
    const Year year = opts.target_year.value_or(sel.at("target_year").get<Year>());
    const std::string target_name = "train_target_" + std::to_string(year) + ".jsonl";

    StageRun run("emit-train", cfg, opts, target_name);
    run.input_file(annotated);
    run.input_file(selection);
    if (fs::exists(adaptive)) run.input_file(adaptive);
    run.config(ojson{{"year", year}});
    if (run.up_to_date()) return run.finish();

    auto ds = load_dataset(annotated);
    EmitReport target_report;
    auto examples = emit_target_year(sel.at("ids").get<std::vector<std::string>>(), ds, year, &target_report);
    run.write(target_name, examples_to_jsonl(examples));
    run.counts()["target_examples"] = examples.size();
    run.counts()["target_skipped"] = target_report.skipped.size();
    if (fs::exists(adaptive)) {
        std::map<std::string, std::optional<Year>> assignments;
        const auto years = nlohmann::json::parse(read_file(adaptive));
        for (const auto& [id, y] : years.items()) {
            assignments[id] = y.is_null() ? std::nullopt : std::optional<Year>(y.get<Year>());
        }
        EmitReport ar;
        auto adaptive_examples = emit_adaptive(assignments, ds, &ar);
        run.write("train_adaptive.jsonl", examples_to_jsonl(adaptive_examples));
        run.counts()["adaptive_examples"] = adaptive_examples.size();
    }
    run.write("hparams.toml", emit_hparams());
    return run.finish();
}

struct EvalSetup {
    EvalConfig eval;
    std::string run_name;
    std::string compare;
};

EvalSetup eval_setup(const RunConfig& cfg, const StageOptions& opts) {
    EvalSetup s;
    const Year target = opts.target_year.value_or(cfg.eval.target_year);
    const std::string strategy = opts.strategy.value_or(cfg.eval.strategy);
    s.eval.format = prompt_format_from_name(cfg.eval.format);
    s.eval.target_year = target;
    s.eval.hit_threshold = opts.hit_threshold.value_or(cfg.eval.hit_threshold);
    s.eval.metrics = cfg.metrics;
    s.eval.workers = cfg.workers;
    if (s.eval.format == PromptFormat::fewshot) {
        s.eval.strategy = strategy_from_name(strategy, target);
        s.eval.shots = fixture_shots(s.eval.strategy.example_kind);
    }
    if (opts.run_name) s.run_name = *opts.run_name;
    else if (!cfg.eval.run_name.empty()) s.run_name = cfg.eval.run_name;
    else if (s.eval.format == PromptFormat::fewshot) s.run_name = strategy + "-" + std::to_string(target);
    else s.run_name = std::string(to_string(s.eval.format)) + "-" + std::to_string(target);
    s.compare = opts.compare.value_or(cfg.eval.compare);
    s.eval.validate();
    return s;
}

ojson eval_json(const EvalSetup& s, const RunConfig& cfg) {
    return ojson{{"format", to_string(s.eval.format)},
                 {"strategy", s.eval.format == PromptFormat::fewshot ? strategy_name(s.eval.strategy) : ""},
                 {"target_year", s.eval.target_year},
                 {"hit_threshold", s.eval.hit_threshold},
                 {"metrics", cfg.to_json()["metrics"]},
                 {"select_fewshot", cfg.eval.select_fewshot},
                 {"fewshot_trials", cfg.eval.fewshot_trials},
                 {"fewshot_pool", cfg.eval.fewshot_pool},
                 {"fewshot_dev_sample", cfg.eval.fewshot_dev_sample},
                 {"popularity_buckets", cfg.eval.popularity_buckets},
                 {"run", s.run_name}};
}

StageResult eval_stage(const RunConfig& cfg, const StageOptions& opts) {
    const auto annotated = require(cfg, kAnnotated);
    auto setup = eval_setup(cfg, opts);
    const std::string out_name = "eval_" + setup.run_name + ".jsonl";
    StageRun run("eval", cfg, opts, out_name);
    run.input_file(annotated);
    ojson c = client_json(cfg);
    c["eval"] = eval_json(setup, cfg);
    run.config(c);
    if (run.up_to_date()) return run.finish();

    auto ds = load_shared(annotated);
    auto test = ds->split(Split::test);
    auto client = make_client(cfg, ds);
    if (cfg.eval.select_fewshot && setup.eval.format == PromptFormat::fewshot) {
        FewShotConfig fc;
        fc.trials = cfg.eval.fewshot_trials;
        fc.pool_size = cfg.eval.fewshot_pool;
        fc.dev_sample = cfg.eval.fewshot_dev_sample;
        fc.seed = cfg.alignment.seed;
        fc.workers = cfg.workers;
        auto sel = select_fewshot(*client, ds->split(Split::train), ds->split(Split::dev), setup.eval.strategy, fc);
        setup.eval.shots = sel.shots;
        run.write("fewshot_" + setup.run_name + ".json", selection_to_json(sel, setup.eval.strategy).dump(2) + "\n");
    }
    auto records = run_eval(*client, test, setup.eval);
    std::size_t failed = 0;
    for (const auto& r : records) failed += r.failed ? 1 : 0;
    if (failed == records.size()) throw TransportError("every evaluation request failed: " + records.front().error);
    run.write(out_name, records_to_jsonl(records));
    std::map<std::string, std::size_t> cats;
    for (const auto& r : records) {
        if (!r.failed) ++cats[to_string(r.category)];
    }
    run.counts() = ojson{{"records", records.size()}, {"failed", failed}, {"categories", cats}};
    return run.finish();
}

StageResult report_stage(const RunConfig& cfg, const StageOptions& opts) {
    const auto annotated = require(cfg, kAnnotated);
    auto setup = eval_setup(cfg, opts);
    const fs::path records_path = cfg.workdir / ("eval_" + setup.run_name + ".jsonl");
    if (!fs::exists(records_path)) throw StageInputMissing(records_path.string(), "eval");
    const std::string out_name = "report_" + setup.run_name + ".csv";
    StageRun run("report", cfg, opts, out_name);
    run.input_file(annotated);
    run.input_file(records_path);
    if (!setup.compare.empty()) {
        if (!fs::exists(setup.compare)) throw StageInputMissing(setup.compare, "eval");
        run.input("compare", hash_file(setup.compare));
    }
    run.config(eval_json(setup, cfg));
    if (run.up_to_date()) return run.finish();

    auto ds = load_dataset(annotated);
    auto records = records_from_jsonl(read_file(records_path));
    std::optional<std::vector<EvalRecord>> baseline;
    if (!setup.compare.empty()) baseline = records_from_jsonl(read_file(setup.compare));
    std::vector<EvalReport> reports;
    reports.push_back(build_report(setup.run_name, records, ds, setup.eval.target_year, setup.eval.hit_threshold,
                                   cfg.eval.popularity_buckets, baseline ? &*baseline : nullptr));
    if (baseline) {
        reports.push_back(build_report(fs::path(setup.compare).stem().string(), *baseline, ds, setup.eval.target_year,
                                       setup.eval.hit_threshold, cfg.eval.popularity_buckets));
    }
    run.write(out_name, report_csv(reports.front()));
    ojson meta{{"decoding", "greedy"},
               {"temperature", 0.0},
               {"stop", "\n\n"},
               {"hit_threshold", setup.eval.hit_threshold},
               {"format", to_string(setup.eval.format)},
               {"popularity_window", "2016-01..2023-12"}};
    run.write("plot_" + setup.run_name + ".json", plot_data(reports, meta).dump(2) + "\n");
    const auto& r = reports.front();
    run.counts() = ojson{{"records", r.records},
                         {"failed", r.failed},
                         {"f_max", r.scores.mean_f_max},
                         {"argmax_year", r.scores.mean_curve.empty() ? 0 : curve_argmax(r.scores.mean_curve)}};
    return run.finish();
}

StageResult sample_audit(const RunConfig& cfg, const StageOptions& opts) {
    const auto curated = require(cfg, kCurated);
    StageRun run("sample-audit", cfg, opts, "audit_sample.csv");
    run.input_file(curated);
    run.config(cfg.to_json()["audit"]);
    if (run.up_to_date()) return run.finish();

    auto ds = load_dataset(curated);
    std::vector<std::pair<double, const TemporalQuestion*>> order;
    for (const auto& q : ds.questions) order.emplace_back(keyed_uniform(cfg.audit.seed, "audit#" + q.id), &q);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second->id < b.second->id;
    });
    if (order.size() > cfg.audit.sample_size) order.resize(cfg.audit.sample_size);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second->id < b.second->id; });
    std::string out = "id,page_title,column,question,answers_2010,answers_2020,answers_2023,timeline,verdict\n";
    for (const auto& [u, q] : order) {
        auto set = [&](Year y) {
            auto s = answers_at(*q, y, ds.horizon);
            return join(std::vector<std::string>(s.begin(), s.end()), " | ");
        };
        std::vector<std::string> spans;
        for (const auto& a : q->answers) {
            spans.push_back(a.text + " (" + std::to_string(a.start_year) + "-" +
                            (a.end_year ? std::to_string(*a.end_year) : std::string("")) + ")");
        }
        out += csv::format_row({q->id, q->page_title, q->column, q->text, set(2010), set(2020), set(2023),
                                join(spans, "; "), ""}) +
               "\n";
    }
    run.write("audit_sample.csv", out);
    run.counts() = ojson{{"population", ds.questions.size()}, {"sampled", order.size()}};
    return run.finish();
}

}  // namespace

StageResult run_stage(const std::string& stage, const RunConfig& cfg, const StageOptions& opts) {
    fs::create_directories(cfg.workdir);
    if (stage == "extract-tables") return extract_tables(cfg, opts);
    if (stage == "gen-questions") return gen_questions(cfg, opts);
    if (stage == "curate") return curate_stage(cfg, opts);
    if (stage == "split") return split_stage(cfg, opts);
    if (stage == "fetch-popularity") return fetch_popularity(cfg, opts);
    if (stage == "select-data") return select_data(cfg, opts);
    if (stage == "assign-adaptive") return assign_adaptive(cfg, opts);
    if (stage == "emit-train") return emit_train(cfg, opts);
    if (stage == "eval") return eval_stage(cfg, opts);
    if (stage == "report") return report_stage(cfg, opts);
    if (stage == "sample-audit") return sample_audit(cfg, opts);
    throw ConfigError("unknown stage '" + stage + "'");
}

}  // namespace chronoforge
