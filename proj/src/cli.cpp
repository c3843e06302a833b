#include "promptforge/cli.hpp"

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "promptforge/multistage.hpp"
#include "promptforge/pipelines.hpp"
#include "promptforge/storage.hpp"

namespace promptforge {

namespace {

struct Options {
    std::string config;
    std::string dataset;
    std::vector<std::string> test_datasets;
    std::string run_dir;
    std::string out;
    std::string chain;
    std::string stop_after = "refined";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> metric;
    std::optional<std::size_t> parallelism;
    bool baselines_only = false;
    bool verbose = false;
};

struct Session {
    Config config;
    std::unique_ptr<Gateway> gateway;
    OptimizerContext ctx;

    Gateway& gw() const { return *gateway; }
};

std::string fixed(double v, int decimals) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(decimals) << v;
    return ss.str();
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

Config load_with_overrides(const Options& o) {
    Config c = load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.metric) {
        auto type = metric_from_string(*o.metric);
        if (!type) throw ConfigError("--metric must be exact_match, token_f1 or judge_relevancy");
        c.metric.type = *type;
    }
    if (o.parallelism) c.backends.parallelism = *o.parallelism;
    finalize(c);
    return c;
}

Session open_session(const Options& o, const CliEnv& env, const std::optional<fs::path>& cache_dir) {
    Session s;
    s.config = load_with_overrides(o);
    auto transport = env.transport_factory ? env.transport_factory(s.config) : make_transport(s.config);
    s.gateway = make_gateway(s.config, std::move(transport), cache_dir);
    s.ctx = make_context(s.config, *s.gateway);
    return s;
}

void report_stats(const Session& s, const Options& o, const CliEnv& env, std::ostream& err) {
    if (!s.gateway) return;
    auto stats = s.gateway->stats();
    if (env.on_stats) env.on_stats(stats);
    if (!o.verbose) return;
    err << "calls: " << stats.calls << ", transport: " << stats.transport_calls << ", cache hits: " << stats.cache_hits
        << "\n";
    for (const auto& [tag, n] : stats.by_tag) err << "  " << tag << ": " << n << "\n";
}

// The run directory keeps a copy of the optimization split; later commands
// reuse it and a different split is refused.
Dataset pin_dataset(const fs::path& run_dir, const std::string& dataset_path) {
    const auto pinned = run_dir / "dataset.jsonl";
    if (dataset_path.empty()) {
        if (!fs::exists(pinned))
            throw IoError("no --dataset given and '" + pinned.string() + "' does not exist");
        return load_dataset(pinned);
    }
    Dataset dataset = load_dataset(dataset_path);
    auto text = dataset_to_jsonl(dataset);
    if (fs::exists(pinned)) {
        if (read_file(pinned) != text)
            throw ConfigMismatch("dataset differs from the one stored in '" + run_dir.string() + "'");
    } else {
        write_atomic(pinned, text);
    }
    return dataset;
}

OptimizedPrompt load_optimized(const fs::path& run_dir) {
    const auto path = run_dir / "optimized_prompt.json";
    if (!fs::exists(path))
        throw ConfigError("no optimized prompt in '" + run_dir.string() + "'; run optimize first");
    Json j = Json::parse(read_file(path), nullptr, false);
    try {
        if (j.is_discarded()) throw SchemaViolation("not JSON");
        return optimized_from_json(j);
    } catch (const SchemaViolation& e) {
        throw CorruptCheckpoint("refined", e.what());
    }
}

int cmd_extract(const Options& o, const CliEnv& env, std::ostream& out, std::ostream& err) {
    const fs::path run_dir = o.run_dir;
    Session s = open_session(o, env, run_dir / "cache");
    try {
        Dataset dataset = pin_dataset(run_dir, o.dataset);
        ensure_config_hash(run_dir, config_hash(s.config));
        auto outcome = run_pipeline(dataset, s.config.pipeline, s.ctx, run_dir, Phase::features);
        const auto& m = *outcome.features;
        out << "features: " << m.n() << " x " << m.l() << " -> " << (run_dir / "features.json").string() << "\n";
    } catch (...) {
        report_stats(s, o, env, err);
        throw;
    }
    report_stats(s, o, env, err);
    return kExitOk;
}

int cmd_optimize(const Options& o, const CliEnv& env, std::ostream& out, std::ostream& err) {
    const fs::path run_dir = o.run_dir;
    auto stop = phase_from_string(o.stop_after);
    if (!stop || *stop == Phase::none) throw ConfigError("--stop-after must be features, candidates or refined");
    Session s = open_session(o, env, run_dir / "cache");
    try {
        Dataset dataset = pin_dataset(run_dir, o.dataset);
        ensure_config_hash(run_dir, config_hash(s.config));
        auto outcome = run_pipeline(dataset, s.config.pipeline, s.ctx, run_dir, *stop);
        if (outcome.resumed_from != Phase::none)
            out << "resumed after " << to_string(outcome.resumed_from) << "\n";
        if (outcome.candidates) {
            const auto& c = outcome.candidates->candidates[outcome.candidates->best];
            out << "best candidate: t" << c.batch_index << " score " << fixed(c.score.value(), 3) << "\n";
        }
        if (outcome.refined) out << "optimized score: " << fixed(outcome.refined->optimized.score.value(), 3) << "\n";
    } catch (...) {
        report_stats(s, o, env, err);
        throw;
    }
    report_stats(s, o, env, err);
    return kExitOk;
}

int cmd_evaluate(const Options& o, const CliEnv& env, std::ostream& out, std::ostream& err) {
    const fs::path run_dir = o.run_dir;
    if (o.test_datasets.size() != 1) throw ConfigError("evaluate takes exactly one --test-dataset");
    Session s = open_session(o, env, run_dir / "cache");
    try {
        auto optimized = load_optimized(run_dir);
        Dataset test = load_dataset(o.test_datasets.front());
        auto report = evaluate_prompt(optimized.prompt, test, s.gw(), s.config.backends.roles.agent,
                                      s.config.metric, s.config.backends.parallelism);
        save_evaluation(run_dir, "test", report);
        for (const auto& r : report.per_example)
            if (r.flagged) err << "warning: example " << r.example_id << " scored 0: " << one_line(r.note) << "\n";
        out << fixed(report.aggregate.value(), 3) << "\n";
    } catch (...) {
        report_stats(s, o, env, err);
        throw;
    }
    report_stats(s, o, env, err);
    return kExitOk;
}

std::vector<std::string> dataset_labels(const std::vector<std::string>& paths) {
    std::vector<std::string> labels;
    std::map<std::string, int> seen;
    for (const auto& p : paths) {
        auto stem = fs::path(p).stem().string();
        int n = ++seen[stem];
        labels.push_back(n == 1 ? stem : stem + "_" + std::to_string(n));
    }
    return labels;
}

int cmd_compare(const Options& o, const CliEnv& env, std::ostream& out, std::ostream& err) {
    const fs::path run_dir = o.run_dir;
    const fs::path out_dir = o.out.empty() ? run_dir : fs::path(o.out);
    if (o.test_datasets.empty()) throw ConfigError("compare needs at least one --test-dataset");
    Session s = open_session(o, env, run_dir / "cache");
    try {
        std::optional<OptimizedPrompt> optimized;
        if (!o.baselines_only) optimized = load_optimized(run_dir);
        std::vector<Dataset> tests;
        for (const auto& p : o.test_datasets) tests.push_back(load_dataset(p));
        const auto labels = dataset_labels(o.test_datasets);

        std::string instruction;
        if (optimized) instruction = optimized->prompt.text(s.config.baselines.instruction_slot);
        const auto options = make_baseline_options(s.config, instruction);

        std::vector<CompareRow> rows;
        for (auto kind : {BaselineKind::cot, BaselineKind::sequential_cot, BaselineKind::self_consistency_cot}) {
            CompareRow row{std::string(display_name(kind)), {}};
            for (std::size_t d = 0; d < tests.size(); ++d) {
                auto report = evaluate_answers(
                    tests[d],
                    [&](const Example& ex) { return run_baseline(kind, ex.input, s.gw(), options); },
                    s.config.metric, s.gw(), s.config.backends.parallelism);
                save_evaluation(run_dir, std::string(to_string(kind)) + "_" + labels[d], report);
                row.scores.push_back(report.aggregate.value());
            }
            rows.push_back(std::move(row));
        }
        if (optimized) {
            CompareRow row{"Optimized Agent", {}};
            for (std::size_t d = 0; d < tests.size(); ++d) {
                auto report = evaluate_prompt(optimized->prompt, tests[d], s.gw(), s.config.backends.roles.agent,
                                              s.config.metric, s.config.backends.parallelism);
                save_evaluation(run_dir, "optimized_" + labels[d], report);
                row.scores.push_back(report.aggregate.value());
            }
            rows.push_back(std::move(row));
        }

        auto text = compare_text(labels, rows);
        write_atomic(out_dir / "compare.csv", compare_csv(labels, rows));
        write_atomic(out_dir / "compare.txt", text);
        out << text;
    } catch (...) {
        report_stats(s, o, env, err);
        throw;
    }
    report_stats(s, o, env, err);
    return kExitOk;
}

Json chain_result_json(const ChainResult& r) {
    Json j;
    Json stages = Json::array();
    for (const auto& st : r.stages)
        stages.push_back({{"name", st.name}, {"stage_score", st.stage_score.value()}, {"prompt", to_json(st.prompt)}});
    j["stages"] = std::move(stages);
    j["initial_score"] = r.initial_score.value();
    j["score"] = r.score.value();
    j["trace"] = to_json(r.trace);
    j["warnings"] = r.warnings;
    return j;
}

int cmd_chain(const Options& o, const CliEnv& env, std::ostream& out, std::ostream& err) {
    const fs::path run_dir = o.run_dir;
    Session s = open_session(o, env, run_dir / "cache");
    try {
        ChainSpec spec = load_chain(o.chain);
        ensure_config_hash(run_dir, config_hash(s.config));
        auto result = optimize_chain(spec, s.config.pipeline, s.ctx, run_dir);
        write_atomic(run_dir / "chain_result.json", dump_artifact(chain_result_json(result)));
        for (const auto& w : result.warnings) err << "warning: " << one_line(w) << "\n";
        for (const auto& st : result.stages)
            out << "stage " << st.name << ": " << fixed(st.stage_score.value(), 3) << "\n";
        out << "chain score: " << fixed(result.initial_score.value(), 3) << " -> " << fixed(result.score.value(), 3)
            << "\n";
    } catch (...) {
        report_stats(s, o, env, err);
        throw;
    }
    report_stats(s, o, env, err);
    return kExitOk;
}

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "Run configuration (JSON)")->required();
    cmd->add_option("--run-dir", o.run_dir, "Run directory")->required();
    cmd->add_option("--seed", o.seed, "Override the config seed");
    cmd->add_option("--metric", o.metric, "exact_match, token_f1 or judge_relevancy");
    cmd->add_option("--parallelism", o.parallelism, "Max in-flight model calls")->check(CLI::PositiveNumber);
    cmd->add_flag("-v,--verbose", o.verbose, "Print call counters to stderr");
}

}  // namespace

int exit_code_for(std::exception_ptr error) {
    try {
        rethrow_root(error);
    } catch (const ConfigError&) {
        return kExitConfig;
    } catch (const BadBatchSize&) {
        return kExitConfig;
    } catch (const InvalidChain&) {
        return kExitConfig;
    } catch (const DatasetError&) {
        return kExitData;
    } catch (const IoError&) {
        return kExitData;
    } catch (const CorruptCheckpoint&) {
        return kExitData;
    } catch (const BackendError&) {
        return kExitBackend;
    } catch (const ExtractionFailed&) {
        return kExitBackend;
    } catch (const GenerationFailed&) {
        return kExitBackend;
    } catch (const ImprovementFailed&) {
        return kExitBackend;
    } catch (const JudgeParseFailure&) {
        return kExitBackend;
    } catch (const SelectionFailed&) {
        return kExitBackend;
    } catch (const SchemaViolation&) {
        return kExitBackend;
    } catch (const MatrixError&) {
        return kExitBackend;
    } catch (...) {
        return kExitUsage;
    }
}

std::string compare_csv(const std::vector<std::string>& datasets, const std::vector<CompareRow>& rows) {
    std::ostringstream ss;
    ss << "workflow";
    for (const auto& d : datasets) ss << "," << d;
    ss << "\n";
    for (const auto& r : rows) {
        ss << r.workflow;
        for (double v : r.scores) ss << "," << fixed(v, 4);
        ss << "\n";
    }
    return ss.str();
}

std::string compare_text(const std::vector<std::string>& datasets, const std::vector<CompareRow>& rows) {
    std::vector<std::string> header{"Workflow/Domain"};
    header.insert(header.end(), datasets.begin(), datasets.end());
    std::vector<std::vector<std::string>> cells{header};
    for (const auto& r : rows) {
        std::vector<std::string> line{r.workflow};
        for (double v : r.scores) line.push_back(fixed(100.0 * v, 1) + "%");
        cells.push_back(std::move(line));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : cells)
        for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

    std::ostringstream ss;
    auto rule = [&] {
        for (auto w : width) ss << "+" << std::string(w + 2, '-');
        ss << "+\n";
    };
    rule();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t c = 0; c < cells[i].size(); ++c) {
            ss << "| ";
            if (c == 0)
                ss << std::left << std::setw(static_cast<int>(width[c])) << cells[i][c];
            else
                ss << std::right << std::setw(static_cast<int>(width[c])) << cells[i][c];
            ss << " ";
        }
        ss << "|\n";
        if (i == 0) rule();
    }
    rule();
    return ss.str();
}

int run_cli(const std::vector<std::string>& args, const CliEnv& env) {
    std::ostream& out = env.out ? *env.out : std::cout;
    std::ostream& err = env.err ? *env.err : std::cerr;

    CLI::App app{"promptforge: feature-driven prompt optimization"};
    app.require_subcommand(1);
    Options o;

    auto* extract = app.add_subcommand("extract", "Extract the feature matrix of a dataset");
    add_common(extract, o);
    extract->add_option("--dataset", o.dataset, "Optimization split (JSON lines)")->required();

    auto* optimize = app.add_subcommand("optimize", "Generate candidates and refine the best one");
    add_common(optimize, o);
    optimize->add_option("--dataset", o.dataset, "Optimization split; defaults to the run's stored copy");
    optimize->add_option("--stop-after", o.stop_after, "features, candidates or refined");

    auto* evaluate = app.add_subcommand("evaluate", "Score the optimized prompt on a held-out split");
    add_common(evaluate, o);
    evaluate->add_option("--test-dataset", o.test_datasets, "Held-out split")->required();

    auto* compare = app.add_subcommand("compare", "Compare the optimized agent with CoT baselines");
    add_common(compare, o);
    compare->add_option("--test-dataset", o.test_datasets, "Held-out split; repeat for more columns")->required();
    compare->add_flag("--baselines-only", o.baselines_only, "Skip the optimized agent");
    compare->add_option("--out", o.out, "Directory for compare.csv and compare.txt (default: run dir)");

    auto* chain = app.add_subcommand("chain", "Optimize a linear multi-stage workflow");
    add_common(chain, o);
    chain->add_option("--chain", o.chain, "Chain description (JSON)")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return kExitConfig;
    }

    try {
        if (extract->parsed()) return cmd_extract(o, env, out, err);
        if (optimize->parsed()) return cmd_optimize(o, env, out, err);
        if (evaluate->parsed()) return cmd_evaluate(o, env, out, err);
        if (compare->parsed()) return cmd_compare(o, env, out, err);
        return cmd_chain(o, env, out, err);
    } catch (const std::exception& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return exit_code_for(std::current_exception());
    }
}

}  // namespace promptforge
