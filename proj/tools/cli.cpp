// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "windowkv/bench.hpp"
#include "windowkv/classifier.hpp"
#include "windowkv/error.hpp"
#include "windowkv/grouping.hpp"
#include "windowkv/json_io.hpp"
#include "windowkv/kv_store.hpp"
#include "windowkv/policies.hpp"
#include "windowkv/trace.hpp"
#include "windowkv/trace_io.hpp"

namespace windowkv::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::kFormat, "cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::kFormat, "cannot open '" + path.string() + "' for writing");
    out << text;
    out.close();
    require(out.good(), ErrorKind::kFormat, "failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Shared compression flags
// ---------------------------------------------------------------------------

struct ConfigFlags {
    std::string trace_path;
    std::uint32_t alpha = 16;
    std::uint32_t omega = 8;
    std::uint32_t p_aggregation = 4;
    std::uint32_t gamma = 8;
    double lambda = kDefaultPyramidLambda;
    std::optional<std::int64_t> budget;
    std::optional<std::int64_t> kv_size_per_layer;
    std::string task = "auto";
    std::string prompt_file;
    std::uint64_t bytes_per_token = 0;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f, bool trace_required = true) {
    auto* trace = cmd->add_option("--trace", f.trace_path, "WKVT trace file");
    if (trace_required) {
        trace->required();
    }
    cmd->add_option("--alpha", f.alpha, "Observation window size in tokens")->capture_default_str();
    cmd->add_option("--omega", f.omega, "Review window size in tokens")->capture_default_str();
    cmd->add_option("--p-agg", f.p_aggregation, "Top-p used for aggregation tasks (< omega)")->capture_default_str();
    cmd->add_option("--gamma", f.gamma, "Layers per group sharing one index set")->capture_default_str();
    cmd->add_option("--lambda", f.lambda, "Pyramid steepness (>= 1)")->capture_default_str();
    auto* budget = cmd->add_option("--budget", f.budget, "Model-wide token budget (sum over layers)");
    auto* per_layer = cmd->add_option("--kv-size-per-layer", f.kv_size_per_layer,
                                      "Per-layer KV size; the total budget is this times the layer count");
    budget->excludes(per_layer);
    cmd->add_option("--task", f.task, "localization, aggregation or auto")
        ->check(CLI::IsMember({"localization", "aggregation", "auto"}))
        ->capture_default_str();
    cmd->add_option("--prompt-file", f.prompt_file, "Prompt text for --task auto (defaults to the trace label)");
    cmd->add_option("--bytes-per-token", f.bytes_per_token,
                    "KV bytes per token per layer for accounting (0 = 2 * heads * head_dim * 4)");
}

CompressionConfig make_config(const ConfigFlags& f, const TraceDims& dims, std::optional<std::int64_t> default_per_layer = {}) {
    CompressionConfig c;
    c.alpha = f.alpha;
    c.omega = f.omega;
    c.p_aggregation = f.p_aggregation;
    c.gamma = f.gamma;
    c.lambda = f.lambda;
    c.task = parse_task_choice(f.task);
    if (f.budget) {
        c.b_total = *f.budget;
    } else if (f.kv_size_per_layer) {
        c.b_total = total_from_per_layer(*f.kv_size_per_layer, dims.layers);
    } else if (default_per_layer) {
        c.b_total = total_from_per_layer(*default_per_layer, dims.layers);
    } else {
        fail(ErrorKind::kValidation, "one of --budget or --kv-size-per-layer is required");
    }
    return c;
}

struct TaskResolution {
    TaskType task = TaskType::kLocalization;
    std::string source;  // "flag", "classifier" or "unused"
    std::optional<ClassifierDecision> decision;
};

// Policies other than WindowKV ignore the task, so a missing prompt is only
// an error when `needed` is set.
TaskResolution resolve_task(const CompressionConfig& config, const ConfigFlags& f, const AttentionTrace& trace,
                            bool needed = true) {
    TaskResolution r;
    if (config.task != TaskChoice::kAuto) {
        r.task = classify_or_override({}, config, HeuristicClassifier{});
        r.source = "flag";
        return r;
    }
    const std::string text = f.prompt_file.empty() ? trace.label() : read_text(f.prompt_file);
    if (text.empty() && !needed) {
        r.source = "unused";
        return r;
    }
    require(!text.empty(), ErrorKind::kValidation,
            "--task auto needs prompt text: the trace has no label; pass --prompt-file or an explicit --task");
    r.decision = HeuristicClassifier{}.classify(text);
    r.task = r.decision->task;
    r.source = "classifier";
    return r;
}

json task_json(const TaskResolution& r) {
    json j = {{"resolved", r.source == "unused" ? json(nullptr) : json(std::string(to_string(r.task)))},
              {"source", r.source}};
    j["decision"] = r.decision ? json(*r.decision) : json(nullptr);
    return j;
}

std::vector<TokenScores> all_layer_scores(const AttentionTrace& trace, std::uint32_t alpha) {
    std::vector<TokenScores> scores;
    for (std::uint32_t l = 0; l < trace.dims().layers; ++l) {
        scores.push_back(score_layer(trace, l, alpha));
    }
    return scores;
}

struct PolicyRun {
    PolicyResult result;
    MemoryReport memory;
    std::vector<std::optional<double>> mass;
    double wall_ms = 0.0;
};

PolicyRun run_policy(const CompressionPolicy& policy, const AttentionTrace& trace, const CompressionConfig& config,
                     TaskType task, std::span<const TokenScores> layer_scores, std::uint64_t bytes_per_token) {
    PolicyRun run;
    const auto start = Clock::now();
    run.result = policy.compress(trace, config, task);
    run.wall_ms = elapsed_ms(start);
    run.memory = memory_report(compact(trace.dims(), run.result, bytes_per_token), trace.dims());
    run.mass = retained_attention_mass(layer_scores, run.result);
    return run;
}

json policy_run_json(const PolicyRun& run) {
    const auto mean = mean_mass(run.mass);
    return {{"policy", run.result.policy},
            {"memory", run.memory},
            {"retained_attention_mass", mass_json(run.mass)},
            {"mean_retained_attention_mass", mean ? json(*mean) : json(nullptr)},
            {"selection_invocations", run.result.selection_invocations},
            {"wall_ms", run.wall_ms},
            {"notes", run.result.notes}};
}

json report_header(std::string_view command, const AttentionTrace& trace, const std::string& trace_path) {
    json meta = trace_metadata_json(trace);
    meta.erase("schema_version");
    meta["path"] = trace_path;
    return {{"schema_version", kReportSchemaVersion}, {"command", std::string(command)}, {"trace", meta}};
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct GenTraceFlags {
    std::uint32_t layers = 0;
    std::uint32_t heads = 1;
    std::uint32_t tokens = 0;
    std::uint32_t head_dim = 8;
    std::string profile = "uniform";
    std::uint64_t seed = 0;
    std::string output;
    std::string regions;
    std::uint32_t hotspots = 1;
    std::uint32_t hotspot_len = 0;
    double hotspot_mass = 0.9;
    double sink_mass = 0.4;
    std::string label;
    std::string label_file;
};

int cmd_gen_trace(const GenTraceFlags& f, std::ostream& out) {
    const TraceDims dims{f.layers, f.heads, f.tokens, f.head_dim};
    std::string label = f.label_file.empty() ? f.label : read_text(f.label_file);
    std::optional<AttentionTrace> trace;
    if (f.profile == "random-qk") {
        const auto qk = generate_random_qk(dims, f.seed);
        trace = label.empty() ? qk : AttentionTrace::from_qk(dims, {qk.payload().begin(), qk.payload().end()}, qk.meta(), label);
    } else {
        SyntheticOptions options;
        options.profile = parse_profile(f.profile);
        options.hotspots = parse_regions(f.regions);
        options.hotspot_count = f.hotspots;
        options.hotspot_len = f.hotspot_len;
        options.hotspot_mass = f.hotspot_mass;
        options.sink_mass = f.sink_mass;
        options.label = std::move(label);
        trace = generate_synthetic(dims, f.seed, options);
    }
    save_trace(f.output, *trace);
    json j = trace_metadata_json(*trace);
    j["path"] = f.output;
    j["bytes"] = fs::file_size(f.output);
    out << j.dump(2) << "\n";
    return kExitOk;
}

struct CompressFlags {
    ConfigFlags config;
    std::string policy;
    std::string result_path;
    std::string report_path;
};

int cmd_compress(const CompressFlags& f, std::ostream& out) {
    const auto start = Clock::now();
    const auto trace = load_trace(f.config.trace_path);
    const auto config = make_config(f.config, trace.dims());
    const auto policy = make_policy(f.policy);
    const auto task = resolve_task(config, f.config, trace, policy->name() == "windowkv");
    const auto scores = all_layer_scores(trace, config.alpha);
    const auto run = run_policy(*policy, trace, config, task.task, scores, f.config.bytes_per_token);

    json report = report_header("compress", trace, f.config.trace_path);
    report["config"] = config;
    report["task"] = task_json(task);
    report["policies"] = json::array({policy_run_json(run)});
    report["outputs"] = {{"result", f.result_path.empty() ? json(nullptr) : json(f.result_path)},
                         {"report", f.report_path.empty() ? json(nullptr) : json(f.report_path)}};
    if (!f.result_path.empty()) {
        write_json(f.result_path, json(run.result));
    }
    report["timings"] = {{"policy_ms", run.wall_ms}, {"total_ms", elapsed_ms(start)}};
    if (!f.report_path.empty()) {
        write_json(f.report_path, report);
    }
    out << report.dump(2) << "\n";
    return kExitOk;
}

struct SimilarityFlags {
    ConfigFlags config;
    std::string out_dir;
    bool shared = false;
};

int cmd_similarity(const SimilarityFlags& f, std::ostream& out) {
    const auto trace = load_trace(f.config.trace_path);
    const auto config = make_config(f.config, trace.dims());
    const auto task = resolve_task(config, f.config, trace);
    const auto grouping = build_grouping(trace.dims().layers, config.gamma);
    const auto result = windowkv_compress(trace, config, task.task,
                                          f.shared ? SelectionMode::kShared : SelectionMode::kIndependent);
    const auto heatmaps = similarity_heatmap(result.layers, grouping);
    const auto summary = summarize_similarity(result.layers, grouping);

    std::error_code ec;
    fs::create_directories(f.out_dir, ec);
    require(!ec, ErrorKind::kFormat, "cannot create output directory '" + f.out_dir + "': " + ec.message());

    json groups = json::array();
    for (std::size_t g = 0; g < heatmaps.size(); ++g) {
        const auto& m = heatmaps[g];
        const fs::path csv = fs::path(f.out_dir) / ("group_" + std::to_string(g) + ".csv");
        write_text(csv, heatmap_csv(m));
        json rows = json::array();
        for (std::uint32_t r = 0; r < m.size(); ++r) {
            rows.push_back(std::vector<double>(m.values.begin() + std::size_t{r} * m.size(),
                                               m.values.begin() + std::size_t{r + 1} * m.size()));
        }
        groups.push_back({{"group", g}, {"layers", {m.layers.begin, m.layers.end}}, {"csv", csv.string()}, {"matrix", rows}});
    }
    json heatmap_doc = {{"schema_version", kReportSchemaVersion}, {"groups", groups}};
    const fs::path heatmap_path = fs::path(f.out_dir) / "heatmaps.json";
    write_json(heatmap_path, heatmap_doc);

    json doc = report_header("similarity", trace, f.config.trace_path);
    doc["config"] = config;
    doc["task"] = task_json(task);
    doc["mode"] = f.shared ? "shared" : "independent";
    doc["selection_invocations"] = result.selection_invocations;
    doc["summary"] = summary;
    json csvs = json::array();
    for (const auto& g : groups) {
        csvs.push_back(g["csv"]);
    }
    doc["outputs"] = {{"heatmap_csv", csvs}, {"heatmap_json", heatmap_path.string()},
                      {"summary", (fs::path(f.out_dir) / "summary.json").string()}};
    write_json(fs::path(f.out_dir) / "summary.json", doc);
    out << doc.dump(2) << "\n";
    return kExitOk;
}

struct CompareFlags {
    ConfigFlags config;
    std::string csv_path;
    std::string json_path;
};

std::string render_table(const json& rows) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%-10s %12s %12s %12s %12s\n", "policy", "mem_ratio", "mean_mass", "selections",
                  "wall_ms");
    os << line;
    for (const auto& r : rows) {
        const std::string mass = r["mean_mass"].is_null() ? "n/a" : std::to_string(r["mean_mass"].get<double>());
        std::snprintf(line, sizeof(line), "%-10s %12.6f %12s %12llu %12.3f\n", r["policy"].get<std::string>().c_str(),
                      r["memory_ratio"].get<double>(), mass.c_str(),
                      static_cast<unsigned long long>(r["selection_invocations"].get<std::uint64_t>()),
                      r["wall_ms"].get<double>());
        os << line;
    }
    return os.str();
}

std::string rows_csv(const json& rows) {
    std::string csv = "policy,memory_ratio,mean_mass,selection_invocations,wall_ms\n";
    char buf[64];
    for (const auto& r : rows) {
        csv += r["policy"].get<std::string>();
        std::snprintf(buf, sizeof(buf), ",%.6f,", r["memory_ratio"].get<double>());
        csv += buf;
        if (!r["mean_mass"].is_null()) {
            std::snprintf(buf, sizeof(buf), "%.6f", r["mean_mass"].get<double>());
            csv += buf;
        }
        std::snprintf(buf, sizeof(buf), ",%llu,%.3f\n",
                      static_cast<unsigned long long>(r["selection_invocations"].get<std::uint64_t>()),
                      r["wall_ms"].get<double>());
        csv += buf;
    }
    return csv;
}

int cmd_compare(const CompareFlags& f, std::ostream& out) {
    const auto trace = load_trace(f.config.trace_path);
    const auto config = make_config(f.config, trace.dims());
    const auto task = resolve_task(config, f.config, trace);
    const auto scores = all_layer_scores(trace, config.alpha);

    json rows = json::array();
    json details = json::array();
    for (std::string_view name : policy_names()) {
        std::optional<PolicyRun> attempt;
        try {
            attempt = run_policy(*make_policy(name), trace, config, task.task, scores, f.config.bytes_per_token);
        } catch (const Error& e) {
            throw Error(e.kind(), std::string(name) + ": " + e.what());
        }
        const PolicyRun& run = *attempt;
        const auto mean = mean_mass(run.mass);
        rows.push_back({{"policy", run.result.policy},
                        {"memory_ratio", run.memory.ratio},
                        {"mean_mass", mean ? json(*mean) : json(nullptr)},
                        {"selection_invocations", run.result.selection_invocations},
                        {"wall_ms", run.wall_ms}});
        details.push_back(policy_run_json(run));
    }
    json doc = report_header("compare", trace, f.config.trace_path);
    doc["config"] = config;
    doc["task"] = task_json(task);
    doc["rows"] = rows;
    doc["policies"] = details;
    if (!f.csv_path.empty()) {
        write_text(f.csv_path, rows_csv(rows));
    }
    if (!f.json_path.empty()) {
        write_json(f.json_path, doc);
    }
    out << render_table(rows);
    return kExitOk;
}

struct BenchFlags {
    ConfigFlags config;
    std::uint32_t repetitions = 10;
    std::uint32_t layers = 32;
    std::uint32_t heads = 2;
    std::uint32_t tokens = 4096;
    std::uint32_t head_dim = 32;
    std::uint64_t seed = 0;
    std::string output;
};

int cmd_bench(const BenchFlags& f, std::ostream& out) {
    const auto trace = f.config.trace_path.empty()
                           ? generate_random_qk({f.layers, f.heads, f.tokens, f.head_dim}, f.seed)
                           : load_trace(f.config.trace_path);
    const auto config = make_config(f.config, trace.dims(), 512);
    const auto task = resolve_task(config, f.config, trace);
    const auto bench = bench_selection(trace, config, task.task, f.repetitions);

    json doc = report_header("bench", trace, f.config.trace_path);
    doc["config"] = config;
    doc["task"] = task_json(task);
    doc["bench"] = bench;
    doc["sharing_speedup"] = bench.shared.median_ms > 0.0 ? json(bench.independent.median_ms / bench.shared.median_ms)
                                                          : json(nullptr);
    if (!f.output.empty()) {
        write_json(f.output, doc);
    }
    out << doc.dump(2) << "\n";
    return kExitOk;
}

int cmd_classify(const std::string& input, std::ostream& out) {
    std::string text;
    if (input.empty() || input == "-") {
        text.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
    } else {
        text = read_text(input);
    }
    out << json(HeuristicClassifier{}.classify(text)).dump(2) << "\n";
    return kExitOk;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kValidation:
        case ErrorKind::kOutOfRange: return kExitValidation;
        case ErrorKind::kFormat: return kExitIo;
        case ErrorKind::kInfeasibleBudget: return kExitInfeasibleBudget;
    }
    return kExitFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"WindowKV KV-cache compression engine over attention traces", "windowkv"};
    app.require_subcommand(1);

    GenTraceFlags gen;
    auto* gen_cmd = app.add_subcommand("gen-trace", "Generate a synthetic WKVT trace");
    gen_cmd->add_option("--layers", gen.layers, "Layer count")->required();
    gen_cmd->add_option("--heads", gen.heads, "Heads per layer")->capture_default_str();
    gen_cmd->add_option("--tokens", gen.tokens, "Context length n")->required();
    gen_cmd->add_option("--head-dim", gen.head_dim, "Key dimension d_k")->capture_default_str();
    gen_cmd->add_option("--profile", gen.profile, "uniform, sink, hotspot, layered-sparsity or random-qk")
        ->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
    gen_cmd->add_option("-o,--output", gen.output, "Output trace path")->required();
    gen_cmd->add_option("--regions", gen.regions, "Explicit hotspot regions, e.g. 32-64;100-140");
    gen_cmd->add_option("--hotspots", gen.hotspots, "Number of hotspot regions drawn from the seed")->capture_default_str();
    gen_cmd->add_option("--hotspot-len", gen.hotspot_len, "Hotspot region length (0 = n/16)")->capture_default_str();
    gen_cmd->add_option("--hotspot-mass", gen.hotspot_mass, "Row mass placed on hotspot regions")->capture_default_str();
    gen_cmd->add_option("--sink-mass", gen.sink_mass, "Row mass placed on token 0 (sink profile)")->capture_default_str();
    auto* label_opt = gen_cmd->add_option("--label", gen.label, "Task descriptor stored with the trace");
    gen_cmd->add_option("--label-file", gen.label_file, "Read the task descriptor from a file")->excludes(label_opt);

    CompressFlags compress;
    auto* compress_cmd = app.add_subcommand("compress", "Run one policy on a trace and report memory and mass");
    add_config_flags(compress_cmd, compress.config);
    compress_cmd->add_option("--policy", compress.policy, "windowkv, slm, h2o, pkv or fullkv")
        ->required()
        ->check(CLI::IsMember({"windowkv", "slm", "h2o", "pkv", "fullkv"}));
    compress_cmd->add_option("--result", compress.result_path, "Write the PolicyResult JSON here");
    compress_cmd->add_option("--report", compress.report_path, "Write the run report JSON here");

    SimilarityFlags similarity;
    auto* similarity_cmd =
        app.add_subcommand("similarity", "Jaccard similarity of per-layer retained indices within groups");
    add_config_flags(similarity_cmd, similarity.config);
    similarity_cmd->add_option("--out-dir", similarity.out_dir, "Directory for heatmap CSV/JSON files")->required();
    similarity_cmd->add_flag("--shared", similarity.shared, "Use the shared (production) index sets instead");

    CompareFlags compare;
    auto* compare_cmd = app.add_subcommand("compare", "Run every policy at one budget and tabulate");
    add_config_flags(compare_cmd, compare.config);
    compare_cmd->add_option("--csv", compare.csv_path, "Write comparison rows as CSV");
    compare_cmd->add_option("--json", compare.json_path, "Write the comparison report as JSON");

    BenchFlags bench;
    auto* bench_cmd = app.add_subcommand("bench", "Time selection with and without intra-group sharing");
    add_config_flags(bench_cmd, bench.config, false);
    bench_cmd->add_option("--repetitions", bench.repetitions, "Timed runs per mode")->capture_default_str();
    bench_cmd->add_option("--layers", bench.layers, "Generated trace layers (without --trace)")->capture_default_str();
    bench_cmd->add_option("--heads", bench.heads, "Generated trace heads")->capture_default_str();
    bench_cmd->add_option("--tokens", bench.tokens, "Generated trace tokens")->capture_default_str();
    bench_cmd->add_option("--head-dim", bench.head_dim, "Generated trace d_k")->capture_default_str();
    bench_cmd->add_option("--seed", bench.seed, "Generated trace seed")->capture_default_str();
    bench_cmd->add_option("-o,--output", bench.output, "Write the timing JSON here");

    std::string classify_input;
    auto* classify_cmd = app.add_subcommand("classify", "Classify a prompt as localization or aggregation");
    classify_cmd->add_option("--input", classify_input, "Prompt text file ('-' or omitted reads stdin)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*gen_cmd) return cmd_gen_trace(gen, out);
        if (*compress_cmd) return cmd_compress(compress, out);
        if (*similarity_cmd) return cmd_similarity(similarity, out);
        if (*compare_cmd) return cmd_compare(compare, out);
        if (*bench_cmd) {
            if (bench.config.task == "auto" && bench.config.prompt_file.empty() && bench.config.trace_path.empty()) {
                bench.config.task = "localization";
            }
            return cmd_bench(bench, out);
        }
        if (*classify_cmd) return cmd_classify(classify_input, out);
    } catch (const Error& e) {
        err << "windowkv: " << to_string(e.kind()) << " error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "windowkv: io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "windowkv: internal error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace windowkv::cli
