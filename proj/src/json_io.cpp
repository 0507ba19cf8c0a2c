// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "windowkv/json_io.hpp"

namespace windowkv {

void to_json(nlohmann::json& j, const TraceDims& dims) {
    j = {{"layers", dims.layers}, {"heads", dims.heads}, {"tokens", dims.tokens}, {"head_dim", dims.head_dim}};
}

void to_json(nlohmann::json& j, const CompressionConfig& config) {
    j = {{"alpha", config.alpha},
         {"omega", config.omega},
         {"p_aggregation", config.p_aggregation},
         {"gamma", config.gamma},
         {"lambda", config.lambda},
         {"b_total", config.b_total},
         {"task", std::string(to_string(config.task))}};
}

void to_json(nlohmann::json& j, const PolicyResult& result) {
    j = nlohmann::json::object();
    j["schema_version"] = kReportSchemaVersion;
    j["policy"] = result.policy;
    j["config"] = result.config;
    j["task"] = result.task ? nlohmann::json(std::string(to_string(*result.task))) : nlohmann::json(nullptr);
    j["selection_invocations"] = result.selection_invocations;
    j["notes"] = result.notes;
    auto& layers = j["layers"] = nlohmann::json::array();
    for (std::size_t l = 0; l < result.layers.size(); ++l) {
        layers.push_back({{"layer", result.layers[l].layer},
                          {"budget", l < result.layer_budgets.size() ? result.layer_budgets[l] : 0},
                          {"count", result.layers[l].indices.size()},
                          {"indices", result.layers[l].indices}});
    }
}

void to_json(nlohmann::json& j, const MemoryReport& report) {
    j = {{"full_bytes", report.full_bytes}, {"compressed_bytes", report.compressed_bytes}, {"ratio", report.ratio}};
    auto& layers = j["per_layer"] = nlohmann::json::array();
    for (const auto& l : report.per_layer) {
        layers.push_back({{"layer", l.layer}, {"retained", l.retained}, {"bytes", l.bytes}});
    }
}

void to_json(nlohmann::json& j, const ClassifierDecision& decision) {
    j = {{"schema_version", kReportSchemaVersion},
         {"task", std::string(to_string(decision.task))},
         {"confidence", decision.confidence},
         {"matched_rules", decision.matched_rules},
         {"localization_votes", decision.localization_votes},
         {"aggregation_votes", decision.aggregation_votes}};
}

void to_json(nlohmann::json& j, const SimilaritySummary& summary) {
    j = {{"intra_group_mean", summary.intra_group_mean},
         {"cross_group_mean", summary.cross_group_mean},
         {"difference", summary.difference},
         {"intra_pairs", summary.intra_pairs},
         {"cross_pairs", summary.cross_pairs}};
}

void to_json(nlohmann::json& j, const TimingStats& stats) {
    j = {{"median_ms", stats.median_ms}, {"p90_ms", stats.p90_ms}, {"samples_ms", stats.samples_ms}};
}

void to_json(nlohmann::json& j, const SelectionBench& bench) {
    j = {{"repetitions", bench.repetitions},
         {"layers", bench.layers},
         {"num_groups", bench.num_groups},
         {"shared", {{"invocations", bench.shared_invocations}, {"timing", bench.shared}}},
         {"independent", {{"invocations", bench.independent_invocations}, {"timing", bench.independent}}}};
}

nlohmann::json trace_metadata_json(const AttentionTrace& trace) {
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    j["format_version"] = trace.meta().format_version;
    j["mode"] = trace.mode() == TraceMode::kAttn ? "attn" : "qk";
    j["dims"] = trace.dims();
    j["label"] = trace.label();
    j["rng_seed"] = trace.meta().rng_seed ? nlohmann::json(*trace.meta().rng_seed) : nlohmann::json(nullptr);
    j["generator_params"] = trace.meta().generator_params;
    return j;
}

nlohmann::json mass_json(std::span<const std::optional<double>> per_layer) {
    auto out = nlohmann::json::array();
    for (const auto& m : per_layer) {
        out.push_back(m ? nlohmann::json(*m) : nlohmann::json(nullptr));
    }
    return out;
}

}  // namespace windowkv
