// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>

#include <nlohmann/json.hpp>

#include "windowkv/bench.hpp"
#include "windowkv/classifier.hpp"
#include "windowkv/grouping.hpp"
#include "windowkv/kv_store.hpp"
#include "windowkv/policies.hpp"
#include "windowkv/trace.hpp"

namespace windowkv {

/// Carried by every JSON document the CLI emits; see schemas/.
inline constexpr int kReportSchemaVersion = 1;

void to_json(nlohmann::json& j, const TraceDims& dims);
void to_json(nlohmann::json& j, const CompressionConfig& config);
void to_json(nlohmann::json& j, const PolicyResult& result);
void to_json(nlohmann::json& j, const MemoryReport& report);
void to_json(nlohmann::json& j, const ClassifierDecision& decision);
void to_json(nlohmann::json& j, const SimilaritySummary& summary);
void to_json(nlohmann::json& j, const TimingStats& stats);
void to_json(nlohmann::json& j, const SelectionBench& bench);

/// Trace header and metadata, without the payload.
nlohmann::json trace_metadata_json(const AttentionTrace& trace);

/// Per-layer masses with undefined layers as null.
nlohmann::json mass_json(std::span<const std::optional<double>> per_layer);

}  // namespace windowkv
