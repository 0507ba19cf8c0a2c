// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "windowkv/policies.hpp"
#include "windowkv/scoring.hpp"
#include "windowkv/trace.hpp"

namespace windowkv {

/// K and V tensors, one float32 row per head and token.
std::uint64_t default_bytes_per_token_per_layer(const TraceDims& dims);

struct KvEntry {
    std::uint32_t position = 0;
    std::uint64_t handle = 0;  // opaque; stands in for the K/V rows of this token
};

/// Compacted cache: only retained entries, ascending by position per layer.
class SimulatedKVCache {
public:
    SimulatedKVCache(std::vector<std::vector<KvEntry>> layers, std::uint64_t bytes_per_token_per_layer);

    std::uint32_t num_layers() const noexcept { return static_cast<std::uint32_t>(m_layers.size()); }
    std::span<const KvEntry> layer(std::uint32_t l) const { return m_layers.at(l); }
    std::size_t entry_count(std::uint32_t l) const { return m_layers.at(l).size(); }
    std::uint64_t total_entries() const noexcept;
    std::uint64_t bytes_per_token_per_layer() const noexcept { return m_bytes_per_token; }
    std::uint64_t total_bytes() const noexcept { return total_entries() * m_bytes_per_token; }

private:
    std::vector<std::vector<KvEntry>> m_layers;
    std::uint64_t m_bytes_per_token;
};

/// Gathers the retained entries of every layer. Throws kOutOfRange for
/// positions >= n and kValidation for duplicate or layer-count mismatches.
/// bytes_per_token_per_layer = 0 selects the default.
SimulatedKVCache compact(const TraceDims& dims, const PolicyResult& result, std::uint64_t bytes_per_token_per_layer = 0);

struct LayerMemory {
    std::uint32_t layer = 0;
    std::uint64_t retained = 0;
    std::uint64_t bytes = 0;
};

struct MemoryReport {
    std::uint64_t full_bytes = 0;
    std::uint64_t compressed_bytes = 0;
    double ratio = 0.0;
    std::vector<LayerMemory> per_layer;
};

MemoryReport memory_report(const SimulatedKVCache& cache, const TraceDims& dims);

/// Share of each layer's observation-row attention over review columns that
/// lands on retained review columns. nullopt where that attention is zero.
std::vector<std::optional<double>> retained_attention_mass(std::span<const TokenScores> layer_scores,
                                                           const PolicyResult& result);
std::vector<std::optional<double>> retained_attention_mass(const AttentionTrace& trace, const PolicyResult& result,
                                                           std::uint32_t alpha);

/// Mean over the defined entries; nullopt when none are defined.
std::optional<double> mean_mass(std::span<const std::optional<double>> per_layer);

/// Same number of retained review tokens per layer as `like`, drawn uniformly
/// at random from the review context; the observation window is kept.
PolicyResult random_retention(const TraceDims& dims, const PolicyResult& like, std::uint32_t alpha, std::uint64_t seed);

}  // namespace windowkv
