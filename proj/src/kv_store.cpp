// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "windowkv/kv_store.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "windowkv/error.hpp"

namespace windowkv {

std::uint64_t default_bytes_per_token_per_layer(const TraceDims& dims) {
    return 2ull * dims.heads * dims.head_dim * sizeof(float);
}

SimulatedKVCache::SimulatedKVCache(std::vector<std::vector<KvEntry>> layers, std::uint64_t bytes_per_token_per_layer)
    : m_layers(std::move(layers)), m_bytes_per_token(bytes_per_token_per_layer) {}

std::uint64_t SimulatedKVCache::total_entries() const noexcept {
    std::uint64_t total = 0;
    for (const auto& l : m_layers) {
        total += l.size();
    }
    return total;
}

SimulatedKVCache compact(const TraceDims& dims, const PolicyResult& result, std::uint64_t bytes_per_token_per_layer) {
    require(result.layers.size() == dims.layers, ErrorKind::kValidation,
            "policy result has " + std::to_string(result.layers.size()) + " layers, trace has " +
                std::to_string(dims.layers));
    std::vector<std::vector<KvEntry>> layers(dims.layers);
    for (std::uint32_t l = 0; l < dims.layers; ++l) {
        std::vector<std::uint32_t> positions = result.layers[l].indices;
        std::sort(positions.begin(), positions.end());
        require(std::adjacent_find(positions.begin(), positions.end()) == positions.end(), ErrorKind::kValidation,
                "duplicate retained index in layer " + std::to_string(l));
        require(positions.empty() || positions.back() < dims.tokens, ErrorKind::kOutOfRange,
                "retained index out of range in layer " + std::to_string(l));
        layers[l].reserve(positions.size());
        for (std::uint32_t pos : positions) {
            layers[l].push_back({pos, (std::uint64_t{l} << 32) | pos});
        }
    }
    return SimulatedKVCache(std::move(layers), bytes_per_token_per_layer ? bytes_per_token_per_layer
                                                                         : default_bytes_per_token_per_layer(dims));
}

MemoryReport memory_report(const SimulatedKVCache& cache, const TraceDims& dims) {
    const std::uint64_t per_token = cache.bytes_per_token_per_layer();
    MemoryReport report;
    report.full_bytes = std::uint64_t{dims.layers} * dims.tokens * per_token;
    for (std::uint32_t l = 0; l < cache.num_layers(); ++l) {
        const std::uint64_t retained = cache.entry_count(l);
        report.per_layer.push_back({l, retained, retained * per_token});
        report.compressed_bytes += retained * per_token;
    }
    report.ratio = report.full_bytes ? static_cast<double>(report.compressed_bytes) / static_cast<double>(report.full_bytes)
                                     : 0.0;
    return report;
}

std::vector<std::optional<double>> retained_attention_mass(std::span<const TokenScores> layer_scores,
                                                           const PolicyResult& result) {
    require(layer_scores.size() == result.layers.size(), ErrorKind::kValidation,
            "need token scores for every layer of the result");
    std::vector<std::optional<double>> out;
    out.reserve(layer_scores.size());
    for (std::size_t l = 0; l < layer_scores.size(); ++l) {
        const auto& scores = layer_scores[l].scores;
        const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
        if (total <= 0.0) {
            out.emplace_back(std::nullopt);
            continue;
        }
        double kept = 0.0;
        for (std::uint32_t pos : result.layers[l].indices) {
            if (pos < scores.size()) {
                kept += scores[pos];
            }
        }
        out.emplace_back(std::min(1.0, kept / total));
    }
    return out;
}

std::vector<std::optional<double>> retained_attention_mass(const AttentionTrace& trace, const PolicyResult& result,
                                                           std::uint32_t alpha) {
    std::vector<TokenScores> scores;
    scores.reserve(trace.dims().layers);
    for (std::uint32_t l = 0; l < trace.dims().layers; ++l) {
        scores.push_back(score_layer(trace, l, alpha));
    }
    return retained_attention_mass(scores, result);
}

std::optional<double> mean_mass(std::span<const std::optional<double>> per_layer) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& m : per_layer) {
        if (m) {
            sum += *m;
            ++count;
        }
    }
    if (count == 0) {
        return std::nullopt;
    }
    return sum / static_cast<double>(count);
}

PolicyResult random_retention(const TraceDims& dims, const PolicyResult& like, std::uint32_t alpha, std::uint64_t seed) {
    require(like.layers.size() == dims.layers, ErrorKind::kValidation, "layer count mismatch");
    const std::uint32_t review_len = dims.tokens - alpha;
    std::mt19937_64 rng(seed);
    PolicyResult out;
    out.policy = "random";
    out.config = like.config;
    out.layer_budgets = like.layer_budgets;
    std::vector<std::uint32_t> pool(review_len);
    for (std::uint32_t l = 0; l < dims.layers; ++l) {
        const auto review_count = static_cast<std::size_t>(
            std::count_if(like.layers[l].indices.begin(), like.layers[l].indices.end(),
                          [&](std::uint32_t pos) { return pos < review_len; }));
        std::iota(pool.begin(), pool.end(), 0u);
        std::vector<std::uint32_t> picked;
        std::sample(pool.begin(), pool.end(), std::back_inserter(picked), review_count, rng);
        for (std::uint32_t pos = review_len; pos < dims.tokens; ++pos) {
            picked.push_back(pos);
        }
        out.layers.push_back({l, std::move(picked)});
    }
    return out;
}

}  // namespace windowkv
