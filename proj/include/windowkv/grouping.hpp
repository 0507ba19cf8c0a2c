// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace windowkv {

struct LayerRange {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;

    std::uint32_t size() const noexcept { return end - begin; }
    bool operator==(const LayerRange&) const = default;
};

/// Contiguous groups of gamma layers: [0, gamma), [gamma, 2 gamma), ...
struct LayerGrouping {
    std::uint32_t layers = 0;
    std::uint32_t gamma = 0;
    std::vector<LayerRange> groups;

    std::uint32_t num_groups() const noexcept { return static_cast<std::uint32_t>(groups.size()); }
    std::uint32_t group_of(std::uint32_t layer) const noexcept { return layer / gamma; }
};

/// Token positions kept for one layer, strictly increasing.
struct RetainedIndexSet {
    std::uint32_t layer = 0;
    std::vector<std::uint32_t> indices;

    bool operator==(const RetainedIndexSet&) const = default;
};

/// Throws kValidation unless 1 <= gamma and gamma divides layers.
LayerGrouping build_grouping(std::uint32_t layers, std::uint32_t gamma);

/// Copies the first layer's indices to every layer of the group.
std::vector<RetainedIndexSet> share_indices(const LayerRange& group, const RetainedIndexSet& first_layer_indices);

/// |a n b| / |a u b| over sorted index vectors. Throws kValidation when both are empty.
double jaccard(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// gamma x gamma Jaccard matrix of one group, row-major.
struct JaccardMatrix {
    LayerRange layers;
    std::vector<double> values;

    std::uint32_t size() const noexcept { return layers.size(); }
    double at(std::uint32_t r, std::uint32_t c) const { return values[std::size_t{r} * size() + c]; }
};

/// One matrix per group from per-layer index sets (one set per layer, in layer order).
std::vector<JaccardMatrix> similarity_heatmap(std::span<const RetainedIndexSet> per_layer, const LayerGrouping& grouping);

struct SimilaritySummary {
    double intra_group_mean = 0.0;  // distinct layer pairs within a group
    double cross_group_mean = 0.0;  // layer pairs from different groups
    double difference = 0.0;        // intra - cross
    std::size_t intra_pairs = 0;
    std::size_t cross_pairs = 0;
};

/// Means are 0 with a pair count of 0 when no such pairs exist.
SimilaritySummary summarize_similarity(std::span<const RetainedIndexSet> per_layer, const LayerGrouping& grouping);

/// gamma rows of gamma comma-separated values with 6 decimals, newline-terminated.
std::string heatmap_csv(const JaccardMatrix& matrix);

}  // namespace windowkv
