// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "windowkv/grouping.hpp"

#include <cstdio>

#include "windowkv/error.hpp"

namespace windowkv {

LayerGrouping build_grouping(std::uint32_t layers, std::uint32_t gamma) {
    require(gamma >= 1, ErrorKind::kValidation, "gamma must be at least 1");
    require(layers >= 1 && layers % gamma == 0, ErrorKind::kValidation,
            "gamma (" + std::to_string(gamma) + ") does not divide the layer count (" + std::to_string(layers) + ")");
    LayerGrouping grouping{layers, gamma, {}};
    for (std::uint32_t begin = 0; begin < layers; begin += gamma) {
        grouping.groups.push_back({begin, begin + gamma});
    }
    return grouping;
}

std::vector<RetainedIndexSet> share_indices(const LayerRange& group, const RetainedIndexSet& first_layer_indices) {
    require(first_layer_indices.layer == group.begin, ErrorKind::kValidation,
            "shared indices must come from the group's first layer");
    std::vector<RetainedIndexSet> out;
    out.reserve(group.size());
    for (std::uint32_t layer = group.begin; layer < group.end; ++layer) {
        out.push_back({layer, first_layer_indices.indices});
    }
    return out;
}

double jaccard(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    require(!a.empty() || !b.empty(), ErrorKind::kValidation, "jaccard of two empty sets is undefined");
    std::size_t common = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::vector<JaccardMatrix> similarity_heatmap(std::span<const RetainedIndexSet> per_layer,
                                              const LayerGrouping& grouping) {
    require(per_layer.size() == grouping.layers, ErrorKind::kValidation, "need exactly one index set per layer");
    std::vector<JaccardMatrix> out;
    for (const auto& group : grouping.groups) {
        JaccardMatrix m{group, std::vector<double>(std::size_t{group.size()} * group.size(), 1.0)};
        for (std::uint32_t r = 0; r < group.size(); ++r) {
            for (std::uint32_t c = r + 1; c < group.size(); ++c) {
                const double j = jaccard(per_layer[group.begin + r].indices, per_layer[group.begin + c].indices);
                m.values[std::size_t{r} * group.size() + c] = j;
                m.values[std::size_t{c} * group.size() + r] = j;
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

SimilaritySummary summarize_similarity(std::span<const RetainedIndexSet> per_layer, const LayerGrouping& grouping) {
    require(per_layer.size() == grouping.layers, ErrorKind::kValidation, "need exactly one index set per layer");
    SimilaritySummary s;
    double intra = 0.0;
    double cross = 0.0;
    for (std::uint32_t a = 0; a < grouping.layers; ++a) {
        for (std::uint32_t b = a + 1; b < grouping.layers; ++b) {
            const double j = jaccard(per_layer[a].indices, per_layer[b].indices);
            if (grouping.group_of(a) == grouping.group_of(b)) {
                intra += j;
                ++s.intra_pairs;
            } else {
                cross += j;
                ++s.cross_pairs;
            }
        }
    }
    s.intra_group_mean = s.intra_pairs ? intra / static_cast<double>(s.intra_pairs) : 0.0;
    s.cross_group_mean = s.cross_pairs ? cross / static_cast<double>(s.cross_pairs) : 0.0;
    s.difference = s.intra_group_mean - s.cross_group_mean;
    return s;
}

std::string heatmap_csv(const JaccardMatrix& matrix) {
    std::string out;
    char buf[32];
    for (std::uint32_t r = 0; r < matrix.size(); ++r) {
        for (std::uint32_t c = 0; c < matrix.size(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.6f", matrix.at(r, c));
            if (c > 0) {
                out += ',';
            }
            out += buf;
        }
        out += '\n';
    }
    return out;
}

}  // namespace windowkv
