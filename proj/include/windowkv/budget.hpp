// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace windowkv {

inline constexpr double kDefaultPyramidLambda = 14.0;

/**
 * Pyramid budget allocation over layer groups.
 *
 * The top group receives b_total / (lambda * H), the bottom group the mirror
 * amount 2 * b_total / H minus that, and the groups in between interpolate
 * linearly. lambda = 1 gives a flat allocation; larger lambda steepens it.
 * Index 0 is the bottom (first) group.
 */
std::vector<double> group_budget_targets(std::int64_t b_total, std::uint32_t num_groups, double lambda);

/// Integer group budgets summing to b_total exactly. Targets are floored and the
/// leftover units go to the largest fractional parts, so every budget is within
/// one token of its target and the sequence stays nonincreasing.
std::vector<std::int64_t> allocate_group_budgets(std::int64_t b_total, std::uint32_t num_groups, double lambda);

/// Splits each group budget evenly over its gamma layers, handing the
/// remainder to the earliest layers of the group.
std::vector<std::int64_t> distribute_to_layers(std::span<const std::int64_t> group_budgets, std::uint32_t gamma);

struct BudgetPlan {
    std::int64_t b_total = 0;
    std::uint32_t num_groups = 0;
    std::uint32_t gamma = 0;
    double lambda = kDefaultPyramidLambda;
    std::vector<std::int64_t> group_budgets;
    std::vector<std::int64_t> layer_budgets;
};

/// Builds the full plan for `layers` layers split into groups of `gamma`.
/// Throws kValidation when gamma does not divide layers and kInfeasibleBudget
/// when any layer budget falls below `alpha`.
BudgetPlan plan_budget(std::int64_t b_total, std::uint32_t layers, std::uint32_t gamma, double lambda,
                       std::uint32_t alpha);

/// Converts a per-layer "KV size" into the model-wide total used here.
std::int64_t total_from_per_layer(std::int64_t kv_size_per_layer, std::uint32_t layers);

}  // namespace windowkv
