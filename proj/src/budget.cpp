// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "windowkv/budget.hpp"

#include <cmath>
#include <algorithm>
#include <numeric>

#include "windowkv/error.hpp"

namespace windowkv {

namespace {

void check_allocation_args(std::int64_t b_total, std::uint32_t num_groups, double lambda) {
    require(num_groups >= 1, ErrorKind::kValidation, "need at least one group");
    require(std::isfinite(lambda) && lambda >= 1.0, ErrorKind::kValidation, "lambda must be >= 1");
    require(b_total >= static_cast<std::int64_t>(num_groups), ErrorKind::kInfeasibleBudget,
            "total budget " + std::to_string(b_total) + " is smaller than the group count " +
                std::to_string(num_groups));
}

}  // namespace

std::vector<double> group_budget_targets(std::int64_t b_total, std::uint32_t num_groups, double lambda) {
    check_allocation_args(b_total, num_groups, lambda);
    const double total = static_cast<double>(b_total);
    if (num_groups == 1) {
        return {total};
    }
    const double h = num_groups;
    const double top = total / (lambda * h);
    const double bottom = 2.0 * total / h - top;
    const double step = (bottom - top) / (h - 1.0);
    std::vector<double> targets(num_groups);
    targets.front() = bottom;
    targets.back() = top;
    for (std::uint32_t g = 1; g + 1 < num_groups; ++g) {
        targets[g] = bottom - step * g;
    }
    return targets;
}

std::vector<std::int64_t> allocate_group_budgets(std::int64_t b_total, std::uint32_t num_groups, double lambda) {
    const auto targets = group_budget_targets(b_total, num_groups, lambda);
    std::vector<std::int64_t> budgets(num_groups);
    std::int64_t assigned = 0;
    for (std::uint32_t g = 0; g < num_groups; ++g) {
        budgets[g] = static_cast<std::int64_t>(std::floor(targets[g]));
        assigned += budgets[g];
    }
    // Largest remainder: leftover units go to the largest fractional parts,
    // lower (bottom) groups first on ties.
    std::vector<std::uint32_t> order(num_groups);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return targets[a] - std::floor(targets[a]) > targets[b] - std::floor(targets[b]);
    });
    for (std::size_t k = 0; assigned < b_total; ++k) {
        ++budgets[order[k % num_groups]];
        ++assigned;
    }
    return budgets;
}

std::vector<std::int64_t> distribute_to_layers(std::span<const std::int64_t> group_budgets, std::uint32_t gamma) {
    require(gamma >= 1, ErrorKind::kValidation, "gamma must be at least 1");
    std::vector<std::int64_t> layers;
    layers.reserve(group_budgets.size() * gamma);
    for (std::int64_t budget : group_budgets) {
        require(budget >= 0, ErrorKind::kInfeasibleBudget, "negative group budget");
        const std::int64_t base = budget / gamma;
        const std::int64_t extra = budget % gamma;
        for (std::uint32_t l = 0; l < gamma; ++l) {
            layers.push_back(base + (static_cast<std::int64_t>(l) < extra ? 1 : 0));
        }
    }
    return layers;
}

BudgetPlan plan_budget(std::int64_t b_total, std::uint32_t layers, std::uint32_t gamma, double lambda,
                       std::uint32_t alpha) {
    require(gamma >= 1, ErrorKind::kValidation, "gamma must be at least 1");
    require(layers >= 1 && layers % gamma == 0, ErrorKind::kValidation,
            "gamma (" + std::to_string(gamma) + ") does not divide the layer count (" + std::to_string(layers) + ")");
    BudgetPlan plan;
    plan.b_total = b_total;
    plan.num_groups = layers / gamma;
    plan.gamma = gamma;
    plan.lambda = lambda;
    plan.group_budgets = allocate_group_budgets(b_total, plan.num_groups, lambda);
    plan.layer_budgets = distribute_to_layers(plan.group_budgets, gamma);
    for (std::size_t l = 0; l < plan.layer_budgets.size(); ++l) {
        require(plan.layer_budgets[l] >= static_cast<std::int64_t>(alpha), ErrorKind::kInfeasibleBudget,
                "layer " + std::to_string(l) + " budget " + std::to_string(plan.layer_budgets[l]) +
                    " cannot hold the observation window of " + std::to_string(alpha) + " tokens");
    }
    return plan;
}

std::int64_t total_from_per_layer(std::int64_t kv_size_per_layer, std::uint32_t layers) {
    require(kv_size_per_layer >= 1, ErrorKind::kValidation, "per-layer KV size must be positive");
    return kv_size_per_layer * static_cast<std::int64_t>(layers);
}

}  // namespace windowkv
