// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "windowkv/budget.hpp"
#include "windowkv/grouping.hpp"
#include "windowkv/scoring.hpp"
#include "windowkv/trace.hpp"

namespace windowkv {

enum class TaskChoice { kLocalization, kAggregation, kAuto };

TaskChoice parse_task_choice(std::string_view name);
std::string_view to_string(TaskChoice choice) noexcept;

struct CompressionConfig {
    std::uint32_t alpha = 16;         // observation window tokens
    std::uint32_t omega = 8;          // review window tokens
    std::uint32_t p_aggregation = 4;  // top-p used for aggregation tasks, < omega
    std::uint32_t gamma = 8;          // layers per group
    double lambda = kDefaultPyramidLambda;
    std::int64_t b_total = 0;         // model-wide token budget
    TaskChoice task = TaskChoice::kAuto;
};

/// Checks the config against the trace dimensions that every policy shares:
/// 1 <= alpha < n, omega >= 1, p_aggregation >= 1, lambda >= 1 and
/// b_total >= layers * alpha. Policy-specific checks happen in each policy.
void validate_config(const CompressionConfig& config, const TraceDims& dims);

struct PolicyResult {
    std::string policy;
    CompressionConfig config;
    std::optional<TaskType> task;              // set by task-aware policies
    std::vector<std::int64_t> layer_budgets;   // planned budget per layer
    std::vector<RetainedIndexSet> layers;      // retained positions per layer
    std::uint64_t selection_invocations = 0;   // per-layer selection runs performed
    std::vector<std::string> notes;

    std::vector<std::size_t> retained_counts() const;
    std::size_t total_retained() const;
};

enum class SelectionMode {
    kShared,       // select once per group on its first layer, copy to the rest
    kIndependent,  // select on every layer with its own budget (validation/bench path)
};

/**
 * Window choice for one layer.
 *
 * Windows are visited in descending score order (lower index first on ties)
 * and every window that still fits the review budget is retained whole. If
 * budget remains afterwards, the best-ranked window not yet taken is truncated
 * to the remainder by dropping its lowest-scoring tokens.
 */
struct WindowSelection {
    std::vector<ReviewWindow> windows;           // full partition, 0-based in this vector
    std::vector<WindowScore> scores;             // parallel to windows
    std::vector<std::uint32_t> whole;            // positions in `windows` retained whole, ascending
    std::optional<std::uint32_t> truncated;      // position in `windows` retained partially
    std::vector<std::uint32_t> review_indices;   // retained review token positions, ascending
};

WindowSelection select_windows(const TokenScores& scores, std::uint32_t omega, std::uint32_t p,
                               std::int64_t review_budget);

/// Review positions [0, n - alpha) with the highest scores, ascending; ties to the lower index.
std::vector<std::uint32_t> top_k_positions(std::span<const double> scores, std::int64_t k);

PolicyResult windowkv_compress(const AttentionTrace& trace, const CompressionConfig& config, TaskType task,
                               SelectionMode mode = SelectionMode::kShared);
PolicyResult slm_compress(const AttentionTrace& trace, const CompressionConfig& config);
PolicyResult h2o_compress(const AttentionTrace& trace, const CompressionConfig& config);
PolicyResult pkv_compress(const AttentionTrace& trace, const CompressionConfig& config, TaskType task);
PolicyResult full_kv(const AttentionTrace& trace, const CompressionConfig& config = {});

/// H2O ranking signal: per review column, mean attention over the rows that
/// can see it (i >= j), averaged across heads.
std::vector<double> h2o_column_means(const AttentionTrace& trace, std::uint32_t layer, std::uint32_t alpha);

class CompressionPolicy {
public:
    virtual ~CompressionPolicy() = default;
    virtual std::string_view name() const noexcept = 0;
    virtual PolicyResult compress(const AttentionTrace& trace, const CompressionConfig& config,
                                  TaskType task) const = 0;
};

/// "windowkv", "slm", "h2o", "pkv" or "fullkv".
std::unique_ptr<CompressionPolicy> make_policy(std::string_view name);
std::span<const std::string_view> policy_names() noexcept;

}  // namespace windowkv
