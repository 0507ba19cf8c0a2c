// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "windowkv/policies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "windowkv/error.hpp"

namespace windowkv {

namespace {

// Review positions (ascending, all < n - alpha) followed by the observation window.
RetainedIndexSet with_observation(std::uint32_t layer, std::vector<std::uint32_t> review, std::uint32_t n,
                                  std::uint32_t alpha) {
    for (std::uint32_t pos = n - alpha; pos < n; ++pos) {
        review.push_back(pos);
    }
    return {layer, std::move(review)};
}

std::int64_t uniform_layer_budget(const CompressionConfig& config, const TraceDims& dims) {
    require(config.b_total % dims.layers == 0, ErrorKind::kValidation,
            "total budget " + std::to_string(config.b_total) + " does not split evenly over " +
                std::to_string(dims.layers) + " layers");
    const std::int64_t b = config.b_total / dims.layers;
    require(b >= config.alpha, ErrorKind::kInfeasibleBudget,
            "per-layer budget " + std::to_string(b) + " cannot hold the observation window");
    return b;
}

PolicyResult make_result(std::string_view name, const CompressionConfig& config) {
    PolicyResult r;
    r.policy = std::string(name);
    r.config = config;
    return r;
}

}  // namespace

TaskChoice parse_task_choice(std::string_view name) {
    if (name == "auto") return TaskChoice::kAuto;
    return parse_task(name) == TaskType::kLocalization ? TaskChoice::kLocalization : TaskChoice::kAggregation;
}

std::string_view to_string(TaskChoice choice) noexcept {
    switch (choice) {
        case TaskChoice::kLocalization: return "localization";
        case TaskChoice::kAggregation: return "aggregation";
        case TaskChoice::kAuto: return "auto";
    }
    return "auto";
}

void validate_config(const CompressionConfig& config, const TraceDims& dims) {
    validate_dims(dims);
    require(config.alpha >= 1 && config.alpha < dims.tokens, ErrorKind::kValidation,
            "alpha must satisfy 1 <= alpha < n (alpha=" + std::to_string(config.alpha) +
                ", n=" + std::to_string(dims.tokens) + ")");
    require(config.omega >= 1, ErrorKind::kValidation, "omega must be at least 1");
    require(config.p_aggregation >= 1, ErrorKind::kValidation, "p_aggregation must be at least 1");
    require(config.gamma >= 1, ErrorKind::kValidation, "gamma must be at least 1");
    require(std::isfinite(config.lambda) && config.lambda >= 1.0, ErrorKind::kValidation, "lambda must be >= 1");
    require(config.b_total >= static_cast<std::int64_t>(dims.layers) * config.alpha, ErrorKind::kInfeasibleBudget,
            "total budget " + std::to_string(config.b_total) + " cannot give every layer its observation window (" +
                std::to_string(dims.layers) + " x " + std::to_string(config.alpha) + ")");
}

std::vector<std::size_t> PolicyResult::retained_counts() const {
    std::vector<std::size_t> counts;
    counts.reserve(layers.size());
    for (const auto& l : layers) {
        counts.push_back(l.indices.size());
    }
    return counts;
}

std::size_t PolicyResult::total_retained() const {
    std::size_t total = 0;
    for (const auto& l : layers) {
        total += l.indices.size();
    }
    return total;
}

std::vector<std::uint32_t> top_k_positions(std::span<const double> scores, std::int64_t k) {
    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    const auto take = static_cast<std::size_t>(std::clamp<std::int64_t>(k, 0, static_cast<std::int64_t>(order.size())));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                          return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                      });
    order.resize(take);
    std::sort(order.begin(), order.end());
    return order;
}

WindowSelection select_windows(const TokenScores& scores, std::uint32_t omega, std::uint32_t p,
                               std::int64_t review_budget) {
    WindowSelection sel;
    sel.windows = partition_windows(scores.review_len(), omega);
    sel.scores.reserve(sel.windows.size());
    for (const auto& w : sel.windows) {
        sel.scores.push_back(score_window(w, scores, p));
    }

    std::vector<std::uint32_t> order(sel.windows.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return sel.scores[a].score > sel.scores[b].score; });

    std::vector<char> taken(sel.windows.size(), 0);
    std::int64_t remaining = std::max<std::int64_t>(review_budget, 0);
    for (std::uint32_t k : order) {
        if (sel.windows[k].len <= remaining) {
            taken[k] = 1;
            remaining -= sel.windows[k].len;
        }
    }
    std::vector<std::uint32_t> partial;
    if (remaining > 0) {
        for (std::uint32_t k : order) {
            if (!taken[k]) {
                sel.truncated = k;
                partial = top_tokens(sel.windows[k], scores, static_cast<std::uint32_t>(remaining));
                std::sort(partial.begin(), partial.end());
                break;
            }
        }
    }

    for (std::uint32_t k = 0; k < sel.windows.size(); ++k) {
        if (taken[k]) {
            sel.whole.push_back(k);
            for (std::uint32_t pos = sel.windows[k].start; pos < sel.windows[k].end(); ++pos) {
                sel.review_indices.push_back(pos);
            }
        } else if (sel.truncated == k) {
            sel.review_indices.insert(sel.review_indices.end(), partial.begin(), partial.end());
        }
    }
    return sel;
}

PolicyResult windowkv_compress(const AttentionTrace& trace, const CompressionConfig& config, TaskType task,
                               SelectionMode mode) {
    const auto& dims = trace.dims();
    validate_config(config, dims);
    const auto grouping = build_grouping(dims.layers, config.gamma);
    const auto plan = plan_budget(config.b_total, dims.layers, config.gamma, config.lambda, config.alpha);
    const std::uint32_t p = effective_p(task, config.omega, config.p_aggregation);
    const std::uint32_t n = dims.tokens;

    PolicyResult result = make_result("windowkv", config);
    result.task = task;
    result.layer_budgets = plan.layer_budgets;
    result.layers.reserve(dims.layers);

    auto select_for = [&](std::uint32_t layer, std::int64_t budget) {
        const auto scores = score_layer(trace, layer, config.alpha);
        ++result.selection_invocations;
        auto sel = select_windows(scores, config.omega, p, budget - config.alpha);
        return with_observation(layer, std::move(sel.review_indices), n, config.alpha);
    };

    if (mode == SelectionMode::kIndependent) {
        for (std::uint32_t layer = 0; layer < dims.layers; ++layer) {
            result.layers.push_back(select_for(layer, plan.layer_budgets[layer]));
        }
        result.notes.push_back("independent per-layer selection (no intra-group sharing)");
        return result;
    }

    bool uneven = false;
    for (const auto& group : grouping.groups) {
        // One index set must fit every layer of the group, so the smallest
        // layer budget of the group bounds the selection.
        const auto first = plan.layer_budgets.begin() + group.begin;
        const std::int64_t budget = *std::min_element(first, first + group.size());
        uneven = uneven || *std::max_element(first, first + group.size()) != budget;
        const auto shared = share_indices(group, select_for(group.begin, budget));
        result.layers.insert(result.layers.end(), shared.begin(), shared.end());
    }
    if (uneven) {
        result.notes.push_back("groups whose budget is not a multiple of gamma retain the group's smallest layer budget");
    }
    return result;
}

PolicyResult slm_compress(const AttentionTrace& trace, const CompressionConfig& config) {
    const auto& dims = trace.dims();
    validate_config(config, dims);
    const std::int64_t b = uniform_layer_budget(config, dims);
    const std::uint32_t n = dims.tokens;
    const auto initial = static_cast<std::uint32_t>(std::min<std::int64_t>(b - config.alpha, n - config.alpha));

    PolicyResult result = make_result("slm", config);
    result.layer_budgets.assign(dims.layers, b);
    for (std::uint32_t layer = 0; layer < dims.layers; ++layer) {
        std::vector<std::uint32_t> review(initial);
        std::iota(review.begin(), review.end(), 0u);
        result.layers.push_back(with_observation(layer, std::move(review), n, config.alpha));
    }
    return result;
}

std::vector<double> h2o_column_means(const AttentionTrace& trace, std::uint32_t layer, std::uint32_t alpha) {
    const std::uint32_t n = trace.dims().tokens;
    const std::uint32_t heads = trace.dims().heads;
    require(alpha >= 1 && alpha < n, ErrorKind::kValidation, "alpha must satisfy 1 <= alpha < n");
    std::vector<double> sums(n, 0.0);
    constexpr std::uint32_t kChunk = 64;
    for (std::uint32_t head = 0; head < heads; ++head) {
        for (std::uint32_t begin = 0; begin < n; begin += kChunk) {
            const std::uint32_t end = std::min(n, begin + kChunk);
            const auto rows = compute_attention_rows(trace, layer, head, begin, end);
            for (std::uint32_t i = begin; i < end; ++i) {
                const double* row = rows.data() + std::size_t{i - begin} * n;
                for (std::uint32_t j = 0; j <= i; ++j) {
                    sums[j] += row[j];
                }
            }
        }
    }
    std::vector<double> means(n - alpha);
    for (std::uint32_t j = 0; j < n - alpha; ++j) {
        means[j] = sums[j] / (static_cast<double>(n - j) * heads);
    }
    return means;
}

PolicyResult h2o_compress(const AttentionTrace& trace, const CompressionConfig& config) {
    const auto& dims = trace.dims();
    validate_config(config, dims);
    const std::int64_t b = uniform_layer_budget(config, dims);

    PolicyResult result = make_result("h2o", config);
    result.layer_budgets.assign(dims.layers, b);
    for (std::uint32_t layer = 0; layer < dims.layers; ++layer) {
        const auto means = h2o_column_means(trace, layer, config.alpha);
        ++result.selection_invocations;
        result.layers.push_back(
            with_observation(layer, top_k_positions(means, b - config.alpha), dims.tokens, config.alpha));
    }
    return result;
}

PolicyResult pkv_compress(const AttentionTrace& trace, const CompressionConfig& config, TaskType task) {
    const auto& dims = trace.dims();
    validate_config(config, dims);
    const auto plan = plan_budget(config.b_total, dims.layers, 1, config.lambda, config.alpha);

    PolicyResult result = make_result("pkv", config);
    result.task = task;
    result.layer_budgets = plan.layer_budgets;
    for (std::uint32_t layer = 0; layer < dims.layers; ++layer) {
        const auto scores = score_layer(trace, layer, config.alpha);
        ++result.selection_invocations;
        result.layers.push_back(with_observation(
            layer, top_k_positions(scores.scores, plan.layer_budgets[layer] - config.alpha), dims.tokens,
            config.alpha));
    }
    result.notes.push_back("instruction-token attention is approximated by the observation window");
    return result;
}

PolicyResult full_kv(const AttentionTrace& trace, const CompressionConfig& config) {
    const auto& dims = trace.dims();
    PolicyResult result = make_result("fullkv", config);
    result.layer_budgets.assign(dims.layers, dims.tokens);
    std::vector<std::uint32_t> all(dims.tokens);
    std::iota(all.begin(), all.end(), 0u);
    for (std::uint32_t layer = 0; layer < dims.layers; ++layer) {
        result.layers.push_back({layer, all});
    }
    return result;
}

namespace {

class WindowKvPolicy final : public CompressionPolicy {
public:
    std::string_view name() const noexcept override { return "windowkv"; }
    PolicyResult compress(const AttentionTrace& trace, const CompressionConfig& config, TaskType task) const override {
        return windowkv_compress(trace, config, task);
    }
};

class SlmPolicy final : public CompressionPolicy {
public:
    std::string_view name() const noexcept override { return "slm"; }
    PolicyResult compress(const AttentionTrace& trace, const CompressionConfig& config, TaskType) const override {
        return slm_compress(trace, config);
    }
};

class H2oPolicy final : public CompressionPolicy {
public:
    std::string_view name() const noexcept override { return "h2o"; }
    PolicyResult compress(const AttentionTrace& trace, const CompressionConfig& config, TaskType) const override {
        return h2o_compress(trace, config);
    }
};

class PkvPolicy final : public CompressionPolicy {
public:
    std::string_view name() const noexcept override { return "pkv"; }
    PolicyResult compress(const AttentionTrace& trace, const CompressionConfig& config, TaskType task) const override {
        return pkv_compress(trace, config, task);
    }
};

class FullKvPolicy final : public CompressionPolicy {
public:
    std::string_view name() const noexcept override { return "fullkv"; }
    PolicyResult compress(const AttentionTrace& trace, const CompressionConfig& config, TaskType) const override {
        return full_kv(trace, config);
    }
};

constexpr std::array<std::string_view, 5> kPolicyNames = {"windowkv", "slm", "h2o", "pkv", "fullkv"};

}  // namespace

std::unique_ptr<CompressionPolicy> make_policy(std::string_view name) {
    if (name == "windowkv") return std::make_unique<WindowKvPolicy>();
    if (name == "slm") return std::make_unique<SlmPolicy>();
    if (name == "h2o") return std::make_unique<H2oPolicy>();
    if (name == "pkv") return std::make_unique<PkvPolicy>();
    if (name == "fullkv") return std::make_unique<FullKvPolicy>();
    fail(ErrorKind::kValidation, "unknown policy '" + std::string(name) + "'");
}

std::span<const std::string_view> policy_names() noexcept {
    return kPolicyNames;
}

}  // namespace windowkv
