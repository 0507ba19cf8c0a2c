// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "windowkv/scoring.hpp"

#include <algorithm>
#include <numeric>

#include "windowkv/error.hpp"

namespace windowkv {

namespace {

void check_alpha(std::uint32_t n, std::uint32_t alpha) {
    require(alpha >= 1, ErrorKind::kValidation, "observation window must hold at least one token");
    require(alpha < n, ErrorKind::kValidation,
            "observation window (" + std::to_string(alpha) + ") must be shorter than the context (" +
                std::to_string(n) + ")");
}

template <typename T>
TokenScores column_sums(const T* rows, std::uint32_t n, std::uint32_t alpha) {
    TokenScores out{std::vector<double>(n - alpha, 0.0), alpha, n};
    for (std::uint32_t r = 0; r < alpha; ++r) {
        const T* row = rows + std::size_t{r} * n;
        for (std::uint32_t j = 0; j < n - alpha; ++j) {
            out.scores[j] += row[j];
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(TaskType task) noexcept {
    return task == TaskType::kLocalization ? "localization" : "aggregation";
}

TaskType parse_task(std::string_view name) {
    if (name == "localization") return TaskType::kLocalization;
    if (name == "aggregation") return TaskType::kAggregation;
    fail(ErrorKind::kValidation, "unknown task type '" + std::string(name) + "'");
}

TokenScores score_tokens(const AttentionMatrix& attn, std::uint32_t alpha) {
    check_alpha(attn.n, alpha);
    return column_sums(attn.values.data() + std::size_t{attn.n - alpha} * attn.n, attn.n, alpha);
}

TokenScores score_observation_rows(std::span<const double> observation_rows, std::uint32_t n, std::uint32_t alpha) {
    check_alpha(n, alpha);
    require(observation_rows.size() == std::size_t{alpha} * n, ErrorKind::kValidation,
            "observation rows must be alpha x n");
    return column_sums(observation_rows.data(), n, alpha);
}

TokenScores score_layer(const AttentionTrace& trace, std::uint32_t layer, std::uint32_t alpha) {
    const std::uint32_t n = trace.dims().tokens;
    check_alpha(n, alpha);
    const auto rows = layer_attention_rows(trace, layer, n - alpha, n);
    return score_observation_rows(rows, n, alpha);
}

std::vector<ReviewWindow> partition_windows(std::uint32_t review_len, std::uint32_t omega) {
    require(review_len >= 1, ErrorKind::kValidation, "review context is empty");
    require(omega >= 1, ErrorKind::kValidation, "review window size must be at least 1");
    const std::uint32_t count = (review_len + omega - 1) / omega;
    std::vector<ReviewWindow> windows;
    windows.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::uint32_t start = k * omega;
        windows.push_back({k + 1, start, std::min(omega, review_len - start)});
    }
    return windows;
}

std::vector<std::uint32_t> top_tokens(const ReviewWindow& window, const TokenScores& scores, std::uint32_t count) {
    require(window.len >= 1, ErrorKind::kValidation, "empty review window");
    require(window.end() <= scores.scores.size(), ErrorKind::kOutOfRange, "window exceeds the review context");
    std::vector<std::uint32_t> positions(window.len);
    std::iota(positions.begin(), positions.end(), window.start);
    const auto take = std::min<std::size_t>(count, positions.size());
    std::partial_sort(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(take), positions.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                          const double sa = scores.scores[a];
                          const double sb = scores.scores[b];
                          return sa > sb || (sa == sb && a < b);
                      });
    positions.resize(take);
    return positions;
}

WindowScore score_window(const ReviewWindow& window, const TokenScores& scores, std::uint32_t p) {
    require(p >= 1, ErrorKind::kValidation, "p must be at least 1");
    const auto top = top_tokens(window, scores, p);
    double sum = 0.0;
    for (std::uint32_t pos : top) {
        sum += scores.scores[pos];
    }
    return {window.index, sum / static_cast<double>(top.size())};
}

std::uint32_t effective_p(TaskType task, std::uint32_t omega, std::uint32_t p_aggregation) {
    if (task == TaskType::kLocalization) {
        return omega;
    }
    require(p_aggregation >= 1 && p_aggregation < omega, ErrorKind::kValidation,
            "aggregation p must satisfy 1 <= p < omega (p=" + std::to_string(p_aggregation) +
                ", omega=" + std::to_string(omega) + ")");
    return p_aggregation;
}

std::vector<WindowScore> score_all_windows(const TokenScores& scores, std::uint32_t omega, TaskType task,
                                           std::uint32_t p_aggregation) {
    const std::uint32_t p = effective_p(task, omega, p_aggregation);
    const auto windows = partition_windows(scores.review_len(), omega);
    std::vector<WindowScore> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        out.push_back(score_window(w, scores, p));
    }
    return out;
}

std::vector<WindowScore> score_all_windows(const AttentionMatrix& attn, std::uint32_t alpha, std::uint32_t omega,
                                           TaskType task, std::uint32_t p_aggregation) {
    return score_all_windows(score_tokens(attn, alpha), omega, task, p_aggregation);
}

}  // namespace windowkv
