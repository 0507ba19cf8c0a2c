// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "windowkv/trace.hpp"

namespace windowkv {

enum class TaskType {
    kLocalization,  // answers live in specific passages: score windows by their full mean
    kAggregation,   // summarization, code, few-shot: score windows by their top-p tokens
};

std::string_view to_string(TaskType task) noexcept;
TaskType parse_task(std::string_view name);

/// Per-token importance of the review context [0, n - alpha), measured as the
/// attention each token receives from the observation rows [n - alpha, n).
struct TokenScores {
    std::vector<double> scores;
    std::uint32_t alpha = 0;
    std::uint32_t n = 0;

    std::uint32_t review_len() const noexcept { return n - alpha; }
};

/// Contiguous slice of the review context. index is 1-based.
struct ReviewWindow {
    std::uint32_t index = 0;
    std::uint32_t start = 0;
    std::uint32_t len = 0;

    std::uint32_t end() const noexcept { return start + len; }
    bool operator==(const ReviewWindow&) const = default;
};

struct WindowScore {
    std::uint32_t index = 0;
    double score = 0.0;
};

/// Column sums of the observation rows over the review columns.
TokenScores score_tokens(const AttentionMatrix& attn, std::uint32_t alpha);

/// Same as above from the alpha observation rows alone (alpha x n, row-major).
TokenScores score_observation_rows(std::span<const double> observation_rows, std::uint32_t n, std::uint32_t alpha);

/// Head-averaged token scores of one layer. Only the observation rows are
/// materialized, so this stays cheap for QK traces with long contexts.
TokenScores score_layer(const AttentionTrace& trace, std::uint32_t layer, std::uint32_t alpha);

/// Tiles [0, review_len) into ceil(review_len / omega) windows; only the last may be short.
std::vector<ReviewWindow> partition_windows(std::uint32_t review_len, std::uint32_t omega);

/// Mean of the min(p, len) largest token scores in the window.
WindowScore score_window(const ReviewWindow& window, const TokenScores& scores, std::uint32_t p);

/// Positions of the window's min(count, len) highest-scoring tokens, best first.
/// Ties go to the lower position.
std::vector<std::uint32_t> top_tokens(const ReviewWindow& window, const TokenScores& scores, std::uint32_t count);

/// p used for window scoring: omega for localization, p_aggregation otherwise.
std::uint32_t effective_p(TaskType task, std::uint32_t omega, std::uint32_t p_aggregation);

std::vector<WindowScore> score_all_windows(const TokenScores& scores, std::uint32_t omega, TaskType task,
                                           std::uint32_t p_aggregation);
std::vector<WindowScore> score_all_windows(const AttentionMatrix& attn, std::uint32_t alpha, std::uint32_t omega,
                                           TaskType task, std::uint32_t p_aggregation);

}  // namespace windowkv
