// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "windowkv/policies.hpp"

namespace windowkv {

struct TimingStats {
    std::vector<double> samples_ms;
    double median_ms = 0.0;
    double p90_ms = 0.0;  // nearest rank
};

TimingStats summarize_timings(std::vector<double> samples_ms);

struct SelectionBench {
    std::uint32_t repetitions = 0;
    std::uint32_t layers = 0;
    std::uint32_t num_groups = 0;
    std::uint64_t shared_invocations = 0;       // per run, expected num_groups
    std::uint64_t independent_invocations = 0;  // per run, expected layers
    TimingStats shared;
    TimingStats independent;
};

/// Times WindowKV selection with intra-group sharing against per-layer
/// selection. Runs alternate between the two modes to spread drift evenly.
SelectionBench bench_selection(const AttentionTrace& trace, const CompressionConfig& config, TaskType task,
                               std::uint32_t repetitions);

}  // namespace windowkv
