// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "windowkv/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "windowkv/error.hpp"

namespace windowkv {

TimingStats summarize_timings(std::vector<double> samples_ms) {
    TimingStats stats;
    stats.samples_ms = samples_ms;
    if (samples_ms.empty()) {
        return stats;
    }
    std::sort(samples_ms.begin(), samples_ms.end());
    const std::size_t n = samples_ms.size();
    stats.median_ms = n % 2 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
    const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
    stats.p90_ms = samples_ms[std::max<std::size_t>(rank, 1) - 1];
    return stats;
}

SelectionBench bench_selection(const AttentionTrace& trace, const CompressionConfig& config, TaskType task,
                               std::uint32_t repetitions) {
    require(repetitions >= 1, ErrorKind::kValidation, "need at least one repetition");
    using Clock = std::chrono::steady_clock;
    SelectionBench bench;
    bench.repetitions = repetitions;
    bench.layers = trace.dims().layers;
    bench.num_groups = build_grouping(trace.dims().layers, config.gamma).num_groups();

    auto timed = [&](SelectionMode mode, std::uint64_t& invocations) {
        const auto start = Clock::now();
        const auto result = windowkv_compress(trace, config, task, mode);
        const auto stop = Clock::now();
        invocations = result.selection_invocations;
        return std::chrono::duration<double, std::milli>(stop - start).count();
    };

    std::vector<double> shared;
    std::vector<double> independent;
    for (std::uint32_t r = 0; r < repetitions; ++r) {
        shared.push_back(timed(SelectionMode::kShared, bench.shared_invocations));
        independent.push_back(timed(SelectionMode::kIndependent, bench.independent_invocations));
    }
    bench.shared = summarize_timings(std::move(shared));
    bench.independent = summarize_timings(std::move(independent));
    return bench;
}

}  // namespace windowkv
