// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace windowkv {

inline constexpr std::uint16_t kTraceFormatVersion = 1;

/// Row-sum tolerance for traces produced in-process (synthetic or hand-built).
inline constexpr double kRowSumTolerance = 1e-5;
/// Looser tolerance for traces captured from a reduced-precision runtime. A trace
/// opts in by setting generator_params["source"] = "imported".
inline constexpr double kImportedRowSumTolerance = 1e-4;

enum class TraceMode : std::uint8_t {
    kAttn = 0,  // post-softmax n x n matrices per (layer, head)
    kQk = 1,    // raw n x d_k query and key matrices per (layer, head)
};

struct TraceDims {
    std::uint32_t layers = 0;
    std::uint32_t heads = 0;
    std::uint32_t tokens = 0;
    std::uint32_t head_dim = 0;

    bool operator==(const TraceDims&) const = default;

    /// Number of floats stored for one (layer, head) slot.
    std::size_t floats_per_head(TraceMode mode) const;
    std::size_t payload_floats(TraceMode mode) const;
};

struct TraceMeta {
    std::uint16_t format_version = kTraceFormatVersion;
    std::optional<std::uint64_t> rng_seed;
    std::map<std::string, std::string> generator_params;

    bool operator==(const TraceMeta&) const = default;

    bool imported() const;
    double row_sum_tolerance() const;
};

/**
 * Attention inputs recorded for one prefill: either the post-softmax causal
 * attention matrices or the query/key states they derive from.
 *
 * Payload layout is layer-major, then head-major, then row-major. In QK mode
 * each head stores its n x d_k queries followed by its n x d_k keys.
 *
 * Instances are immutable once built and the factories validate every
 * invariant, so a constructed trace is always well formed.
 */
class AttentionTrace {
public:
    static AttentionTrace from_attention(TraceDims dims, std::vector<float> payload, TraceMeta meta = {},
                                         std::string label = {});
    static AttentionTrace from_qk(TraceDims dims, std::vector<float> payload, TraceMeta meta = {},
                                  std::string label = {});

    const TraceDims& dims() const noexcept { return m_dims; }
    TraceMode mode() const noexcept { return m_mode; }
    const TraceMeta& meta() const noexcept { return m_meta; }
    const std::string& label() const noexcept { return m_label; }
    std::span<const float> payload() const noexcept { return m_payload; }

    /// Stored n x n matrix of one head. ATTN mode only.
    std::span<const float> attention(std::uint32_t layer, std::uint32_t head) const;
    /// n x d_k query matrix of one head. QK mode only.
    std::span<const float> queries(std::uint32_t layer, std::uint32_t head) const;
    std::span<const float> keys(std::uint32_t layer, std::uint32_t head) const;

    bool operator==(const AttentionTrace&) const = default;

private:
    AttentionTrace(TraceDims dims, TraceMode mode, std::vector<float> payload, TraceMeta meta, std::string label);

    std::span<const float> head_slot(std::uint32_t layer, std::uint32_t head) const;

    TraceDims m_dims;
    TraceMode m_mode = TraceMode::kAttn;
    std::vector<float> m_payload;
    TraceMeta m_meta;
    std::string m_label;
};

/// Throws Error(kValidation) unless every dimension satisfies the trace minimums.
void validate_dims(const TraceDims& dims);

/// Checks finiteness and, for ATTN mode, causality and row normalization.
void validate_payload(const TraceDims& dims, TraceMode mode, std::span<const float> payload,
                      double row_sum_tolerance);

/// Bitwise equality of two traces, including the float payload bytes.
bool bit_identical(const AttentionTrace& a, const AttentionTrace& b);

/// Dense square attention matrix, row-major.
struct AttentionMatrix {
    std::uint32_t n = 0;
    std::vector<float> values;

    float at(std::uint32_t row, std::uint32_t col) const { return values[std::size_t{row} * n + col]; }
    std::span<const float> row(std::uint32_t i) const { return {values.data() + std::size_t{i} * n, n}; }
};

/**
 * Attention of one head. ATTN traces return the stored matrix unchanged; QK
 * traces return softmax(QK^T / sqrt(d_k)) with future positions masked out
 * before the softmax.
 */
AttentionMatrix compute_attention(const AttentionTrace& trace, std::uint32_t layer, std::uint32_t head);

/**
 * Rows [row_begin, row_end) of one head's attention, widened to double.
 * Lets callers that only need the observation rows skip the full n x n work.
 */
std::vector<double> compute_attention_rows(const AttentionTrace& trace, std::uint32_t layer, std::uint32_t head,
                                           std::uint32_t row_begin, std::uint32_t row_end);

/// Head-averaged attention rows [row_begin, row_end) of one layer.
std::vector<double> layer_attention_rows(const AttentionTrace& trace, std::uint32_t layer, std::uint32_t row_begin,
                                         std::uint32_t row_end);

// ---------------------------------------------------------------------------
// Synthetic traces
// ---------------------------------------------------------------------------

enum class SyntheticProfile {
    kUniform,          // every causal row uniform
    kSink,             // column 0 draws a fixed share of every row
    kHotspot,          // rows concentrate mass on k contiguous regions
    kLayeredSparsity,  // rows sharpen with depth, salient tokens drift slowly across layers
};

SyntheticProfile parse_profile(std::string_view name);
std::string_view to_string(SyntheticProfile profile) noexcept;

struct TokenRange {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;

    std::uint32_t size() const noexcept { return end - begin; }
    bool contains(std::uint32_t pos) const noexcept { return pos >= begin && pos < end; }
    bool operator==(const TokenRange&) const = default;
};

struct SyntheticOptions {
    SyntheticProfile profile = SyntheticProfile::kUniform;
    // hotspot: regions are drawn from the seed unless given explicitly
    std::uint32_t hotspot_count = 1;
    std::uint32_t hotspot_len = 0;  // 0 selects max(1, n / 16)
    std::vector<TokenRange> hotspots;
    double hotspot_mass = 0.9;
    // sink
    double sink_mass = 0.4;
    std::string label;
};

/// Deterministic ATTN-mode trace. Hotspot regions are recorded in
/// meta.generator_params["regions"] as "b0-e0;b1-e1;...".
AttentionTrace generate_synthetic(const TraceDims& dims, std::uint64_t seed, const SyntheticOptions& options);

/// Deterministic QK-mode trace with standard-normal queries and keys. Used for
/// long-context benchmarks where storing n x n matrices is impractical.
AttentionTrace generate_random_qk(const TraceDims& dims, std::uint64_t seed);

std::string format_regions(std::span<const TokenRange> regions);
std::vector<TokenRange> parse_regions(std::string_view text);

}  // namespace windowkv
