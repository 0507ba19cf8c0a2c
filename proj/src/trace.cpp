// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "windowkv/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "windowkv/error.hpp"

namespace windowkv {

std::size_t TraceDims::floats_per_head(TraceMode mode) const {
    const auto n = std::size_t{tokens};
    return mode == TraceMode::kAttn ? n * n : 2 * n * head_dim;
}

std::size_t TraceDims::payload_floats(TraceMode mode) const {
    return std::size_t{layers} * heads * floats_per_head(mode);
}

bool TraceMeta::imported() const {
    auto it = generator_params.find("source");
    return it != generator_params.end() && it->second == "imported";
}

double TraceMeta::row_sum_tolerance() const {
    return imported() ? kImportedRowSumTolerance : kRowSumTolerance;
}

void validate_dims(const TraceDims& dims) {
    require(dims.layers >= 1, ErrorKind::kValidation, "trace needs at least one layer");
    require(dims.heads >= 1, ErrorKind::kValidation, "trace needs at least one head");
    require(dims.tokens >= 2, ErrorKind::kValidation, "trace needs at least two tokens");
    require(dims.head_dim >= 1, ErrorKind::kValidation, "head_dim must be at least 1");
}

void validate_payload(const TraceDims& dims, TraceMode mode, std::span<const float> payload,
                      double row_sum_tolerance) {
    validate_dims(dims);
    require(payload.size() == dims.payload_floats(mode), ErrorKind::kValidation,
            "payload has " + std::to_string(payload.size()) + " floats, expected " +
                std::to_string(dims.payload_floats(mode)));
    for (float v : payload) {
        require(std::isfinite(v), ErrorKind::kValidation, "payload contains NaN or Inf");
    }
    if (mode != TraceMode::kAttn) {
        return;
    }
    const std::uint32_t n = dims.tokens;
    const std::size_t slots = std::size_t{dims.layers} * dims.heads;
    for (std::size_t slot = 0; slot < slots; ++slot) {
        const float* base = payload.data() + slot * n * n;
        for (std::uint32_t i = 0; i < n; ++i) {
            const float* row = base + std::size_t{i} * n;
            double sum = 0.0;
            for (std::uint32_t j = 0; j <= i; ++j) {
                require(row[j] >= 0.0f, ErrorKind::kValidation, "attention entries must be nonnegative");
                sum += row[j];
            }
            for (std::uint32_t j = i + 1; j < n; ++j) {
                require(row[j] == 0.0f, ErrorKind::kValidation,
                        "attention is not causal at layer/head slot " + std::to_string(slot) + ", row " +
                            std::to_string(i));
            }
            require(std::abs(sum - 1.0) <= row_sum_tolerance, ErrorKind::kValidation,
                    "attention row " + std::to_string(i) + " of slot " + std::to_string(slot) + " sums to " +
                        std::to_string(sum));
        }
    }
}

AttentionTrace::AttentionTrace(TraceDims dims, TraceMode mode, std::vector<float> payload, TraceMeta meta,
                               std::string label)
    : m_dims(dims), m_mode(mode), m_payload(std::move(payload)), m_meta(std::move(meta)), m_label(std::move(label)) {}

AttentionTrace AttentionTrace::from_attention(TraceDims dims, std::vector<float> payload, TraceMeta meta,
                                              std::string label) {
    validate_payload(dims, TraceMode::kAttn, payload, meta.row_sum_tolerance());
    require(meta.format_version == kTraceFormatVersion, ErrorKind::kValidation, "unsupported trace format version");
    return AttentionTrace(dims, TraceMode::kAttn, std::move(payload), std::move(meta), std::move(label));
}

AttentionTrace AttentionTrace::from_qk(TraceDims dims, std::vector<float> payload, TraceMeta meta, std::string label) {
    validate_payload(dims, TraceMode::kQk, payload, meta.row_sum_tolerance());
    require(meta.format_version == kTraceFormatVersion, ErrorKind::kValidation, "unsupported trace format version");
    return AttentionTrace(dims, TraceMode::kQk, std::move(payload), std::move(meta), std::move(label));
}

std::span<const float> AttentionTrace::head_slot(std::uint32_t layer, std::uint32_t head) const {
    require(layer < m_dims.layers, ErrorKind::kOutOfRange,
            "layer " + std::to_string(layer) + " out of range (layers=" + std::to_string(m_dims.layers) + ")");
    require(head < m_dims.heads, ErrorKind::kOutOfRange,
            "head " + std::to_string(head) + " out of range (heads=" + std::to_string(m_dims.heads) + ")");
    const std::size_t per_head = m_dims.floats_per_head(m_mode);
    const std::size_t offset = (std::size_t{layer} * m_dims.heads + head) * per_head;
    return std::span<const float>(m_payload).subspan(offset, per_head);
}

std::span<const float> AttentionTrace::attention(std::uint32_t layer, std::uint32_t head) const {
    require(m_mode == TraceMode::kAttn, ErrorKind::kValidation, "trace does not store attention matrices");
    return head_slot(layer, head);
}

std::span<const float> AttentionTrace::queries(std::uint32_t layer, std::uint32_t head) const {
    require(m_mode == TraceMode::kQk, ErrorKind::kValidation, "trace does not store query/key states");
    return head_slot(layer, head).first(std::size_t{m_dims.tokens} * m_dims.head_dim);
}

std::span<const float> AttentionTrace::keys(std::uint32_t layer, std::uint32_t head) const {
    require(m_mode == TraceMode::kQk, ErrorKind::kValidation, "trace does not store query/key states");
    return head_slot(layer, head).last(std::size_t{m_dims.tokens} * m_dims.head_dim);
}

bool bit_identical(const AttentionTrace& a, const AttentionTrace& b) {
    if (a.dims() != b.dims() || a.mode() != b.mode() || a.meta() != b.meta() || a.label() != b.label()) {
        return false;
    }
    const auto pa = a.payload();
    const auto pb = b.payload();
    return pa.size() == pb.size() && std::memcmp(pa.data(), pb.data(), pa.size_bytes()) == 0;
}

namespace {

// Causal softmax of one query row against keys [0, row]; writes n entries.
void softmax_row(std::span<const float> q, std::span<const float> keys, std::uint32_t row, std::uint32_t n,
                 std::uint32_t d_k, double* out) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::uint32_t j = 0; j <= row; ++j) {
        const float* k = keys.data() + std::size_t{j} * d_k;
        double dot = 0.0;
        for (std::uint32_t c = 0; c < d_k; ++c) {
            dot += static_cast<double>(q[c]) * k[c];
        }
        out[j] = dot * scale;
        max_logit = std::max(max_logit, out[j]);
    }
    double sum = 0.0;
    for (std::uint32_t j = 0; j <= row; ++j) {
        out[j] = std::exp(out[j] - max_logit);
        sum += out[j];
    }
    for (std::uint32_t j = 0; j <= row; ++j) {
        out[j] /= sum;
    }
    std::fill(out + row + 1, out + n, 0.0);
}

}  // namespace

std::vector<double> compute_attention_rows(const AttentionTrace& trace, std::uint32_t layer, std::uint32_t head,
                                           std::uint32_t row_begin, std::uint32_t row_end) {
    const std::uint32_t n = trace.dims().tokens;
    require(row_begin <= row_end && row_end <= n, ErrorKind::kOutOfRange, "attention row range out of bounds");
    std::vector<double> rows(std::size_t{row_end - row_begin} * n);
    if (trace.mode() == TraceMode::kAttn) {
        const auto attn = trace.attention(layer, head);
        std::copy(attn.begin() + std::size_t{row_begin} * n, attn.begin() + std::size_t{row_end} * n, rows.begin());
        return rows;
    }
    const std::uint32_t d_k = trace.dims().head_dim;
    const auto q = trace.queries(layer, head);
    const auto k = trace.keys(layer, head);
    for (std::uint32_t i = row_begin; i < row_end; ++i) {
        softmax_row(q.subspan(std::size_t{i} * d_k, d_k), k, i, n, d_k,
                    rows.data() + std::size_t{i - row_begin} * n);
    }
    return rows;
}

AttentionMatrix compute_attention(const AttentionTrace& trace, std::uint32_t layer, std::uint32_t head) {
    const std::uint32_t n = trace.dims().tokens;
    AttentionMatrix out{n, {}};
    if (trace.mode() == TraceMode::kAttn) {
        const auto attn = trace.attention(layer, head);
        out.values.assign(attn.begin(), attn.end());
        return out;
    }
    const auto rows = compute_attention_rows(trace, layer, head, 0, n);
    out.values.assign(rows.begin(), rows.end());
    return out;
}

std::vector<double> layer_attention_rows(const AttentionTrace& trace, std::uint32_t layer, std::uint32_t row_begin,
                                         std::uint32_t row_end) {
    const std::uint32_t heads = trace.dims().heads;
    std::vector<double> avg = compute_attention_rows(trace, layer, 0, row_begin, row_end);
    for (std::uint32_t h = 1; h < heads; ++h) {
        const auto rows = compute_attention_rows(trace, layer, h, row_begin, row_end);
        for (std::size_t i = 0; i < avg.size(); ++i) {
            avg[i] += rows[i];
        }
    }
    if (heads > 1) {
        for (double& v : avg) {
            v /= heads;
        }
    }
    return avg;
}

}  // namespace windowkv
