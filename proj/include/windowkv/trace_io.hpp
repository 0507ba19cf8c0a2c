// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "windowkv/trace.hpp"

namespace windowkv {

// WKVT container, all integers and floats little-endian:
//
//   offset  size  field
//   0       4     magic "WKVT"
//   4       2     format version (u16)
//   6       1     mode (0 = ATTN, 1 = QK)
//   7       16    layers, heads, tokens, head_dim (u32 each)
//   23      4*P   payload, IEEE-754 binary32
//
// followed by an optional metadata trailer:
//
//   4       magic "WKVM"
//   4       byte length L (u32)
//   L       UTF-8 JSON object {"label", "rng_seed", "generator_params"}
//
// Files without a trailer are valid and read back with empty metadata.
inline constexpr std::size_t kTraceHeaderBytes = 23;

std::vector<std::uint8_t> write_trace(const AttentionTrace& trace);
AttentionTrace read_trace(std::span<const std::uint8_t> bytes);

void save_trace(const std::filesystem::path& path, const AttentionTrace& trace);
AttentionTrace load_trace(const std::filesystem::path& path);

}  // namespace windowkv
