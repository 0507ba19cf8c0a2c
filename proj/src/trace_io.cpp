// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "windowkv/trace_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "windowkv/error.hpp"

namespace windowkv {

namespace {

constexpr std::uint8_t kMagic[4] = {'W', 'K', 'V', 'T'};
constexpr std::uint8_t kMetaMagic[4] = {'W', 'K', 'V', 'M'};

class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : m_out(out) {}

    void bytes(std::span<const std::uint8_t> b) {
        // byte-wise append: GCC 11 flags insert() into a reserved vector with -Wstringop-overflow
        for (std::uint8_t v : b) {
            m_out.push_back(v);
        }
    }
    void u8(std::uint8_t v) { m_out.push_back(v); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v));
        u8(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) {
            u8(static_cast<std::uint8_t>(v >> s));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

private:
    std::vector<std::uint8_t>& m_out;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : m_in(in) {}

    std::size_t remaining() const noexcept { return m_in.size() - m_pos; }

    std::span<const std::uint8_t> take(std::size_t count, const char* what) {
        require(remaining() >= count, ErrorKind::kFormat, std::string("truncated trace: missing ") + what);
        auto out = m_in.subspan(m_pos, count);
        m_pos += count;
        return out;
    }
    std::uint8_t u8(const char* what) { return take(1, what)[0]; }
    std::uint16_t u16(const char* what) {
        auto b = take(2, what);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32(const char* what) {
        auto b = take(4, what);
        return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
               (std::uint32_t{b[3]} << 24);
    }

private:
    std::span<const std::uint8_t> m_in;
    std::size_t m_pos = 0;
};

bool has_metadata(const AttentionTrace& trace) {
    return !trace.label().empty() || trace.meta().rng_seed.has_value() || !trace.meta().generator_params.empty();
}

nlohmann::json meta_to_json(const AttentionTrace& trace) {
    nlohmann::json j;
    j["label"] = trace.label();
    j["rng_seed"] = trace.meta().rng_seed ? nlohmann::json(*trace.meta().rng_seed) : nlohmann::json(nullptr);
    j["generator_params"] = trace.meta().generator_params;
    return j;
}

}  // namespace

std::vector<std::uint8_t> write_trace(const AttentionTrace& trace) {
    const auto& d = trace.dims();
    std::vector<std::uint8_t> out;
    out.reserve(kTraceHeaderBytes + trace.payload().size_bytes());
    ByteWriter w(out);
    w.bytes(kMagic);
    w.u16(trace.meta().format_version);
    w.u8(static_cast<std::uint8_t>(trace.mode()));
    w.u32(d.layers);
    w.u32(d.heads);
    w.u32(d.tokens);
    w.u32(d.head_dim);
    for (float v : trace.payload()) {
        w.f32(v);
    }
    if (has_metadata(trace)) {
        const std::string text = meta_to_json(trace).dump();
        w.bytes(kMetaMagic);
        w.u32(static_cast<std::uint32_t>(text.size()));
        w.bytes({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
    }
    return out;
}

AttentionTrace read_trace(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const auto magic = r.take(4, "magic");
    require(std::equal(magic.begin(), magic.end(), kMagic), ErrorKind::kFormat, "bad magic: not a WKVT trace");
    const std::uint16_t version = r.u16("version");
    require(version == kTraceFormatVersion, ErrorKind::kFormat,
            "unsupported trace format version " + std::to_string(version));
    const std::uint8_t mode_byte = r.u8("mode");
    require(mode_byte <= 1, ErrorKind::kFormat, "unknown trace mode " + std::to_string(mode_byte));
    const auto mode = static_cast<TraceMode>(mode_byte);

    TraceDims dims;
    dims.layers = r.u32("layers");
    dims.heads = r.u32("heads");
    dims.tokens = r.u32("tokens");
    dims.head_dim = r.u32("head_dim");
    try {
        validate_dims(dims);
    } catch (const Error& e) {
        fail(ErrorKind::kFormat, std::string("invalid trace header: ") + e.what());
    }

    // Guard against headers whose payload size would overflow before allocating.
    const long double expected = static_cast<long double>(dims.layers) * dims.heads *
                                 (mode == TraceMode::kAttn ? static_cast<long double>(dims.tokens) * dims.tokens
                                                           : 2.0L * dims.tokens * dims.head_dim) *
                                 4.0L;
    require(expected <= static_cast<long double>(r.remaining()), ErrorKind::kFormat, "truncated payload");

    const std::size_t count = dims.payload_floats(mode);
    const auto raw = r.take(count * 4, "payload");
    std::vector<float> payload(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint8_t* b = raw.data() + 4 * i;
        const std::uint32_t bits = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
                                   (std::uint32_t{b[3]} << 24);
        payload[i] = std::bit_cast<float>(bits);
        require(std::isfinite(payload[i]), ErrorKind::kFormat, "payload contains NaN or Inf at float " + std::to_string(i));
    }

    TraceMeta meta;
    meta.format_version = version;
    std::string label;
    if (r.remaining() > 0) {
        const auto meta_magic = r.take(4, "metadata magic");
        require(std::equal(meta_magic.begin(), meta_magic.end(), kMetaMagic), ErrorKind::kFormat,
                "unexpected bytes after payload");
        const std::uint32_t len = r.u32("metadata length");
        const auto text = r.take(len, "metadata");
        require(r.remaining() == 0, ErrorKind::kFormat, "unexpected bytes after metadata");
        try {
            const auto j = nlohmann::json::parse(text.begin(), text.end());
            label = j.value("label", std::string{});
            if (j.contains("rng_seed") && !j["rng_seed"].is_null()) {
                meta.rng_seed = j["rng_seed"].get<std::uint64_t>();
            }
            if (j.contains("generator_params")) {
                meta.generator_params = j["generator_params"].get<std::map<std::string, std::string>>();
            }
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::kFormat, std::string("malformed metadata trailer: ") + e.what());
        }
    }

    try {
        return mode == TraceMode::kAttn
                   ? AttentionTrace::from_attention(dims, std::move(payload), std::move(meta), std::move(label))
                   : AttentionTrace::from_qk(dims, std::move(payload), std::move(meta), std::move(label));
    } catch (const Error& e) {
        fail(ErrorKind::kFormat, std::string("invalid trace payload: ") + e.what());
    }
}

void save_trace(const std::filesystem::path& path, const AttentionTrace& trace) {
    const auto bytes = write_trace(trace);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::kFormat, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.close();
    require(out.good(), ErrorKind::kFormat, "failed writing '" + path.string() + "'");
}

AttentionTrace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::kFormat, "cannot open trace '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return read_trace(bytes);
}

}  // namespace windowkv
