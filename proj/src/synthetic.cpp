// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "windowkv/error.hpp"
#include "windowkv/trace.hpp"

namespace windowkv {

namespace {

using Rng = std::mt19937_64;

// Writes a normalized causal row: weights[0..=i] scaled to sum to one.
void emit_row(std::span<const double> weights, std::uint32_t i, float* out) {
    double sum = 0.0;
    for (std::uint32_t j = 0; j <= i; ++j) {
        sum += weights[j];
    }
    for (std::uint32_t j = 0; j <= i; ++j) {
        out[j] = static_cast<float>(weights[j] / sum);
    }
}

// Standard-normal noise smoothed by a centered moving average, restandardized
// to unit variance. Produces "segments" of correlated salience.
std::vector<double> smooth_noise(std::uint32_t n, std::uint32_t width, Rng& rng) {
    std::normal_distribution<double> normal;
    std::vector<double> raw(n);
    for (double& v : raw) {
        v = normal(rng);
    }
    std::vector<double> prefix(n + 1, 0.0);
    for (std::uint32_t j = 0; j < n; ++j) {
        prefix[j + 1] = prefix[j] + raw[j];
    }
    std::vector<double> out(n);
    const std::uint32_t half = width / 2;
    for (std::uint32_t j = 0; j < n; ++j) {
        const std::uint32_t lo = j >= half ? j - half : 0;
        const std::uint32_t hi = std::min(n, j + half + 1);
        out[j] = (prefix[hi] - prefix[lo]) / (hi - lo);
    }
    double mean = 0.0;
    for (double v : out) {
        mean += v;
    }
    mean /= n;
    double var = 0.0;
    for (double v : out) {
        var += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(var / n);
    for (double& v : out) {
        v = sd > 0.0 ? (v - mean) / sd : 0.0;
    }
    return out;
}

std::vector<TokenRange> draw_hotspots(std::uint32_t n, const SyntheticOptions& options, Rng& rng) {
    if (!options.hotspots.empty()) {
        std::vector<TokenRange> regions = options.hotspots;
        std::sort(regions.begin(), regions.end(), [](auto& a, auto& b) { return a.begin < b.begin; });
        for (std::size_t r = 0; r < regions.size(); ++r) {
            require(regions[r].begin < regions[r].end && regions[r].end <= n, ErrorKind::kValidation,
                    "hotspot region out of range");
            require(r == 0 || regions[r - 1].end <= regions[r].begin, ErrorKind::kValidation,
                    "hotspot regions overlap");
        }
        return regions;
    }
    require(options.hotspot_count >= 1, ErrorKind::kValidation, "hotspot profile needs at least one region");
    const std::uint32_t len = options.hotspot_len > 0 ? options.hotspot_len : std::max<std::uint32_t>(1, n / 16);
    const std::uint32_t lo = n / 8;
    const std::uint32_t hi = n - n / 8;
    const std::uint32_t slot = (hi - lo) / options.hotspot_count;
    require(slot >= len, ErrorKind::kValidation, "hotspot regions do not fit in the context");
    std::vector<TokenRange> regions;
    for (std::uint32_t r = 0; r < options.hotspot_count; ++r) {
        std::uniform_int_distribution<std::uint32_t> offset(0, slot - len);
        const std::uint32_t begin = lo + r * slot + offset(rng);
        regions.push_back({begin, begin + len});
    }
    return regions;
}

void fill_uniform(const TraceDims& dims, std::vector<float>& payload) {
    const std::uint32_t n = dims.tokens;
    for (std::size_t slot = 0; slot < std::size_t{dims.layers} * dims.heads; ++slot) {
        float* base = payload.data() + slot * n * n;
        for (std::uint32_t i = 0; i < n; ++i) {
            std::fill(base + std::size_t{i} * n, base + std::size_t{i} * n + i + 1, static_cast<float>(1.0 / (i + 1)));
        }
    }
}

void fill_sink(const TraceDims& dims, double sink_mass, Rng& rng, std::vector<float>& payload) {
    const std::uint32_t n = dims.tokens;
    std::normal_distribution<double> normal;
    std::vector<double> w(n);
    for (std::size_t slot = 0; slot < std::size_t{dims.layers} * dims.heads; ++slot) {
        float* base = payload.data() + slot * n * n;
        base[0] = 1.0f;
        for (std::uint32_t i = 1; i < n; ++i) {
            double rest = 0.0;
            for (std::uint32_t j = 1; j <= i; ++j) {
                w[j] = std::exp(0.5 * normal(rng));
                rest += w[j];
            }
            for (std::uint32_t j = 1; j <= i; ++j) {
                w[j] *= (1.0 - sink_mass) / rest;
            }
            w[0] = sink_mass;
            emit_row(w, i, base + std::size_t{i} * n);
        }
    }
}

void fill_hotspot(const TraceDims& dims, std::span<const TokenRange> regions, double mass, Rng& rng,
                  std::vector<float>& payload) {
    const std::uint32_t n = dims.tokens;
    std::vector<char> in_region(n, 0);
    for (const auto& r : regions) {
        std::fill(in_region.begin() + r.begin, in_region.begin() + r.end, 1);
    }
    std::normal_distribution<double> normal;
    std::vector<double> w(n);
    for (std::size_t slot = 0; slot < std::size_t{dims.layers} * dims.heads; ++slot) {
        float* base = payload.data() + slot * n * n;
        for (std::uint32_t i = 0; i < n; ++i) {
            double hot = 0.0;
            double cold = 0.0;
            for (std::uint32_t j = 0; j <= i; ++j) {
                w[j] = std::exp(0.5 * normal(rng));
                (in_region[j] ? hot : cold) += w[j];
            }
            // Split the row between region and background columns; a side with
            // no visible columns cedes its share to the other.
            const double hot_share = hot == 0.0 ? 0.0 : (cold == 0.0 ? 1.0 : mass);
            for (std::uint32_t j = 0; j <= i; ++j) {
                w[j] *= in_region[j] ? hot_share / hot : (1.0 - hot_share) / cold;
            }
            emit_row(w, i, base + std::size_t{i} * n);
        }
    }
}

void fill_layered_sparsity(const TraceDims& dims, Rng& rng, std::vector<float>& payload) {
    constexpr double kLayerCorrelation = 0.8;
    constexpr double kHeadJitter = 0.25;
    constexpr double kEntryNoise = 0.3;
    constexpr std::uint32_t kSegment = 16;

    const std::uint32_t n = dims.tokens;
    const std::uint32_t m = dims.layers;
    std::normal_distribution<double> normal;
    std::vector<double> field = smooth_noise(n, kSegment, rng);
    std::vector<double> w(n);
    for (std::uint32_t layer = 0; layer < m; ++layer) {
        if (layer > 0) {
            const auto innovation = smooth_noise(n, kSegment, rng);
            const double keep = kLayerCorrelation;
            const double fresh = std::sqrt(1.0 - keep * keep);
            for (std::uint32_t j = 0; j < n; ++j) {
                field[j] = keep * field[j] + fresh * innovation[j];
            }
        }
        // Sharper rows (lower entropy) deeper in the stack.
        const double sharpness = 1.0 + 3.0 * layer / std::max<std::uint32_t>(1, m - 1);
        for (std::uint32_t head = 0; head < dims.heads; ++head) {
            const auto jitter = smooth_noise(n, kSegment, rng);
            float* base = payload.data() + (std::size_t{layer} * dims.heads + head) * n * n;
            for (std::uint32_t i = 0; i < n; ++i) {
                double max_logit = -1e300;
                for (std::uint32_t j = 0; j <= i; ++j) {
                    w[j] = sharpness * (field[j] + kHeadJitter * jitter[j]) + kEntryNoise * normal(rng);
                    max_logit = std::max(max_logit, w[j]);
                }
                for (std::uint32_t j = 0; j <= i; ++j) {
                    w[j] = std::exp(w[j] - max_logit);
                }
                emit_row(w, i, base + std::size_t{i} * n);
            }
        }
    }
}

std::string format_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

SyntheticProfile parse_profile(std::string_view name) {
    if (name == "uniform") return SyntheticProfile::kUniform;
    if (name == "sink") return SyntheticProfile::kSink;
    if (name == "hotspot") return SyntheticProfile::kHotspot;
    if (name == "layered-sparsity") return SyntheticProfile::kLayeredSparsity;
    fail(ErrorKind::kValidation, "unknown profile '" + std::string(name) + "'");
}

std::string_view to_string(SyntheticProfile profile) noexcept {
    switch (profile) {
        case SyntheticProfile::kUniform: return "uniform";
        case SyntheticProfile::kSink: return "sink";
        case SyntheticProfile::kHotspot: return "hotspot";
        case SyntheticProfile::kLayeredSparsity: return "layered-sparsity";
    }
    return "unknown";
}

std::string format_regions(std::span<const TokenRange> regions) {
    std::string out;
    for (const auto& r : regions) {
        if (!out.empty()) {
            out += ';';
        }
        out += std::to_string(r.begin) + "-" + std::to_string(r.end);
    }
    return out;
}

std::vector<TokenRange> parse_regions(std::string_view text) {
    std::vector<TokenRange> regions;
    while (!text.empty()) {
        const auto sep = text.find_first_of(";,");
        const auto item = text.substr(0, sep);
        text = sep == std::string_view::npos ? std::string_view{} : text.substr(sep + 1);
        if (item.empty()) {
            continue;
        }
        const auto dash = item.find('-');
        require(dash != std::string_view::npos, ErrorKind::kValidation,
                "region '" + std::string(item) + "' is not of the form begin-end");
        TokenRange r;
        const auto b = item.substr(0, dash);
        const auto e = item.substr(dash + 1);
        const auto rb = std::from_chars(b.data(), b.data() + b.size(), r.begin);
        const auto re = std::from_chars(e.data(), e.data() + e.size(), r.end);
        require(rb.ec == std::errc{} && rb.ptr == b.data() + b.size() && re.ec == std::errc{} &&
                    re.ptr == e.data() + e.size() && r.begin < r.end,
                ErrorKind::kValidation, "malformed region '" + std::string(item) + "'");
        regions.push_back(r);
    }
    return regions;
}

AttentionTrace generate_synthetic(const TraceDims& dims, std::uint64_t seed, const SyntheticOptions& options) {
    validate_dims(dims);
    Rng rng(seed);
    std::vector<float> payload(dims.payload_floats(TraceMode::kAttn), 0.0f);

    TraceMeta meta;
    meta.rng_seed = seed;
    meta.generator_params["profile"] = std::string(to_string(options.profile));
    switch (options.profile) {
        case SyntheticProfile::kUniform:
            fill_uniform(dims, payload);
            break;
        case SyntheticProfile::kSink:
            require(options.sink_mass > 0.0 && options.sink_mass < 1.0, ErrorKind::kValidation,
                    "sink mass must lie in (0, 1)");
            meta.generator_params["sink_mass"] = format_double(options.sink_mass);
            fill_sink(dims, options.sink_mass, rng, payload);
            break;
        case SyntheticProfile::kHotspot: {
            require(options.hotspot_mass > 0.0 && options.hotspot_mass < 1.0, ErrorKind::kValidation,
                    "hotspot mass must lie in (0, 1)");
            const auto regions = draw_hotspots(dims.tokens, options, rng);
            meta.generator_params["regions"] = format_regions(regions);
            meta.generator_params["hotspot_mass"] = format_double(options.hotspot_mass);
            fill_hotspot(dims, regions, options.hotspot_mass, rng, payload);
            break;
        }
        case SyntheticProfile::kLayeredSparsity:
            fill_layered_sparsity(dims, rng, payload);
            break;
    }
    return AttentionTrace::from_attention(dims, std::move(payload), std::move(meta), options.label);
}

AttentionTrace generate_random_qk(const TraceDims& dims, std::uint64_t seed) {
    validate_dims(dims);
    Rng rng(seed);
    std::normal_distribution<float> normal;
    std::vector<float> payload(dims.payload_floats(TraceMode::kQk));
    for (float& v : payload) {
        v = normal(rng);
    }
    TraceMeta meta;
    meta.rng_seed = seed;
    meta.generator_params["profile"] = "random-qk";
    return AttentionTrace::from_qk(dims, std::move(payload), std::move(meta));
}

}  // namespace windowkv
