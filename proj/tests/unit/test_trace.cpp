// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "oracles.hpp"
#include "windowkv/error.hpp"
#include "windowkv/scoring.hpp"
#include "windowkv/trace.hpp"

using namespace windowkv;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected windowkv::Error";
    return ErrorKind::kValidation;
}

}  // namespace

TEST(ComputeAttention, ZeroQkGivesUniformCausalRows) {
    const TraceDims dims{1, 1, 3, 4};
    const auto trace = AttentionTrace::from_qk(dims, std::vector<float>(dims.payload_floats(TraceMode::kQk), 0.0f));
    const auto a = compute_attention(trace, 0, 0);
    EXPECT_FLOAT_EQ(a.at(0, 0), 1.0f);
    EXPECT_FLOAT_EQ(a.at(1, 0), 0.5f);
    EXPECT_FLOAT_EQ(a.at(1, 1), 0.5f);
    for (std::uint32_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(a.at(2, j), 1.0 / 3.0, 1e-7);
    }
    EXPECT_EQ(a.at(0, 1), 0.0f);
    EXPECT_EQ(a.at(1, 2), 0.0f);
}

TEST(ComputeAttention, AttnModeReturnsStoredBytes) {
    const auto trace = wkv_test::random_attention_trace({2, 2, 9, 1}, 11);
    for (std::uint32_t l = 0; l < 2; ++l) {
        for (std::uint32_t h = 0; h < 2; ++h) {
            const auto a = compute_attention(trace, l, h);
            const auto stored = trace.attention(l, h);
            ASSERT_EQ(a.values.size(), stored.size());
            EXPECT_EQ(0, std::memcmp(a.values.data(), stored.data(), stored.size_bytes()));
        }
    }
}

TEST(ComputeAttention, QkMatchesReferenceSoftmax) {
    const TraceDims dims{1, 1, 4, 2};
    std::mt19937_64 rng(5);
    std::normal_distribution<float> z(0.0f, 1.5f);
    std::vector<float> payload(dims.payload_floats(TraceMode::kQk));
    for (float& v : payload) {
        v = z(rng);
    }
    const auto trace = AttentionTrace::from_qk(dims, payload);
    const auto a = compute_attention(trace, 0, 0);
    const auto ref = wkv_test::reference_softmax(payload.data(), payload.data() + 8, 4, 2);
    for (std::size_t e = 0; e < 16; ++e) {
        EXPECT_NEAR(a.values[e], ref[e], 1e-6) << "entry " << e;
    }
}

TEST(ComputeAttention, QkRowsCausalAndNormalizedForRandomInputs) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        const std::uint32_t n = 2 + static_cast<std::uint32_t>(rng() % 40);
        const std::uint32_t d = 1 + static_cast<std::uint32_t>(rng() % 8);
        const TraceDims dims{1, 1, n, d};
        std::normal_distribution<float> z(0.0f, 1.0f + static_cast<float>(trial));
        std::vector<float> payload(dims.payload_floats(TraceMode::kQk));
        for (float& v : payload) {
            v = z(rng);
        }
        const auto a = compute_attention(AttentionTrace::from_qk(dims, payload), 0, 0);
        for (std::uint32_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::uint32_t j = 0; j < n; ++j) {
                if (j > i) {
                    ASSERT_EQ(a.at(i, j), 0.0f);
                }
                ASSERT_GE(a.at(i, j), 0.0f);
                sum += a.at(i, j);
            }
            ASSERT_NEAR(sum, 1.0, 1e-5);
        }
    }
}

TEST(ComputeAttention, OutOfRangeIndices) {
    const auto trace = wkv_test::random_attention_trace({2, 1, 4, 1}, 1);
    EXPECT_EQ(kind_of([&] { compute_attention(trace, 2, 0); }), ErrorKind::kOutOfRange);
    EXPECT_EQ(kind_of([&] { compute_attention(trace, 0, 1); }), ErrorKind::kOutOfRange);
}

TEST(TraceValidation, RejectsBadDimsAndPayloads) {
    EXPECT_EQ(kind_of([] { validate_dims({1, 1, 1, 1}); }), ErrorKind::kValidation);
    EXPECT_EQ(kind_of([] { validate_dims({0, 1, 4, 1}); }), ErrorKind::kValidation);
    EXPECT_EQ(kind_of([] { validate_dims({1, 0, 4, 1}); }), ErrorKind::kValidation);
    EXPECT_EQ(kind_of([] { validate_dims({1, 1, 4, 0}); }), ErrorKind::kValidation);

    // entry above the diagonal
    EXPECT_EQ(kind_of([] { AttentionTrace::from_attention({1, 1, 2, 1}, {0.5f, 0.5f, 0.5f, 0.5f}); }),
              ErrorKind::kValidation);
    // row sum off by more than the tolerance
    EXPECT_EQ(kind_of([] { AttentionTrace::from_attention({1, 1, 2, 1}, {1.0f, 0.0f, 0.5f, 0.4999f}); }),
              ErrorKind::kValidation);
    // negative entry
    EXPECT_EQ(kind_of([] { AttentionTrace::from_attention({1, 1, 2, 1}, {1.0f, 0.0f, 1.5f, -0.5f}); }),
              ErrorKind::kValidation);
    // wrong payload size
    EXPECT_EQ(kind_of([] { AttentionTrace::from_attention({1, 1, 2, 1}, {1.0f, 0.0f, 0.5f}); }),
              ErrorKind::kValidation);
    EXPECT_EQ(kind_of([] { AttentionTrace::from_qk({1, 1, 2, 1}, {1.0f, NAN, 0.5f, 0.5f}); }), ErrorKind::kValidation);
}

TEST(TraceValidation, ImportedTracesUseTheRelaxedTolerance) {
    TraceMeta meta;
    meta.generator_params["source"] = "imported";
    EXPECT_DOUBLE_EQ(meta.row_sum_tolerance(), kImportedRowSumTolerance);
    // row 1 sums to 1 - 5e-5: outside 1e-5, inside 1e-4
    const std::vector<float> payload{1.0f, 0.0f, 0.5f, 0.49995f};
    EXPECT_NO_THROW(AttentionTrace::from_attention({1, 1, 2, 1}, payload, meta));
    EXPECT_THROW(AttentionTrace::from_attention({1, 1, 2, 1}, payload), Error);
}

TEST(Synthetic, UniformRowsAreExactReciprocals) {
    for (std::uint64_t seed : {0ull, 17ull, 123456789ull}) {
        const auto trace = generate_synthetic({2, 2, 12, 4}, seed, {});
        for (std::uint32_t l = 0; l < 2; ++l) {
            for (std::uint32_t h = 0; h < 2; ++h) {
                const auto a = trace.attention(l, h);
                for (std::uint32_t i = 0; i < 12; ++i) {
                    for (std::uint32_t j = 0; j < 12; ++j) {
                        const float expected = j <= i ? 1.0f / static_cast<float>(i + 1) : 0.0f;
                        ASSERT_EQ(a[i * 12 + j], expected);
                    }
                }
            }
        }
    }
}

TEST(Synthetic, DeterministicForFixedArguments) {
    for (auto profile : {SyntheticProfile::kUniform, SyntheticProfile::kSink, SyntheticProfile::kHotspot,
                         SyntheticProfile::kLayeredSparsity}) {
        SyntheticOptions o;
        o.profile = profile;
        const auto a = generate_synthetic({3, 2, 64, 4}, 42, o);
        const auto b = generate_synthetic({3, 2, 64, 4}, 42, o);
        EXPECT_TRUE(bit_identical(a, b)) << to_string(profile);
        EXPECT_EQ(a, b);
    }
    SyntheticOptions o;
    o.profile = SyntheticProfile::kLayeredSparsity;
    EXPECT_FALSE(bit_identical(generate_synthetic({3, 2, 64, 4}, 1, o), generate_synthetic({3, 2, 64, 4}, 2, o)));
    EXPECT_TRUE(bit_identical(generate_random_qk({2, 2, 32, 8}, 9), generate_random_qk({2, 2, 32, 8}, 9)));
}

TEST(Synthetic, HotspotRegionHoldsMostObservationMass) {
    SyntheticOptions o;
    o.profile = SyntheticProfile::kHotspot;
    o.hotspots = {{32, 64}};
    const std::uint32_t alpha = 8;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto trace = generate_synthetic({2, 2, 128, 4}, seed, o);
        EXPECT_EQ(trace.meta().generator_params.at("regions"), "32-64");
        for (std::uint32_t l = 0; l < 2; ++l) {
            const auto t = wkv_test::token_scores(trace, l, alpha);
            double in = 0.0;
            double all = 0.0;
            for (std::size_t j = 0; j < t.size(); ++j) {
                all += t[j];
                in += (j >= 32 && j < 64) ? t[j] : 0.0;
            }
            EXPECT_GE(in / all, 0.8) << "seed " << seed << " layer " << l;
        }
    }
}

TEST(Synthetic, AutoHotspotRegionsAreRecordedAndMidContext) {
    SyntheticOptions o;
    o.profile = SyntheticProfile::kHotspot;
    o.hotspot_count = 2;
    const auto trace = generate_synthetic({1, 1, 256, 4}, 3, o);
    const auto regions = parse_regions(trace.meta().generator_params.at("regions"));
    ASSERT_EQ(regions.size(), 2u);
    for (const auto& r : regions) {
        EXPECT_EQ(r.size(), 16u);
        EXPECT_GE(r.begin, 256u / 8);
        EXPECT_LE(r.end, 256u - 256u / 8);
    }
    EXPECT_LE(regions[0].end, regions[1].begin);
}

TEST(Synthetic, SinkBoostsColumnZero) {
    SyntheticOptions o;
    o.profile = SyntheticProfile::kSink;
    o.sink_mass = 0.4;
    const auto trace = generate_synthetic({1, 1, 64, 4}, 8, o);
    const auto a = trace.attention(0, 0);
    for (std::uint32_t i = 1; i < 64; ++i) {
        EXPECT_NEAR(a[i * 64], 0.4, 1e-6);
    }
}

TEST(Synthetic, LayeredSparsitySharpensWithDepth) {
    SyntheticOptions o;
    o.profile = SyntheticProfile::kLayeredSparsity;
    const std::uint32_t n = 256;
    const auto trace = generate_synthetic({4, 1, n, 4}, 5, o);
    auto last_row_entropy = [&](std::uint32_t l) {
        const auto a = trace.attention(l, 0);
        double e = 0.0;
        for (std::uint32_t j = 0; j < n; ++j) {
            const double p = a[(n - 1) * n + j];
            e -= p > 0 ? p * std::log(p) : 0.0;
        }
        return e;
    };
    EXPECT_GT(last_row_entropy(0), last_row_entropy(3));
}

TEST(Synthetic, UnknownProfileAndRegionErrors) {
    EXPECT_EQ(kind_of([] { parse_profile("nosuch"); }), ErrorKind::kValidation);
    EXPECT_EQ(parse_profile("layered-sparsity"), SyntheticProfile::kLayeredSparsity);
    EXPECT_EQ(kind_of([] { parse_regions("10-5"); }), ErrorKind::kValidation);
    const std::vector<TokenRange> r{{1, 4}, {8, 9}};
    EXPECT_EQ(format_regions(r), "1-4;8-9");
    EXPECT_EQ(parse_regions("1-4,8-9"), r);
    SyntheticOptions o;
    o.profile = SyntheticProfile::kHotspot;
    o.hotspots = {{10, 20}, {15, 30}};
    EXPECT_EQ(kind_of([&] { generate_synthetic({1, 1, 64, 1}, 0, o); }), ErrorKind::kValidation);
}
