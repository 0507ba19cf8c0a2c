// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "windowkv/error.hpp"
#include "windowkv/policies.hpp"

using namespace windowkv;

using Indices = std::vector<std::uint32_t>;

namespace {

Indices range(std::uint32_t begin, std::uint32_t end) {
    Indices v(end - begin);
    std::iota(v.begin(), v.end(), begin);
    return v;
}

Indices concat(Indices a, const Indices& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

CompressionConfig config(std::int64_t b_total, std::uint32_t alpha, std::uint32_t omega, std::uint32_t gamma,
                         double lambda = 14.0) {
    CompressionConfig c;
    c.b_total = b_total;
    c.alpha = alpha;
    c.omega = omega;
    c.gamma = gamma;
    c.lambda = lambda;
    return c;
}

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected windowkv::Error";
    return ErrorKind::kValidation;
}

void expect_well_formed(const PolicyResult& r, const TraceDims& dims, std::uint32_t alpha) {
    ASSERT_EQ(r.layers.size(), dims.layers);
    ASSERT_EQ(r.layer_budgets.size(), dims.layers);
    for (std::uint32_t l = 0; l < dims.layers; ++l) {
        const auto& idx = r.layers[l].indices;
        EXPECT_EQ(r.layers[l].layer, l);
        EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
        EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end()) << "duplicate index";
        EXPECT_LE(static_cast<std::int64_t>(idx.size()), r.layer_budgets[l]) << r.policy << " layer " << l;
        EXPECT_LT(idx.back(), dims.tokens);
        for (std::uint32_t p = dims.tokens - alpha; p < dims.tokens; ++p) {
            EXPECT_TRUE(std::binary_search(idx.begin(), idx.end(), p)) << r.policy << " lost observation token " << p;
        }
    }
    EXPECT_EQ(r.retained_counts().size(), dims.layers);
}

}  // namespace

TEST(SelectWindows, WholeWindowsMatchExhaustiveSearch) {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint32_t review_len = 4 + static_cast<std::uint32_t>(rng() % 60);
        const std::uint32_t omega = 1 + static_cast<std::uint32_t>(rng() % 12);
        if ((review_len + omega - 1) / omega > 14) {
            continue;
        }
        std::vector<double> s(review_len);
        for (double& v : s) {
            v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        }
        const TokenScores scores{s, 1, review_len + 1};
        const std::int64_t budget = static_cast<std::int64_t>(rng() % (review_len + 1));
        const std::uint32_t p = 1 + static_cast<std::uint32_t>(rng() % omega);
        const auto sel = select_windows(scores, omega, p, budget);

        std::vector<double> ws;
        std::vector<std::uint32_t> lens;
        for (std::size_t k = 0; k < sel.windows.size(); ++k) {
            std::vector<double> tok(s.begin() + sel.windows[k].start, s.begin() + sel.windows[k].end());
            ws.push_back(wkv_test::top_p_mean(tok, p));
            lens.push_back(sel.windows[k].len);
        }
        const auto best = wkv_test::best_window_subset(ws, lens, budget);
        EXPECT_EQ(sel.whole, best.windows) << "trial " << trial;
        EXPECT_EQ(static_cast<std::int64_t>(sel.review_indices.size()), budget);
    }
}

TEST(SelectWindows, TruncationKeepsTheBestTokensOfTheNextWindow) {
    // windows [0,4) [4,8) [8,11); window 1 is best, window 0 next; after
    // window 1 only two slots remain, too few for either other window
    const TokenScores scores{{0.5, 0.1, 0.4, 0.2, 0.9, 0.9, 0.9, 0.9, 0.0, 0.05, 0.0}, 2, 13};
    const auto sel = select_windows(scores, 4, 4, 6);
    EXPECT_EQ(sel.whole, (Indices{1}));
    ASSERT_TRUE(sel.truncated.has_value());
    EXPECT_EQ(*sel.truncated, 0u);
    EXPECT_EQ(sel.review_indices, (Indices{0, 2, 4, 5, 6, 7}));
}

TEST(SelectWindows, TiesGoToTheLowerWindow) {
    const TokenScores scores{std::vector<double>(12, 0.25), 1, 13};
    const auto sel = select_windows(scores, 4, 4, 8);
    EXPECT_EQ(sel.whole, (Indices{0, 1}));
    EXPECT_EQ(sel.review_indices, range(0, 8));
}

TEST(WindowKv, HotspotRecoveredExactly) {
    SyntheticOptions o;
    o.profile = SyntheticProfile::kHotspot;
    o.hotspots = {{32, 64}};
    const auto trace = generate_synthetic({1, 2, 128, 4}, 5, o);
    // layer budget 40 = 8 observation tokens + 32 review tokens
    const auto r = windowkv_compress(trace, config(40, 8, 16, 1), TaskType::kLocalization);
    EXPECT_EQ(r.layers[0].indices, concat(range(32, 64), range(120, 128)));

    // brute force: the chosen windows maximize the summed score among subsets of 32 tokens
    const auto t = wkv_test::token_scores(trace, 0, 8);
    std::vector<double> ws;
    std::vector<std::uint32_t> lens;
    for (std::uint32_t k = 0; k < 120; k += 16) {
        const std::uint32_t end = std::min(120u, k + 16);
        ws.push_back(std::accumulate(t.begin() + k, t.begin() + end, 0.0) / (end - k));
        lens.push_back(end - k);
    }
    EXPECT_EQ(wkv_test::best_window_subset(ws, lens, 32).windows, (Indices{2, 3}));
}

TEST(WindowKv, LargeBudgetKeepsEverything) {
    const auto trace = wkv_test::random_attention_trace({4, 1, 32, 1}, 3);
    const auto r = windowkv_compress(trace, config(4 * 200, 4, 8, 2, 2.0), TaskType::kAggregation);
    for (const auto& l : r.layers) {
        EXPECT_EQ(l.indices, range(0, 32));
    }
}

TEST(WindowKv, SharingContract) {
    const auto trace = wkv_test::random_attention_trace({8, 2, 64, 1}, 9);
    for (std::uint32_t gamma : {1u, 2u, 4u, 8u}) {
        const auto cfg = config(8 * 40, 4, 4, gamma, 2.0);
        const auto r = windowkv_compress(trace, cfg, TaskType::kLocalization);
        EXPECT_EQ(r.selection_invocations, 8 / gamma);
        for (std::uint32_t l = 0; l < 8; ++l) {
            EXPECT_EQ(r.layers[l].indices, r.layers[l - l % gamma].indices);
        }
        expect_well_formed(r, trace.dims(), 4);
        const auto ind = windowkv_compress(trace, cfg, TaskType::kLocalization, SelectionMode::kIndependent);
        EXPECT_EQ(ind.selection_invocations, 8u);
        expect_well_formed(ind, trace.dims(), 4);
        for (std::uint32_t l = 0; l < 8; ++l) {
            EXPECT_EQ(static_cast<std::int64_t>(ind.layers[l].indices.size()), ind.layer_budgets[l]);
        }
    }
}

TEST(WindowKv, SharedGroupsUseTheGroupMinimumBudget) {
    const auto trace = wkv_test::random_attention_trace({4, 1, 64, 1}, 21);
    // H = 2, lambda = 1: groups get 61 and 60, layers [31, 30] and [30, 30]
    const auto r = windowkv_compress(trace, config(121, 4, 4, 2, 1.0), TaskType::kLocalization);
    EXPECT_EQ(r.layer_budgets, (std::vector<std::int64_t>{31, 30, 30, 30}));
    EXPECT_EQ(r.retained_counts(), (std::vector<std::size_t>{30, 30, 30, 30}));
    EXPECT_FALSE(r.notes.empty());
}

TEST(WindowKv, RetainedReviewTokensFormWholeWindows) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 40; ++trial) {
        const std::uint32_t n = 40 + static_cast<std::uint32_t>(rng() % 100);
        const std::uint32_t alpha = 1 + static_cast<std::uint32_t>(rng() % 8);
        const std::uint32_t omega = 1 + static_cast<std::uint32_t>(rng() % 10);
        const auto trace = wkv_test::random_attention_trace({2, 1, n, 1}, rng());
        const auto scores = score_layer(trace, 0, alpha);
        const std::int64_t review_budget = static_cast<std::int64_t>(rng() % (n - alpha));
        const auto task = omega > 1 && trial % 2 ? TaskType::kAggregation : TaskType::kLocalization;
        const auto sel = select_windows(scores, omega, effective_p(task, omega, std::max(1u, omega / 2)), review_budget);

        // every window is retained in full or not at all, except the truncated one
        std::size_t partial = 0;
        for (std::size_t k = 0; k < sel.windows.size(); ++k) {
            const auto& w = sel.windows[k];
            const auto kept = std::count_if(sel.review_indices.begin(), sel.review_indices.end(),
                                            [&](auto p) { return p >= w.start && p < w.end(); });
            if (kept != 0 && kept != w.len) {
                ++partial;
                EXPECT_EQ(sel.truncated, k);
            }
        }
        EXPECT_LE(partial, 1u);

        // maximal runs not touching the truncated window or a short tail window span a full window
        const auto& tail = sel.windows.back();
        auto exempt = [&](std::uint32_t pos) {
            if (sel.truncated && sel.windows[*sel.truncated].start <= pos && pos < sel.windows[*sel.truncated].end()) {
                return true;
            }
            return tail.len < omega && pos >= tail.start;
        };
        const auto& idx = sel.review_indices;
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i + 1;
            bool touches = exempt(idx[i]);
            while (j < idx.size() && idx[j] == idx[j - 1] + 1) {
                touches = touches || exempt(idx[j]);
                ++j;
            }
            if (!touches) {
                EXPECT_GE(j - i, std::min<std::size_t>(omega, scores.review_len()));
            }
            i = j;
        }
    }
}

TEST(WindowKv, OmegaOneMatchesPkv) {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        const auto trace = wkv_test::random_attention_trace({4, 2, 48, 1}, seed);
        const auto cfg = config(4 * 20, 4, 1, 1, 2.0);
        const auto w = windowkv_compress(trace, cfg, TaskType::kLocalization);
        const auto p = pkv_compress(trace, cfg, TaskType::kLocalization);
        for (std::uint32_t l = 0; l < 4; ++l) {
            EXPECT_EQ(w.layers[l].indices, p.layers[l].indices) << "seed " << seed << " layer " << l;
        }
    }
}

TEST(WindowKv, Deterministic) {
    const auto trace = wkv_test::random_attention_trace({4, 2, 64, 1}, 77);
    const auto cfg = config(4 * 30, 4, 8, 2, 2.0);
    const auto a = windowkv_compress(trace, cfg, TaskType::kAggregation);
    const auto b = windowkv_compress(trace, cfg, TaskType::kAggregation);
    for (std::uint32_t l = 0; l < 4; ++l) {
        EXPECT_EQ(a.layers[l], b.layers[l]);
    }
}

TEST(Slm, InitialAndRecentTokens) {
    const auto trace = generate_synthetic({1, 1, 100, 1}, 0, {});
    const auto r = slm_compress(trace, config(10, 4, 8, 1));
    EXPECT_EQ(r.layers[0].indices, concat(range(0, 6), range(96, 100)));
    EXPECT_EQ(slm_compress(trace, config(100, 4, 8, 1)).layers[0].indices, range(0, 100));
    EXPECT_EQ(slm_compress(trace, config(150, 4, 8, 1)).layers[0].indices, range(0, 100));
    EXPECT_EQ(r.selection_invocations, 0u);
}

TEST(Slm, IgnoresAttentionContent) {
    const auto a = wkv_test::random_attention_trace({2, 1, 50, 1}, 1);
    const auto b = wkv_test::random_attention_trace({2, 1, 50, 1}, 2);
    const auto cfg = config(2 * 20, 5, 8, 1);
    const auto ra = slm_compress(a, cfg);
    const auto rb = slm_compress(b, cfg);
    for (std::uint32_t l = 0; l < 2; ++l) {
        EXPECT_EQ(ra.layers[l], rb.layers[l]);
    }
}

TEST(Slm, UniformBudgetErrors) {
    const auto trace = generate_synthetic({3, 1, 50, 1}, 0, {});
    EXPECT_EQ(kind_of([&] { slm_compress(trace, config(100, 4, 8, 1)); }), ErrorKind::kValidation);
    EXPECT_EQ(kind_of([&] { slm_compress(trace, config(9, 4, 8, 1)); }), ErrorKind::kInfeasibleBudget);
}

TEST(H2o, MatchesFullSortOfColumnMeans) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto trace = wkv_test::random_attention_trace({2, 2, 70, 1}, seed + 500);
        const auto r = h2o_compress(trace, config(2 * 25, 6, 8, 1));
        expect_well_formed(r, trace.dims(), 6);
        for (std::uint32_t l = 0; l < 2; ++l) {
            const auto oracle = wkv_test::sort_top_k(wkv_test::column_means(trace, l, 6), 19);
            EXPECT_EQ(r.layers[l].indices, concat(oracle, range(64, 70)));
            const auto means = h2o_column_means(trace, l, 6);
            const auto ref = wkv_test::column_means(trace, l, 6);
            for (std::size_t j = 0; j < ref.size(); ++j) {
                ASSERT_NEAR(means[j], ref[j], 1e-12);
            }
        }
    }
}

TEST(H2o, UniformTracePrefersEarliestColumns) {
    // column j mean = (1/(n-j)) * sum_{i>=j} 1/(i+1), which decreases in j
    const std::uint32_t n = 12;
    const auto trace = generate_synthetic({1, 1, n, 1}, 0, {});
    const auto means = h2o_column_means(trace, 0, 2);
    for (std::uint32_t j = 0; j < n - 2; ++j) {
        double harmonic = 0.0;
        for (std::uint32_t i = j; i < n; ++i) {
            harmonic += 1.0 / (i + 1);
        }
        EXPECT_NEAR(means[j], harmonic / (n - j), 1e-7);
        if (j > 0) {
            EXPECT_LT(means[j], means[j - 1]);
        }
    }
    EXPECT_EQ(h2o_compress(trace, config(6, 2, 8, 1)).layers[0].indices, (Indices{0, 1, 2, 3, 10, 11}));
    EXPECT_EQ(h2o_compress(trace, config(n, 2, 8, 1)).layers[0].indices, range(0, n));
}

TEST(Pkv, MatchesFullSortOfTokenScores) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto trace = wkv_test::random_attention_trace({4, 2, 60, 1}, seed + 900);
        const auto cfg = config(4 * 24, 4, 8, 2, 3.0);
        const auto r = pkv_compress(trace, cfg, TaskType::kLocalization);
        expect_well_formed(r, trace.dims(), 4);
        EXPECT_EQ(r.layer_budgets, plan_budget(cfg.b_total, 4, 1, cfg.lambda, cfg.alpha).layer_budgets);
        for (std::uint32_t l = 0; l < 4; ++l) {
            const auto k = static_cast<std::size_t>(r.layer_budgets[l] - 4);
            const auto oracle = wkv_test::sort_top_k(wkv_test::token_scores(trace, l, 4), k);
            EXPECT_EQ(r.layers[l].indices, concat(oracle, range(56, 60)));
        }
        const auto counts = r.retained_counts();
        EXPECT_TRUE(std::is_sorted(counts.rbegin(), counts.rend()));
        EXPECT_GT(counts.front(), counts.back());
    }
}

TEST(Pkv, ConstantScoresKeepEarliestTokens) {
    const auto trace = generate_synthetic({4, 1, 40, 1}, 0, {});
    const auto r = pkv_compress(trace, config(4 * 12, 4, 8, 1, 1.0), TaskType::kAggregation);
    for (const auto& l : r.layers) {
        EXPECT_EQ(l.indices, concat(range(0, 8), range(36, 40)));
    }
    ASSERT_FALSE(r.notes.empty());
}

TEST(FullKv, KeepsEveryToken) {
    const auto trace = wkv_test::random_attention_trace({3, 1, 20, 1}, 2);
    const auto r = full_kv(trace);
    for (const auto& l : r.layers) {
        EXPECT_EQ(l.indices, range(0, 20));
    }
    EXPECT_EQ(r.total_retained(), 60u);
}

TEST(Policies, RegistryAndConfigValidation) {
    for (auto name : policy_names()) {
        EXPECT_EQ(make_policy(name)->name(), name);
    }
    EXPECT_EQ(kind_of([] { make_policy("snapkv"); }), ErrorKind::kValidation);

    const TraceDims dims{4, 1, 64, 1};
    EXPECT_NO_THROW(validate_config(config(4 * 16, 16, 8, 1), dims));
    EXPECT_EQ(kind_of([&] { validate_config(config(4 * 16, 0, 8, 1), dims); }), ErrorKind::kValidation);
    EXPECT_EQ(kind_of([&] { validate_config(config(4 * 64, 64, 8, 1), dims); }), ErrorKind::kValidation);
    EXPECT_EQ(kind_of([&] { validate_config(config(4 * 16, 16, 0, 1), dims); }), ErrorKind::kValidation);
    EXPECT_EQ(kind_of([&] { validate_config(config(4 * 16, 16, 8, 1, 0.9), dims); }), ErrorKind::kValidation);
    EXPECT_EQ(kind_of([&] { validate_config(config(4 * 16 - 1, 16, 8, 1), dims); }), ErrorKind::kInfeasibleBudget);

    const auto trace = wkv_test::random_attention_trace({6, 1, 32, 1}, 4);
    EXPECT_EQ(kind_of([&] { windowkv_compress(trace, config(6 * 16, 4, 8, 4), TaskType::kLocalization); }),
              ErrorKind::kValidation);
    auto agg = config(6 * 16, 4, 8, 1, 1.0);
    agg.p_aggregation = 8;
    EXPECT_EQ(kind_of([&] { windowkv_compress(trace, agg, TaskType::kAggregation); }), ErrorKind::kValidation);
}

TEST(Policies, AllPoliciesRespectBudgetsOnRandomTraces) {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 12; ++trial) {
        const TraceDims dims{4, 1 + static_cast<std::uint32_t>(rng() % 2), 48 + static_cast<std::uint32_t>(rng() % 40), 1};
        const auto trace = wkv_test::random_attention_trace(dims, rng());
        const auto cfg = config(4 * (20 + static_cast<std::int64_t>(rng() % 10)), 4, 1 + static_cast<std::uint32_t>(rng() % 8), 2, 2.0);
        for (auto name : policy_names()) {
            const auto r = make_policy(name)->compress(trace, cfg, TaskType::kLocalization);
            expect_well_formed(r, dims, name == "fullkv" ? 1 : cfg.alpha);
            if (name == "windowkv") {
                const auto group_min = std::min(r.layer_budgets[0], r.layer_budgets[1]);
                EXPECT_EQ(r.layers[0].indices.size(), static_cast<std::size_t>(group_min));
            } else if (name != "fullkv") {
                EXPECT_EQ(r.layers[0].indices.size(), static_cast<std::size_t>(r.layer_budgets[0])) << name;
            }
        }
    }
}
