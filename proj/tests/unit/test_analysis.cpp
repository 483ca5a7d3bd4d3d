#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace mlcsc;
using testing_support::random_sparse;
using testing_support::sparse_random_layer;

TEST(Bounds, HandValues) {
    const double e0 = 0.1;
    const auto t4 = bound_thm4({0.01, 0.01, 0.01}, {5, 5, 5}, e0);
    for (std::size_t i = 1; i <= 3; ++i) EXPECT_NEAR(t4.at(i).value, 0.04 / 0.91, 1e-12);

    const auto alt = bound_thm4_alt(0.01, {0.1, 0.05, 0.05}, {3, 3, 3}, e0);
    const double el2 = 0.04 / (1.0 - 5.0 * 0.01);
    EXPECT_NEAR(alt.at(3).value, el2, 1e-12);
    EXPECT_NEAR(alt.at(1).value, el2 * 1.5625, 1e-12);
    EXPECT_NEAR(alt.at(1).relaxed, el2 * 4.0, 1e-12);

    const auto t6 = bound_thm6(0.01, {0.01, 0.01, 0.01}, {5, 5, 5}, {1, 2, 2}, 0.02, 4);
    EXPECT_NEAR(t6.eps_l, 0.3, 1e-12);
    EXPECT_NEAR(t6.at(3).value, 0.3, 1e-12);
    EXPECT_NEAR(t6.at(2).value, 0.3 * std::sqrt(3.0), 1e-12);
    EXPECT_NEAR(t6.zeta, 0.08, 1e-12);

    Thm7Inputs in;
    in.mu_eff_last = 0.01;
    in.mu_layers = {0.01, 0.01, 0.01};
    in.lambdas = {5, 5, 5};
    in.e0 = e0;
    in.eps0 = 0.01;
    in.gamma_min = 1.0;
    const auto t7 = bound_thm7(in);
    EXPECT_NEAR(t7.margin, 0.5 * 101.0 - 1.0 - 5.0, 1e-12);
    EXPECT_NEAR(t7.at(1).value, 0.01 / 0.96 * 2.25, 1e-12);
    EXPECT_NEAR(t7.at(1).value, 0.0234375, 1e-12);
    EXPECT_NEAR(t7.at(3).value, 0.01 / 0.96, 1e-12);
    EXPECT_NEAR(t7.at(1).product, 0.01 / 0.96 * 1.04 * 1.04, 1e-12);

    const auto dcp = bound_dcp_layered({0.01, 0.01, 0.01}, {5, 5, 5}, e0);
    EXPECT_NEAR(dcp.at(3).value, 0.64 / std::pow(0.91, 3), 1e-12);
    EXPECT_GT(dcp.at(3).value, t4.at(3).value);
}

TEST(Bounds, TrivialCases) {
    const auto zero = bound_thm4({0.1, 0.1}, {2, 2}, 0.0);
    for (const auto& b : zero.layers) EXPECT_EQ(b.value, 0.0);
    const auto orth = bound_thm4({0.0, 0.0}, {50, 50}, 0.3);
    for (const auto& b : orth.layers) EXPECT_NEAR(b.value, 4.0 * 0.09, 1e-15);
    EXPECT_EQ(bound_dcp_layered({0.0, 0.0}, {3, 3}, 0.0).at(2).value, 0.0);
    EXPECT_THROW(bound_thm4({0.1}, {2, 2}, 0.1), DimensionError);
}

TEST(Bounds, RefuseOutsideHypotheses) {
    // (1 + 1/0.2)/2 = 3, so lambda = 3 is not admissible
    const auto t4 = bound_thm4({0.2, 0.1}, {3, 2}, 0.1);
    EXPECT_FALSE(t4.at(1).hypothesis);
    EXPECT_TRUE(std::isnan(t4.at(1).value));
    EXPECT_TRUE(t4.at(2).hypothesis);
    EXPECT_FALSE(t4.all_hypotheses());

    const auto dcp = bound_dcp_layered({0.2, 0.01}, {3, 2}, 0.1);
    EXPECT_TRUE(std::isnan(dcp.at(2).value));

    Thm7Inputs in;
    in.mu_eff_last = 0.1;
    in.mu_layers = {0.1, 0.1};
    in.lambdas = {2, 2};
    in.e0 = 1.0;
    in.eps0 = 1.0;
    in.gamma_min = 0.1;
    const auto t7 = bound_thm7(in);
    EXPECT_LT(t7.margin, 0.0);
    EXPECT_TRUE(std::isnan(t7.at(1).value));
    EXPECT_TRUE(std::isnan(t7.at(1).product));

    // thm6 needs lambda_L <= (1 + 1/mu)/3
    EXPECT_TRUE(std::isnan(bound_thm6(0.25, {0.01, 0.01}, {2, 2}, {1, 1}, 0.1, 1).at(1).value));
    EXPECT_FALSE(std::isnan(bound_thm6(0.25, {0.01, 0.01}, {2, 2}, {1, 1}, 0.1, 1.0).eps_l));
}

TEST(Bounds, ShapeAcrossLayers) {
    const auto t4 = bound_thm4({0.02, 0.02, 0.02, 0.02}, {4, 4, 4, 4}, 0.2);
    const auto dcp = bound_dcp_layered({0.02, 0.02, 0.02, 0.02}, {4, 4, 4, 4}, 0.2);
    for (std::size_t i = 2; i <= 4; ++i) {
        EXPECT_DOUBLE_EQ(t4.at(i).value, t4.at(1).value);
        EXPECT_GE(dcp.at(i).value, dcp.at(i - 1).value);
    }
}

TEST(Rip, EstimateExactAndCoherenceOrdered) {
    Rng rng(3);
    const ConvLayer layer = sparse_random_layer(1, 1, 3, 1, 0, rng);
    const EffectiveDict d({layer}, SignalGeometry(8, 1));
    const double mu = mutual_coherence(d);
    for (std::size_t k = 1; k <= 3; ++k) {
        // exact constant over every support with at most k atoms per stripe
        double exact = 0.0;
        for (unsigned mask = 1; mask < (1u << 8); ++mask) {
            SparseVec pattern(d.code_geometry());
            for (std::size_t j = 0; j < 8; ++j)
                if (mask >> j & 1u) pattern.set(j, 1.0);
            if (l0_inf_stripe(pattern, d.stripe()) > k) continue;
            exact = std::max(exact, support_spectrum(d, pattern.support()).delta());
        }
        const double est = estimate_stripe_rip(d, k, 300, rng);
        EXPECT_LE(est, exact + 1e-12) << k;
        EXPECT_LE(exact, coherence_rip_bound(k, mu) + 1e-12) << k;
    }
    EXPECT_EQ(coherence_rip_bound(0, 0.5), 0.0);
}

TEST(LocalIsometry, HoldsWithExactAndCoherenceConstants) {
    Rng rng(4);
    const ConvLayer layer = sparse_random_layer(1, 3, 5, 1, 0, rng);
    const EffectiveDict d({layer}, SignalGeometry(40, 1));
    const double mu = mutual_coherence(d);
    for (std::size_t k = 1; k <= 3; ++k) {
        EXPECT_EQ(check_local_isometry(d, k, 200, rng).violations, 0u);
        EXPECT_EQ(check_local_isometry(d, k, 200, rng, mu).violations, 0u);
    }
}

TEST(Nvs, CancellationAndGenericCodes) {
    const ConvLayer layer(1, 2, 2, 1, {{{0, 0, 1.0}, {1, 0, 1.0}}, {{0, 0, 1.0}, {1, 0, -1.0}}});
    const ConvLayer unit = normalize(layer);
    SparseVec g(unit.code_geometry(8));
    g.set(0, 1.0);
    g.set(1, 1.0);
    EXPECT_FALSE(check_nvs(unit, g));
    g.set(1, 0.5);
    EXPECT_TRUE(check_nvs(unit, g));

    Rng rng(5);
    const ConvLayer r = sparse_random_layer(2, 4, 3, 1, 0, rng);
    std::size_t ok = 0;
    for (int t = 0; t < 10000; ++t) ok += check_nvs(r, random_sparse(r.code_geometry(16), 1 + t % 6, rng));
    EXPECT_EQ(ok, 10000u);
}

TEST(Metrics, SupportMetrics) {
    const SignalGeometry g(6, 1);
    SparseVec truth(g), est(g);
    truth.set(1, 1.0);
    truth.set(3, 2.0);
    EXPECT_DOUBLE_EQ(support_metrics(truth, truth).intersection, 1.0);
    EXPECT_DOUBLE_EQ(support_metrics(truth, truth).rel_error, 0.0);
    est.set(1, 1.0);
    est.set(4, 1.0);
    est.set(5, 1.0);
    const auto m = support_metrics(truth, est);
    EXPECT_DOUBLE_EQ(m.intersection, 1.0 / 3.0);
    EXPECT_NEAR(m.rel_error, std::sqrt(6.0 / 5.0), 1e-15);
    EXPECT_FALSE(support_contained(est, truth));
    SparseVec sub(g);
    sub.set(3, -1.0);
    EXPECT_TRUE(support_contained(sub, truth));
    const SparseVec empty(g);
    EXPECT_DOUBLE_EQ(support_metrics(empty, empty).intersection, 1.0);
    EXPECT_DOUBLE_EQ(support_metrics(empty, est).intersection, 0.0);
    EXPECT_THROW(support_metrics(truth, SparseVec(SignalGeometry(6, 2))), DimensionError);
}

TEST(CoherenceProfile, LayerCs) {
    Rng rng(6);
    const MLCSCModel m = build_synthetic_model({}, rng);
    const auto c = layer_cs(m);
    EXPECT_EQ(c[0], 1.0);
    const auto p = coherence_profile(m);
    ASSERT_EQ(p.effective.size(), 3u);
    for (double mu : p.effective) {
        EXPECT_GE(mu, 0.0);
        EXPECT_LE(mu, 1.0 + 1e-12);
    }
    EXPECT_NEAR(p.effective_norm_max[0], 1.0, 1e-12);
}
