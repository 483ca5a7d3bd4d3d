#include <gtest/gtest.h>

#include "oracles/dense_oracle.hpp"
#include "support.hpp"

using namespace mlcsc;
using testing_support::random_dense;
using testing_support::random_sparse;

namespace {

struct Problem {
    MLCSCModel model;
    std::vector<DenseVec> batch;
    std::vector<SparseVec> codes;
};

Problem tiny_problem(std::uint64_t seed) {
    Rng rng(seed);
    MLCSCModel m = build_random_conv_model(SignalGeometry(16, 1), {{3, 3, 2, 1.0}, {4, 3, 1, 0.5}, {2, 2, 1, 0.5}}, 2, rng);
    Problem p{std::move(m), {}, {}};
    for (int k = 0; k < 3; ++k) {
        p.batch.push_back(random_dense(p.model.geometry(), rng));
        p.codes.push_back(random_sparse(p.model.level_geometry(p.model.depth()), 4, rng));
    }
    return p;
}

}  // namespace

TEST(GradientOracle, ObjectiveMatchesDenseDataTerm) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Problem p = tiny_problem(300 + seed);
        LearnConfig cfg;
        cfg.iota = 0.0;
        cfg.lambda_l1 = 1.0;
        const ObjectiveTerms t = objective_eval(p.batch, p.model, p.codes, cfg);
        const double want = oracle::data_term(p.model.layers(), 16, p.batch, p.codes);
        EXPECT_NEAR(t.l2, want, 1e-10 * std::max(1.0, want));
    }
}

TEST(GradientOracle, AnalyticGradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Problem p = tiny_problem(310 + seed);
        for (std::size_t i = 1; i <= p.model.depth(); ++i) {
            const DenseKernels g = data_gradient(p.batch, p.model, p.codes, i);
            const auto fd = oracle::fd_gradient(p.model.layers(), 16, p.batch, p.codes, i);
            ASSERT_EQ(g.size(), fd.size());
            for (std::size_t f = 0; f < g.size(); ++f) {
                ASSERT_EQ(g[f].size(), fd[f].size());
                for (std::size_t c = 0; c < g[f].size(); ++c)
                    EXPECT_LE(std::abs(g[f][c] - fd[f][c]), 1e-4 * std::abs(fd[f][c]) + 1e-8)
                        << "layer " << i << " filter " << f << " coord " << c;
            }
        }
    }
}
