#pragma once

// Multi-layer pursuits: code the deepest layer against D^(L) and back-propagate
// (ml_csc_pursuit), the greedy projection onto the model (ml_csc_project), and
// the layer-by-layer baseline (layered_pursuit).

#include <cstddef>
#include <optional>
#include <vector>

#include "mlcsc/errors.hpp"
#include "mlcsc/model.hpp"
#include "mlcsc/pursuit.hpp"
#include "mlcsc/tensor.hpp"

namespace mlcsc {

/// Runs `coder` on D^(L) (k overrides coder.k when given) and back-propagates.
inline LayerStack ml_csc_pursuit(const DenseVec& y, const MLCSCModel& model, std::optional<std::size_t> k,
                                 PursuitConfig coder) {
    if (k) coder.k = *k;
    const auto& d = model.effective(model.depth());
    return propagate(model, sparse_code(y, d, coder));
}

struct ProjectOptions {
    bool warm_start = true;
    std::optional<std::size_t> max_k;  // defaults to lambda_L
};

struct Projection {
    DenseVec x;
    LayerStack stack;
    std::size_t accepted_k = 0;
    std::vector<double> residual_norms;  // |y - x*| after each accepted k, starting with k = 0
    bool stopped_on_violation = false;
};

/// Greedy projection onto the model: for k = 1..lambda_L run OMP with the
/// l0,inf cap k on D^(L), back-propagate, and stop at the first k whose
/// intermediate representations break a cap; the last feasible estimate wins.
inline Projection ml_csc_project(const DenseVec& y, const MLCSCModel& model, const ProjectOptions& opts = {}) {
    const std::size_t L = model.depth();
    const auto& d = model.effective(L);
    require_same_geometry(y.geometry(), d.signal_geometry(), "ml_csc_project");

    Projection out{DenseVec(y.geometry()), propagate(model, SparseVec(model.level_geometry(L))), 0, {y.norm()}, false};
    std::vector<std::size_t> support;
    const std::size_t last = opts.max_k.value_or(model.lambda(L));

    for (std::size_t k = 1; k <= last; ++k) {
        PursuitConfig cfg;
        cfg.method = Method::OMP;
        cfg.l0inf_cap = k;
        cfg.cap_stripe = model.stripe(L);
        SparseVec g;
        try {
            g = omp(y, d, cfg, opts.warm_start ? support : std::vector<std::size_t>{});
        } catch (const RankDeficientError&) {
            break;
        }
        LayerStack stack = propagate(model, g);
        bool feasible = true;
        for (std::size_t i = 1; i < L && feasible; ++i) {
            feasible = l0_inf_stripe(stack.at(i), model.stripe(i)) <= model.lambda(i);
        }
        if (!feasible) {
            out.stopped_on_violation = true;
            break;
        }
        const bool grew = g.nnz() > support.size() || !opts.warm_start;
        out.x = d.apply(g);
        out.stack = std::move(stack);
        out.accepted_k = k;
        out.residual_norms.push_back((y - out.x).norm());
        support = g.support();
        if (!grew || out.residual_norms.back() <= cfg.tol) break;
    }
    return out;
}

/// Codes g_1 from y with D_1, then g_2 from g_1 with D_2, and so on, with an
/// oracle cardinality per layer. The result is generally not model-consistent.
inline std::vector<SparseVec> layered_pursuit(const DenseVec& y, const MLCSCModel& model,
                                              const std::vector<std::size_t>& per_layer_k, PursuitConfig coder) {
    if (per_layer_k.size() != model.depth()) throw DimensionError("layered_pursuit: need one cardinality per layer");
    std::vector<SparseVec> reps;
    DenseVec signal = y;
    for (std::size_t i = 1; i <= model.depth(); ++i) {
        coder.k = per_layer_k[i - 1];
        SparseVec g = sparse_code(signal, model.layer_dict(i), coder);
        signal = g.to_dense();
        reps.push_back(std::move(g));
    }
    return reps;
}

}  // namespace mlcsc
