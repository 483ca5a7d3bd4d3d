#pragma once

// The multi-layer model: a chain x = D_1 g_1, g_1 = D_2 g_2, ..., with a
// per-layer l0,inf cap lambda_i on each representation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mlcsc/conv_layer.hpp"
#include "mlcsc/dictionary.hpp"
#include "mlcsc/errors.hpp"
#include "mlcsc/random.hpp"
#include "mlcsc/tensor.hpp"
#include "mlcsc/windows.hpp"

namespace mlcsc {

class MLCSCModel {
public:
    MLCSCModel() = default;

    MLCSCModel(SignalGeometry signal, std::vector<ConvLayer> layers, std::vector<std::size_t> lambdas)
        : signal_(signal), layers_(std::move(layers)), lambdas_(std::move(lambdas)) {
        if (layers_.empty()) throw DimensionError("MLCSCModel: no layers");
        if (lambdas_.size() != layers_.size()) {
            throw DimensionError("MLCSCModel: " + std::to_string(layers_.size()) + " layers but " +
                                 std::to_string(lambdas_.size()) + " sparsity levels");
        }
        for (std::size_t l : lambdas_)
            if (l < 1) throw ParameterError("MLCSCModel: every lambda must be >= 1");
        const EffectiveDict full(layers_, signal_);
        for (std::size_t i = 0; i <= layers_.size(); ++i) levels_.push_back(full.level_geometry(i));
        for (std::size_t i = 1; i <= layers_.size(); ++i) {
            effective_.emplace_back(std::vector<ConvLayer>(layers_.begin(), layers_.begin() + static_cast<long>(i)),
                                    signal_);
            single_.emplace_back(std::vector<ConvLayer>{layers_[i - 1]}, levels_[i - 1]);
        }
    }

    const SignalGeometry& geometry() const noexcept { return signal_; }
    const std::vector<ConvLayer>& layers() const noexcept { return layers_; }
    const ConvLayer& layer(std::size_t i) const { return layers_.at(i - 1); }
    const std::vector<std::size_t>& lambdas() const noexcept { return lambdas_; }
    std::size_t lambda(std::size_t i) const { return lambdas_.at(i - 1); }
    std::size_t depth() const noexcept { return layers_.size(); }

    /// Geometry of g_i; level 0 is the signal.
    const SignalGeometry& level_geometry(std::size_t i) const { return levels_.at(i); }

    /// D^(i) = D_1 ... D_i, 1-based.
    const EffectiveDict& effective(std::size_t i) const { return effective_.at(i - 1); }
    /// D_i alone, acting on g_i and producing g_{i-1}.
    const EffectiveDict& layer_dict(std::size_t i) const { return single_.at(i - 1); }

    /// Stripe geometry used for the cap on g_i (stripes w.r.t. D_i).
    StripeSpec stripe(std::size_t i) const { return {layer(i).n(), layer(i).stride()}; }

    MLCSCModel with_lambdas(std::vector<std::size_t> lambdas) const {
        return MLCSCModel(signal_, layers_, std::move(lambdas));
    }
    MLCSCModel with_layers(std::vector<ConvLayer> layers) const {
        return MLCSCModel(signal_, std::move(layers), lambdas_);
    }

private:
    SignalGeometry signal_;
    std::vector<ConvLayer> layers_;
    std::vector<std::size_t> lambdas_;
    std::vector<SignalGeometry> levels_;
    std::vector<EffectiveDict> effective_;
    std::vector<EffectiveDict> single_;
};

/// Representations g_1 .. g_L (reps[0] is g_1).
struct LayerStack {
    std::vector<SparseVec> reps;

    const SparseVec& at(std::size_t i) const { return reps.at(i - 1); }
    std::size_t depth() const noexcept { return reps.size(); }
};

/// Builds g_{L-1}, ..., g_1 from g_L by exact multiplication.
inline LayerStack propagate(const MLCSCModel& model, const SparseVec& gamma_l) {
    require_same_geometry(gamma_l.geometry(), model.level_geometry(model.depth()), "propagate");
    LayerStack s;
    s.reps.resize(model.depth());
    s.reps.back() = gamma_l;
    for (std::size_t i = model.depth(); i > 1; --i) {
        s.reps[i - 2] = SparseVec::from_dense(apply(model.layer(i), s.reps[i - 1]));
    }
    return s;
}

inline DenseVec synthesize(const MLCSCModel& model, const LayerStack& stack) {
    return apply(model.layer(1), stack.at(1));
}

struct MembershipReport {
    bool member = true;
    std::vector<std::size_t> l0inf;      // per layer
    std::vector<bool> cap_ok;            // per layer
    std::vector<double> chain_error;     // relative |g_{i-1} - D_i g_i|, index i-1; first entry unused (0)
    std::optional<std::size_t> first_failing_layer;
};

/// Every cap holds and consecutive representations chain to 1e-8 relative error.
inline MembershipReport membership(const MLCSCModel& model, const LayerStack& stack, double rel_tol = 1e-8) {
    if (stack.depth() != model.depth()) throw DimensionError("membership: stack depth does not match model");
    MembershipReport r;
    const std::size_t L = model.depth();
    r.l0inf.resize(L);
    r.cap_ok.resize(L);
    r.chain_error.assign(L, 0.0);
    auto fail = [&](std::size_t i) {
        r.member = false;
        if (!r.first_failing_layer || i < *r.first_failing_layer) r.first_failing_layer = i;
    };
    for (std::size_t i = 1; i <= L; ++i) {
        require_same_geometry(stack.at(i).geometry(), model.level_geometry(i), "membership");
        r.l0inf[i - 1] = l0_inf_stripe(stack.at(i), model.stripe(i));
        r.cap_ok[i - 1] = r.l0inf[i - 1] <= model.lambda(i);
        if (!r.cap_ok[i - 1]) fail(i);
    }
    for (std::size_t i = 2; i <= L; ++i) {
        const DenseVec lower = stack.at(i - 1).to_dense();
        const DenseVec prod = apply(model.layer(i), stack.at(i));
        const double scale = std::max(lower.norm(), prod.norm());
        const double err = (lower - prod).norm();
        r.chain_error[i - 1] = scale > 0.0 ? err / scale : 0.0;
        if (r.chain_error[i - 1] > rel_tol) fail(i - 1);
    }
    return r;
}

struct SparsityCheck {
    std::size_t layer = 0;
    std::size_t max_filter_nnz = 0;
    std::size_t c = 1;
    double bound = 0.0;  // lambda_{i-1} / (lambda_i c_i)
    bool pass = true;
};

/// Stripe-cover count c_i for layer i >= 2: patches of width n_i in a stripe of g_{i-1}.
inline std::size_t layer_c(const MLCSCModel& model, std::size_t i) {
    return patches_per_stripe(model.layer(i - 1).n(), model.layer(i).n(), model.level_geometry(i - 1).spatial_len);
}

/// Dictionary sparsity condition: |D_i|_0 <= lambda_{i-1} / (lambda_i c_i) for i >= 2.
/// Entry 0 describes layer 1 and always passes.
inline std::vector<SparsityCheck> dict_sparsity_check(const MLCSCModel& model, const std::vector<std::size_t>& lambdas) {
    if (lambdas.size() != model.depth()) throw DimensionError("dict_sparsity_check: lambda count mismatch");
    std::vector<SparsityCheck> out(model.depth());
    out[0] = {1, model.layer(1).max_filter_nnz(), 1, static_cast<double>(lambdas[0]), true};
    for (std::size_t i = 2; i <= model.depth(); ++i) {
        SparsityCheck c;
        c.layer = i;
        c.max_filter_nnz = model.layer(i).max_filter_nnz();
        c.c = layer_c(model, i);
        c.bound = static_cast<double>(lambdas[i - 2]) / (static_cast<double>(lambdas[i - 1]) * static_cast<double>(c.c));
        c.pass = static_cast<double>(c.max_filter_nnz) <= c.bound;
        out[i - 1] = c;
    }
    return out;
}

inline bool all_pass(const std::vector<SparsityCheck>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const SparsityCheck& c) { return c.pass; });
}

struct Sample {
    DenseVec x;
    LayerStack stack;
};

/// Draws g_L with nnz_l Gaussian entries on a uniformly shuffled support that
/// respects the lambda_L cap, then propagates. Draws that leave the model are
/// rejected; 1000 consecutive rejections raise ModelInfeasibleError.
inline Sample sample(const MLCSCModel& model, std::size_t nnz_l, Rng& rng, std::size_t max_rejections = 1000) {
    const std::size_t L = model.depth();
    const SignalGeometry& code = model.level_geometry(L);
    const StripeSpec spec = model.stripe(L);
    const std::size_t cap = model.lambda(L);
    std::vector<std::size_t> order(code.size());
    for (std::size_t attempt = 0; attempt < max_rejections; ++attempt) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        SparseVec pattern(code);
        for (std::size_t j : order) {
            if (pattern.nnz() == nnz_l) break;
            pattern.set(j, 1.0);
            if (l0_inf_stripe(pattern, spec) > cap) pattern.set(j, 0.0);
        }
        if (pattern.nnz() != nnz_l) continue;
        SparseVec g(code);
        for (const auto& [j, unused] : pattern.entries()) {
            double v = 0.0;
            while (std::abs(v) < kZeroThreshold) v = standard_normal(rng);
            g.set(j, v);
        }
        LayerStack stack = propagate(model, g);
        if (!membership(model, stack).member) continue;
        DenseVec x = synthesize(model, stack);
        return {std::move(x), std::move(stack)};
    }
    throw ModelInfeasibleError("sample: " + std::to_string(max_rejections) +
                               " consecutive draws fell outside the model (nnz_L = " + std::to_string(nnz_l) + ")");
}

inline Sample sample(const MLCSCModel& model, std::size_t nnz_l, std::uint64_t seed) {
    Rng rng(seed);
    return sample(model, nnz_l, rng);
}

}  // namespace mlcsc
