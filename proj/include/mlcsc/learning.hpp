#pragma once

// Online multi-layer dictionary learning: code each minibatch against D^(L),
// then take projected (hard-thresholded) gradient steps on D_L .. D_2 and
// plain gradient steps on D_1, renormalizing every filter after each step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mlcsc/conv_layer.hpp"
#include "mlcsc/errors.hpp"
#include "mlcsc/model.hpp"
#include "mlcsc/parallel.hpp"
#include "mlcsc/pursuit.hpp"
#include "mlcsc/random.hpp"
#include "mlcsc/tensor.hpp"

namespace mlcsc {

enum class ZetaMode { Magnitude, LayerFraction, FilterFraction };

/// How H_zeta sparsifies a layer. `level` is a magnitude threshold or a kept
/// fraction; `l0_weight` is the zeta_i weight of |D_i|_0 in the objective.
struct ZetaPolicy {
    ZetaMode mode = ZetaMode::FilterFraction;
    double level = 1.0;
    double l0_weight = 0.0;
};

struct LearnConfig {
    double lambda_l1 = 0.1;               // coding penalty (half-squared-loss form)
    std::optional<double> target_nnz;     // tune lambda_l1 once, on the first batch, to this mean code nnz
    std::vector<ZetaPolicy> zetas;        // one per layer; entry 0 (D_1) is never thresholded
    double eta = 1.0;
    double momentum = 0.9;
    std::size_t T = 1;
    double iota = 0.001;
    std::size_t epochs = 20;
    std::size_t batch_size = 100;
    std::uint64_t rng_seed = 0;
    Method coder = Method::FISTA;
    std::size_t coder_k = 15;             // OMP / IHT cardinality
    std::size_t coder_iters = 200;
    double coder_tol = 1e-6;
    std::size_t threads = 1;

    void validate(std::size_t depth) const {
        if (!(eta >= 0.0)) throw ParameterError("LearnConfig: eta must be non-negative");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("LearnConfig: momentum must lie in [0, 1)");
        if (T < 1) throw ParameterError("LearnConfig: T must be >= 1");
        if (batch_size < 1) throw ParameterError("LearnConfig: batch_size must be >= 1");
        if (iota < 0.0) throw ParameterError("LearnConfig: iota must be non-negative");
        if (coder == Method::FISTA && !(lambda_l1 > 0.0)) throw ParameterError("LearnConfig: lambda_l1 must be positive");
        if (!zetas.empty() && zetas.size() != depth) throw DimensionError("LearnConfig: need one zeta policy per layer");
        for (const auto& z : zetas) {
            if (z.mode != ZetaMode::Magnitude && !(z.level > 0.0 && z.level <= 1.0)) {
                throw ParameterError("LearnConfig: kept fraction must lie in (0, 1]");
            }
        }
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;       // mean per-sample objective plus dictionary penalties
    double l2_term = 0.0;    // mean |y - D gamma|^2
    double residual = 0.0;   // mean |y - D gamma|
    double code_nnz = 0.0;   // mean nnz of gamma_L
    double lambda_l1 = 0.0;
    std::vector<double> sparsity;  // per layer, fraction of zero kernel coefficients
};

struct TrainTrace {
    EpochRecord initial;               // full pass with the initial model
    std::vector<EpochRecord> epochs;   // one per epoch, minibatch means
};

using DenseKernels = std::vector<std::vector<double>>;  // [filter][offset * m_in + channel]

// ---------------------------------------------------------------- objective

struct ObjectiveTerms {
    double l2 = 0.0;     // sum_k |y_k - D^(L) g_k|^2
    double frob = 0.0;   // iota sum_i |D_i|_F^2
    double l0 = 0.0;     // sum_{i>=2} zeta_i |D_i|_0
    double l1 = 0.0;     // lambda sum_k |g_k|_1
    double total() const { return l2 + frob + l0 + l1; }
};

inline ObjectiveTerms objective_eval(const std::vector<DenseVec>& batch, const MLCSCModel& model,
                                     const std::vector<SparseVec>& codes, const LearnConfig& cfg) {
    if (batch.size() != codes.size()) throw DimensionError("objective_eval: batch and codes differ in length");
    ObjectiveTerms t;
    const auto& d = model.effective(model.depth());
    for (std::size_t k = 0; k < batch.size(); ++k) {
        t.l2 += (batch[k] - d.apply(codes[k])).squared_norm();
        t.l1 += cfg.lambda_l1 * codes[k].l1_norm();
    }
    for (std::size_t i = 1; i <= model.depth(); ++i) {
        t.frob += cfg.iota * model.layer(i).squared_frobenius();
        if (i >= 2 && i - 1 < cfg.zetas.size()) {
            t.l0 += cfg.zetas[i - 1].l0_weight * static_cast<double>(model.layer(i).nnz());
        }
    }
    return t;
}

// ----------------------------------------------------------------- gradient

namespace detail {

/// Adds the kernel gradient of <g, D_i b> for one sample: d/dW[f][off, ch] = sum_p g[(p s + off), ch] b[p, f].
inline void accumulate_kernel_grad(const ConvLayer& layer, const DenseVec& g, const DenseVec& b, double scale,
                                   DenseKernels& out) {
    const std::size_t len = g.geometry().spatial_len;
    const std::size_t m_in = layer.m_in();
    const std::size_t positions = b.geometry().spatial_len;
    for (std::size_t p = 0; p < positions; ++p) {
        const std::size_t base = p * layer.stride();
        for (std::size_t f = 0; f < layer.m_out(); ++f) {
            const double bv = b.at(p, f);
            if (bv == 0.0) continue;
            auto& row = out[f];
            for (std::size_t off = 0; off < layer.n(); ++off) {
                const std::size_t q = (base + off) % len;
                const double* gp = g.raw().data() + q * m_in;
                double* rp = row.data() + off * m_in;
                for (std::size_t ch = 0; ch < m_in; ++ch) rp[ch] += scale * bv * gp[ch];
            }
        }
    }
}

inline DenseKernels zero_kernels(const ConvLayer& layer) {
    return DenseKernels(layer.m_out(), std::vector<double>(layer.kernel_size(), 0.0));
}

}  // namespace detail

/// Gradient of sum_k |y_k - D^(L) g_k|^2 with respect to layer i's dense kernels
/// (full n x m_in footprint), computed with operator applications only.
inline DenseKernels data_gradient(const std::vector<DenseVec>& batch, const MLCSCModel& model,
                                  const std::vector<SparseVec>& codes, std::size_t i) {
    if (i < 1 || i > model.depth()) throw IndexError("dict_gradient: layer index " + std::to_string(i) + " out of range");
    if (batch.size() != codes.size()) throw DimensionError("dict_gradient: batch and codes differ in length");
    const std::size_t L = model.depth();
    DenseKernels grad = detail::zero_kernels(model.layer(i));
    for (std::size_t k = 0; k < batch.size(); ++k) {
        // b = D_{i+1} ... D_L g_L
        DenseVec b = codes[k].to_dense();
        for (std::size_t j = L; j > i; --j) b = apply(model.layer(j), b);
        // residual and its pull-back through D_1 .. D_{i-1}
        DenseVec x = apply(model.layer(i), b);
        for (std::size_t j = i - 1; j >= 1; --j) x = apply(model.layer(j), x);
        DenseVec g = batch[k] - x;
        for (std::size_t j = 1; j < i; ++j) g = adjoint(model.layer(j), g);
        detail::accumulate_kernel_grad(model.layer(i), g, b, -2.0, grad);
    }
    return grad;
}

/// Gradient of the smooth part of the objective: data term plus iota |D_i|_F^2.
inline DenseKernels dict_gradient(const std::vector<DenseVec>& batch, const MLCSCModel& model,
                                  const std::vector<SparseVec>& codes, std::size_t i, double iota) {
    DenseKernels grad = data_gradient(batch, model, codes, i);
    const auto& layer = model.layer(i);
    for (std::size_t f = 0; f < layer.m_out(); ++f) {
        for (const auto& t : layer.kernel(f)) grad[f][t.offset * layer.m_in() + t.channel] += 2.0 * iota * t.value;
    }
    return grad;
}

// --------------------------------------------------------------- H_zeta

inline DenseKernels dense_kernels(const ConvLayer& layer) {
    DenseKernels k(layer.m_out());
    for (std::size_t f = 0; f < layer.m_out(); ++f) k[f] = layer.dense_kernel(f);
    return k;
}

/// Scales every non-zero filter to unit norm; all-zero filters stay zero.
inline ConvLayer normalize_nonzero(const ConvLayer& layer) {
    std::vector<Kernel> kernels = layer.kernels();
    for (std::size_t f = 0; f < kernels.size(); ++f) {
        const double nrm = layer.filter_norm(f);
        if (nrm == 0.0) continue;
        for (auto& t : kernels[f]) t.value /= nrm;
    }
    return ConvLayer(layer.m_in(), layer.m_out(), layer.n(), layer.stride(), std::move(kernels));
}

/// Applies the zeta policy to dense kernels (no renormalization).
inline DenseKernels threshold_kernels(DenseKernels w, const ZetaPolicy& policy) {
    switch (policy.mode) {
        case ZetaMode::Magnitude:
            for (auto& row : w)
                for (double& v : row)
                    if (std::abs(v) < policy.level) v = 0.0;
            break;
        case ZetaMode::FilterFraction:
            for (auto& row : w) {
                const auto keep = std::max<std::size_t>(
                    1, static_cast<std::size_t>(std::ceil(policy.level * static_cast<double>(row.size()) - 1e-9)));
                row = hard_threshold(row, keep);
            }
            break;
        case ZetaMode::LayerFraction: {
            std::vector<double> flat;
            for (const auto& row : w) flat.insert(flat.end(), row.begin(), row.end());
            const auto keep = static_cast<std::size_t>(std::ceil(policy.level * static_cast<double>(flat.size()) - 1e-9));
            flat = hard_threshold(flat, keep);
            std::size_t pos = 0;
            for (auto& row : w)
                for (double& v : row) v = flat[pos++];
            break;
        }
    }
    return w;
}

inline ConvLayer layer_from_dense(const ConvLayer& like, const DenseKernels& w) {
    return ConvLayer::from_dense(like.m_in(), like.n(), like.stride(), w);
}

/// H_zeta followed by renormalization of the surviving filters.
inline ConvLayer hard_threshold_dict(const ConvLayer& layer, const ZetaPolicy& policy) {
    return normalize_nonzero(layer_from_dense(layer, threshold_kernels(dense_kernels(layer), policy)));
}

// -------------------------------------------------------- initialization

inline ConvLayer random_layer(std::size_t m_in, std::size_t m_out, std::size_t n, std::size_t stride, Rng& rng,
                              std::optional<ZetaPolicy> policy = std::nullopt) {
    DenseKernels w(m_out, std::vector<double>(n * m_in));
    for (auto& row : w)
        for (double& v : row) v = standard_normal(rng);
    if (policy) w = threshold_kernels(std::move(w), *policy);
    return normalize(ConvLayer::from_dense(m_in, n, stride, w));
}

/// Adds relative Gaussian noise to the existing taps of every filter and renormalizes.
inline ConvLayer perturb_layer(const ConvLayer& layer, double relative, Rng& rng) {
    std::vector<Kernel> kernels = layer.kernels();
    for (std::size_t f = 0; f < kernels.size(); ++f) {
        if (kernels[f].empty()) continue;
        const double scale = relative * layer.filter_norm(f) / std::sqrt(static_cast<double>(kernels[f].size()));
        for (auto& t : kernels[f]) t.value += scale * standard_normal(rng);
    }
    return normalize(ConvLayer(layer.m_in(), layer.m_out(), layer.n(), layer.stride(), std::move(kernels)));
}

// ------------------------------------------------------------------ coding

inline PursuitConfig coder_config(const LearnConfig& cfg, double lambda, double step) {
    PursuitConfig pc;
    pc.method = cfg.coder;
    pc.lambda_l1 = lambda;
    pc.max_iters = cfg.coder_iters;
    pc.tol = cfg.coder_tol;
    pc.step_size = step;
    if (cfg.coder != Method::FISTA) pc.k = cfg.coder_k;
    return pc;
}

/// Codes every sample against D^(L) with the configured coder.
inline std::vector<SparseVec> code_batch(const std::vector<DenseVec>& batch, const MLCSCModel& model,
                                         const LearnConfig& cfg, double lambda) {
    const auto& d = model.effective(model.depth());
    const double lip = estimate_lipschitz(d);
    const PursuitConfig pc = coder_config(cfg, lambda, 1.0 / std::max(lip, 1e-300));
    std::vector<SparseVec> codes(batch.size());
    parallel_for(batch.size(), cfg.threads, [&](std::size_t k) {
        if (pc.method == Method::FISTA) {
            codes[k] = fista_lasso(batch[k], d, lambda, pc);
        } else {
            codes[k] = sparse_code(batch[k], d, pc);
        }
    });
    return codes;
}

inline double mean_nnz(const std::vector<SparseVec>& codes) {
    if (codes.empty()) return 0.0;
    double s = 0.0;
    for (const auto& c : codes) s += static_cast<double>(c.nnz());
    return s / static_cast<double>(codes.size());
}

/// Bisection on log(lambda) so the mean code nnz over `batch` approaches `target`.
inline double tune_lambda(const std::vector<DenseVec>& batch, const MLCSCModel& model, const LearnConfig& cfg,
                          double start, double target, std::size_t steps = 8) {
    double lo = start / 64.0;
    double hi = start * 64.0;
    double best = start;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < steps; ++s) {
        const double mid = std::sqrt(lo * hi);
        const double nnz = mean_nnz(code_batch(batch, model, cfg, mid));
        if (std::abs(nnz - target) < best_gap) {
            best_gap = std::abs(nnz - target);
            best = mid;
        }
        if (nnz > target) lo = mid; else hi = mid;
    }
    return best;
}

inline std::vector<double> layer_sparsity(const MLCSCModel& model) {
    std::vector<double> s;
    for (const auto& l : model.layers()) s.push_back(l.sparsity());
    return s;
}

/// Mean statistics of a coded batch.
inline EpochRecord measure(const std::vector<DenseVec>& batch, const MLCSCModel& model,
                           const std::vector<SparseVec>& codes, const LearnConfig& cfg, double lambda) {
    EpochRecord r;
    r.lambda_l1 = lambda;
    r.sparsity = layer_sparsity(model);
    if (batch.empty()) return r;
    const auto& d = model.effective(model.depth());
    double l2 = 0.0, res = 0.0, l1 = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const double e = (batch[k] - d.apply(codes[k])).squared_norm();
        l2 += e;
        res += std::sqrt(e);
        l1 += codes[k].l1_norm();
    }
    const double n = static_cast<double>(batch.size());
    LearnConfig c = cfg;
    c.lambda_l1 = lambda;
    const ObjectiveTerms penalties = objective_eval({}, model, {}, c);
    r.l2_term = l2 / n;
    r.residual = res / n;
    r.code_nnz = mean_nnz(codes);
    r.loss = (l2 + lambda * l1) / n + penalties.frob + penalties.l0;
    return r;
}

// --------------------------------------------------------------- training

namespace detail {

inline void require_finite(double v, const TrainTrace& trace, std::size_t epoch, std::size_t batch) {
    if (!std::isfinite(v)) {
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch) + " after " + std::to_string(trace.epochs.size()) +
                            " completed epochs");
    }
}

}  // namespace detail

struct TrainResult {
    MLCSCModel model;
    TrainTrace trace;
};

/// One pass of projected gradient updates on all layers for a coded batch.
inline MLCSCModel update_dictionaries(const std::vector<DenseVec>& batch, MLCSCModel model,
                                      const std::vector<SparseVec>& codes, const LearnConfig& cfg,
                                      std::vector<DenseKernels>& velocity) {
    const std::size_t L = model.depth();
    const double inv = 1.0 / static_cast<double>(batch.size());
    auto step_layer = [&](std::size_t i) {
        const ConvLayer& layer = model.layer(i);
        DenseKernels grad = data_gradient(batch, model, codes, i);
        DenseKernels w = dense_kernels(layer);
        auto& v = velocity[i - 1];
        for (std::size_t f = 0; f < w.size(); ++f) {
            for (std::size_t c = 0; c < w[f].size(); ++c) {
                const double g = grad[f][c] * inv + 2.0 * cfg.iota * w[f][c];
                v[f][c] = cfg.momentum * v[f][c] + g;
                w[f][c] -= cfg.eta * v[f][c];
            }
        }
        if (i >= 2 && i - 1 < cfg.zetas.size()) w = threshold_kernels(std::move(w), cfg.zetas[i - 1]);
        std::vector<ConvLayer> layers = model.layers();
        layers[i - 1] = normalize_nonzero(layer_from_dense(layer, w));
        model = model.with_layers(std::move(layers));
    };
    for (std::size_t i = L; i >= 1; --i)
        for (std::size_t t = 0; t < cfg.T; ++t) step_layer(i);
    return model;
}

inline TrainResult train(const std::vector<DenseVec>& data, MLCSCModel model, const LearnConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    cfg.validate(model.depth());
    for (const auto& d : data) require_same_geometry(d.geometry(), model.geometry(), "train");
    for (const auto& l : model.layers())
        if (!l.is_normalized()) throw InvariantError("train: initial model is not normalized");

    TrainResult out{model, {}};
    double lambda = cfg.lambda_l1;
    if (cfg.target_nnz && cfg.coder == Method::FISTA && !data.empty()) {
        const std::vector<DenseVec> head(data.begin(), data.begin() + static_cast<long>(std::min(cfg.batch_size, data.size())));
        lambda = tune_lambda(head, model, cfg, lambda, *cfg.target_nnz);
    }
    {
        const auto codes = code_batch(data, model, cfg, lambda);
        out.trace.initial = measure(data, model, codes, cfg, lambda);
        detail::require_finite(out.trace.initial.loss, out.trace, 0, 0);
    }
    if (data.empty()) {
        for (std::size_t e = 1; e <= cfg.epochs; ++e) {
            EpochRecord r = out.trace.initial;
            r.epoch = e;
            out.trace.epochs.push_back(r);
        }
        return out;
    }

    std::vector<std::size_t> order(data.size());
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng = make_rng(cfg.rng_seed, epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);

        std::vector<DenseKernels> velocity;
        for (const auto& l : model.layers()) velocity.push_back(detail::zero_kernels(l));

        double l2 = 0.0, res = 0.0, l1 = 0.0, nnz = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0, b = 0; start < order.size(); start += cfg.batch_size, ++b) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<DenseVec> batch;
            for (std::size_t j = start; j < stop; ++j) batch.push_back(data[order[j]]);
            const auto codes = code_batch(batch, model, cfg, lambda);
            const auto& d = model.effective(model.depth());
            for (std::size_t k = 0; k < batch.size(); ++k) {
                const double e = (batch[k] - d.apply(codes[k])).squared_norm();
                l2 += e;
                res += std::sqrt(e);
                l1 += codes[k].l1_norm();
                nnz += static_cast<double>(codes[k].nnz());
            }
            seen += batch.size();
            detail::require_finite(l2, out.trace, epoch, b);
            if (cfg.eta > 0.0) model = update_dictionaries(batch, std::move(model), codes, cfg, velocity);
        }
        EpochRecord r;
        r.epoch = epoch;
        r.lambda_l1 = lambda;
        r.sparsity = layer_sparsity(model);
        const double n = static_cast<double>(seen);
        LearnConfig c = cfg;
        c.lambda_l1 = lambda;
        const ObjectiveTerms penalties = objective_eval({}, model, {}, c);
        r.l2_term = l2 / n;
        r.residual = res / n;
        r.code_nnz = nnz / n;
        r.loss = (l2 + lambda * l1) / n + penalties.frob + penalties.l0;
        detail::require_finite(r.loss, out.trace, epoch, 0);
        out.trace.epochs.push_back(r);
        if (on_epoch) on_epoch(r);
    }
    out.model = std::move(model);
    return out;
}

}  // namespace mlcsc
