#pragma once

// Experiment builders and drivers shared by the CLI and the acceptance suite:
// the synthetic non-convolutional model, the MNIST-shaped architecture,
// noisy recovery trials with per-trial certification, and M-term curves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mlcsc/analysis.hpp"
#include "mlcsc/learning.hpp"
#include "mlcsc/ml_pursuit.hpp"
#include "mlcsc/model.hpp"
#include "mlcsc/parallel.hpp"
#include "mlcsc/pursuit.hpp"
#include "mlcsc/random.hpp"

namespace mlcsc {

// ------------------------------------------------------------ model builders

/// Sets lambda_L and derives the shallower caps as lambda_{i-1} = lambda_i c_i
/// max_filter_nnz(D_i), so that every stack drawn under lambda_L is admissible.
inline MLCSCModel with_sparsity_caps(const MLCSCModel& model, std::size_t lambda_last) {
    const std::size_t L = model.depth();
    std::vector<std::size_t> lambdas(L, 1);
    lambdas[L - 1] = lambda_last;
    for (std::size_t i = L; i >= 2; --i) {
        lambdas[i - 2] = std::max<std::size_t>(1, lambdas[i - 1] * layer_c(model, i) * model.layer(i).max_filter_nnz());
    }
    return model.with_lambdas(std::move(lambdas));
}

struct SyntheticSpec {
    std::size_t signal_len = 200;
    std::vector<std::size_t> atoms{250, 300, 350};
    double kernel_density = 0.01;  // non-zeros per atom of D_2.. as a fraction of its length
    std::size_t lambda_last = 10;
};

/// Non-convolutional model: D_1 dense Gaussian (filter size = stride = signal
/// length), deeper layers with a few random non-zeros per atom. Caps are set
/// from the deepest one so the dictionary sparsity condition holds by construction.
inline MLCSCModel build_synthetic_model(const SyntheticSpec& spec, Rng& rng) {
    if (spec.atoms.empty()) throw DimensionError("build_synthetic_model: no layers");
    std::vector<ConvLayer> layers;
    layers.push_back(random_layer(1, spec.atoms[0], spec.signal_len, spec.signal_len, rng));
    for (std::size_t i = 1; i < spec.atoms.size(); ++i) {
        const std::size_t rows = spec.atoms[i - 1];
        const std::size_t nnz = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(spec.kernel_density * static_cast<double>(rows))));
        std::vector<Kernel> kernels(spec.atoms[i]);
        std::vector<std::uint32_t> pool(rows);
        for (auto& k : kernels) {
            std::iota(pool.begin(), pool.end(), 0u);
            std::shuffle(pool.begin(), pool.end(), rng);
            for (std::size_t t = 0; t < nnz; ++t) k.push_back({0, pool[t], standard_normal(rng)});
        }
        layers.push_back(normalize(ConvLayer(rows, spec.atoms[i], 1, 1, std::move(kernels))));
    }
    return with_sparsity_caps(MLCSCModel(SignalGeometry(spec.signal_len, 1), std::move(layers),
                                         std::vector<std::size_t>(spec.atoms.size(), 1)),
                              spec.lambda_last);
}

struct ConvLayerSpec {
    std::size_t filters = 1;
    std::size_t n = 1;
    std::size_t stride = 1;
    double keep = 1.0;  // kept fraction per filter
};

/// Random convolutional model on a (spatial_len x channels) signal.
inline MLCSCModel build_random_conv_model(SignalGeometry signal, const std::vector<ConvLayerSpec>& specs,
                                          std::vector<std::size_t> lambdas, Rng& rng) {
    std::vector<ConvLayer> layers;
    std::size_t m_in = signal.channels;
    for (const auto& s : specs) {
        std::optional<ZetaPolicy> policy;
        if (s.keep < 1.0) policy = ZetaPolicy{ZetaMode::FilterFraction, s.keep, 0.0};
        layers.push_back(random_layer(m_in, s.filters, s.n, s.stride, rng, policy));
        m_in = s.filters;
    }
    return MLCSCModel(signal, std::move(layers), std::move(lambdas));
}

/// Random convolutional model with caps derived from lambda_last.
inline MLCSCModel build_random_conv_model(SignalGeometry signal, const std::vector<ConvLayerSpec>& specs,
                                          std::size_t lambda_last, Rng& rng) {
    return with_sparsity_caps(build_random_conv_model(signal, specs, std::vector<std::size_t>(specs.size(), 1), rng),
                              lambda_last);
}

/// Two strided layers on a length-64 signal, used for planted learning runs.
inline std::vector<ConvLayerSpec> planted_architecture() { return {{8, 7, 2, 1.0}, {8, 5, 2, 0.3}}; }

/// H_zeta policies matching an architecture's kept fractions.
inline std::vector<ZetaPolicy> zetas_for(const std::vector<ConvLayerSpec>& specs) {
    std::vector<ZetaPolicy> z(specs.size());
    for (std::size_t i = 1; i < specs.size(); ++i) z[i] = ZetaPolicy{ZetaMode::FilterFraction, specs[i].keep, 0.0};
    return z;
}

/// MNIST-shaped architecture on 28x28 digits read as 28 samples x 28 channels:
/// 7-tap stride-2, 5-tap and 7-tap layers.
inline std::vector<ConvLayerSpec> mnist_architecture(std::size_t f1 = 8, std::size_t f2 = 32, std::size_t f3 = 128,
                                                     double keep2 = 0.025, double keep3 = 0.03) {
    return {{f1, 7, 2, 1.0}, {f2, 5, 1, keep2}, {f3, 7, 1, keep3}};
}

// ----------------------------------------------------------------- recovery

enum class RecoveryMethod { ProjectionOMP, ProjectionSP, LayeredSP };

inline const char* to_string(RecoveryMethod m) {
    switch (m) {
        case RecoveryMethod::ProjectionOMP: return "projection-omp";
        case RecoveryMethod::ProjectionSP: return "projection-sp";
        case RecoveryMethod::LayeredSP: return "layered-sp";
    }
    return "?";
}

inline constexpr RecoveryMethod kRecoveryMethods[] = {RecoveryMethod::ProjectionOMP, RecoveryMethod::ProjectionSP,
                                                      RecoveryMethod::LayeredSP};

struct MethodOutcome {
    bool failed = false;                      // the coder hit a rank-deficient support
    std::vector<SupportMetrics> metrics;      // per layer
    std::vector<bool> contained;              // Supp(est_i) ⊆ Supp(true_i)
    std::vector<double> sq_error;             // |est_i - true_i|^2
};

struct Thm7Check {
    double margin = kNaN;
    bool certified = false;           // margin positive
    bool full_hypotheses = false;     // per-layer coherence conditions hold as well
    std::vector<double> bound;        // product-form bound per layer (NaN when not certified)
    std::vector<double> relaxed;      // (3/2)^(L-i) form, only under full hypotheses
    bool pass = true;                 // containment and error <= bound on every layer
};

struct TrialRecord {
    std::size_t k = 0;
    std::size_t trial = 0;
    double e0 = 0.0;
    double eps0 = 0.0;
    std::vector<MethodOutcome> methods;  // indexed like kRecoveryMethods
    Thm7Check thm7;
};

struct RecoveryOptions {
    double sigma = 0.02;
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

namespace detail {

inline MethodOutcome score(const LayerStack& truth, const std::vector<SparseVec>& est) {
    MethodOutcome o;
    for (std::size_t i = 1; i <= truth.depth(); ++i) {
        o.metrics.push_back(support_metrics(truth.at(i), est[i - 1]));
        o.contained.push_back(support_contained(est[i - 1], truth.at(i)));
        o.sq_error.push_back((est[i - 1] - truth.at(i)).squared_norm());
    }
    return o;
}

inline MethodOutcome failed_outcome(const LayerStack& truth) {
    std::vector<SparseVec> zero;
    for (const auto& r : truth.reps) zero.emplace_back(r.geometry());
    MethodOutcome o = score(truth, zero);
    o.failed = true;
    return o;
}

}  // namespace detail

/// One noisy recovery trial with planted g_L of cardinality k.
inline TrialRecord recovery_trial(const MLCSCModel& model, const CoherenceProfile& profile, std::size_t k,
                                  std::size_t trial, const RecoveryOptions& opts) {
    const std::size_t L = model.depth();
    Rng rng = make_rng(opts.seed, (static_cast<std::uint64_t>(k) << 32) | trial);
    const Sample s = sample(model, k, rng);
    DenseVec noise(model.geometry());
    for (double& v : noise.raw()) v = opts.sigma * standard_normal(rng);
    const DenseVec y = s.x + noise;

    TrialRecord rec;
    rec.k = k;
    rec.trial = trial;
    rec.e0 = noise.norm();
    rec.eps0 = l2_inf_patch(noise, model.effective(L).atom_size());

    std::vector<std::size_t> oracle;
    for (const auto& r : s.stack.reps) oracle.push_back(r.nnz());
    const std::size_t k_true = s.stack.at(L).nnz();

    for (RecoveryMethod m : kRecoveryMethods) {
        try {
            PursuitConfig cfg;
            std::vector<SparseVec> est;
            if (m == RecoveryMethod::LayeredSP) {
                cfg.method = Method::SubspacePursuit;
                est = layered_pursuit(y, model, oracle, cfg);
            } else {
                cfg.method = m == RecoveryMethod::ProjectionOMP ? Method::OMP : Method::SubspacePursuit;
                est = ml_csc_pursuit(y, model, k_true, cfg).reps;
            }
            rec.methods.push_back(detail::score(s.stack, est));
        } catch (const RankDeficientError&) {
            rec.methods.push_back(detail::failed_outcome(s.stack));
        }
    }

    Thm7Inputs in;
    in.mu_eff_last = profile.effective[L - 1];
    in.mu_layers = profile.layer;
    for (std::size_t i = 1; i <= L; ++i) {
        in.lambdas.push_back(static_cast<double>(l0_inf_stripe(s.stack.at(i), model.stripe(i))));
    }
    in.e0 = rec.e0;
    in.eps0 = rec.eps0;
    in.gamma_min = s.stack.at(L).min_abs();
    in.atom_norm_min = profile.effective_norm_min[L - 1];
    const BoundReport b = bound_thm7(in);
    rec.thm7.margin = b.margin;
    rec.thm7.certified = b.layers.front().product_ok;
    rec.thm7.full_hypotheses = b.all_hypotheses();
    const MethodOutcome& omp_out = rec.methods.front();
    for (std::size_t i = 1; i <= L; ++i) {
        rec.thm7.bound.push_back(b.at(i).product);
        rec.thm7.relaxed.push_back(b.at(i).relaxed);
        if (rec.thm7.certified) {
            const bool ok = !omp_out.failed && omp_out.contained[i - 1] &&
                            omp_out.sq_error[i - 1] <= b.at(i).product * (1.0 + 1e-9);
            rec.thm7.pass = rec.thm7.pass && ok;
        }
    }
    return rec;
}

inline std::vector<TrialRecord> run_recovery(const MLCSCModel& model, const std::vector<std::size_t>& ks,
                                             const RecoveryOptions& opts) {
    const CoherenceProfile profile = coherence_profile(model);
    std::vector<TrialRecord> out(ks.size() * opts.trials);
    parallel_for(out.size(), opts.threads, [&](std::size_t idx) {
        out[idx] = recovery_trial(model, profile, ks[idx / opts.trials], idx % opts.trials, opts);
    });
    return out;
}

struct RecoverySummaryRow {
    std::size_t k = 0;
    std::size_t layer = 0;
    RecoveryMethod method = RecoveryMethod::ProjectionOMP;
    double mean_rel_error = 0.0;
    double mean_intersection = 0.0;
    std::size_t trials = 0;
    std::size_t failures = 0;
};

inline std::vector<RecoverySummaryRow> summarize_recovery(const std::vector<TrialRecord>& records,
                                                          const std::vector<std::size_t>& ks, std::size_t depth) {
    std::vector<RecoverySummaryRow> rows;
    for (std::size_t k : ks) {
        for (std::size_t layer = 1; layer <= depth; ++layer) {
            for (std::size_t m = 0; m < std::size(kRecoveryMethods); ++m) {
                RecoverySummaryRow row;
                row.k = k;
                row.layer = layer;
                row.method = kRecoveryMethods[m];
                for (const auto& r : records) {
                    if (r.k != k) continue;
                    const auto& o = r.methods[m];
                    row.mean_rel_error += o.metrics[layer - 1].rel_error;
                    row.mean_intersection += o.metrics[layer - 1].intersection;
                    row.failures += o.failed ? 1 : 0;
                    ++row.trials;
                }
                if (row.trials) {
                    row.mean_rel_error /= static_cast<double>(row.trials);
                    row.mean_intersection /= static_cast<double>(row.trials);
                }
                rows.push_back(row);
            }
        }
    }
    return rows;
}

// ------------------------------------------------------------------- M-term

struct MtermPoint {
    std::size_t k = 0;
    double mean_rel_error = 0.0;  // mean |y - x^|^2 / |y|^2
};

/// IHT M-term approximation over an ascending k grid, warm-starting each k
/// from the previous solution so the per-signal error cannot increase.
/// Signals with zero energy are skipped.
inline std::vector<MtermPoint> mterm_curve(const MLCSCModel& model, const std::vector<DenseVec>& signals,
                                           std::vector<std::size_t> ks, std::size_t iters = 100,
                                           std::size_t threads = 1) {
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    const auto& d = model.effective(model.depth());
    PursuitConfig cfg;
    cfg.method = Method::IHT;
    cfg.max_iters = iters;
    cfg.tol = 1e-10;
    cfg.step_size = 1.0 / std::max(estimate_lipschitz(d), 1e-300);

    std::vector<std::vector<double>> err(signals.size(), std::vector<double>(ks.size(), 0.0));
    std::vector<char> used(signals.size(), 0);
    parallel_for(signals.size(), threads, [&](std::size_t s) {
        const DenseVec& y = signals[s];
        const double energy = y.squared_norm();
        if (energy == 0.0) return;
        used[s] = 1;
        SparseVec code(d.code_geometry());
        for (std::size_t j = 0; j < ks.size(); ++j) {
            if (ks[j] == 0) {
                err[s][j] = 1.0;
                continue;
            }
            code = iht(y, d, ks[j], cfg, &code);
            err[s][j] = (y - d.apply(code)).squared_norm() / energy;
        }
    });
    std::vector<MtermPoint> out;
    const auto n = static_cast<double>(std::count(used.begin(), used.end(), 1));
    for (std::size_t j = 0; j < ks.size(); ++j) {
        double sum = 0.0;
        for (std::size_t s = 0; s < signals.size(); ++s)
            if (used[s]) sum += err[s][j];
        out.push_back({ks[j], n > 0 ? sum / n : 0.0});
    }
    return out;
}

inline bool non_increasing(const std::vector<MtermPoint>& curve) {
    for (std::size_t j = 1; j < curve.size(); ++j)
        if (curve[j].mean_rel_error > curve[j - 1].mean_rel_error) return false;
    return true;
}

}  // namespace mlcsc
