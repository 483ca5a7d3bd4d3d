#pragma once

// Stability-bound evaluators, Stripe-RIP estimation, the local one-sided
// isometry check, non-vanishing-support checks and recovery metrics.
//
// Bound values are NaN whenever the theorem's hypotheses do not hold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlcsc/dictionary.hpp"
#include "mlcsc/errors.hpp"
#include "mlcsc/model.hpp"
#include "mlcsc/pursuit.hpp"
#include "mlcsc/random.hpp"
#include "mlcsc/tensor.hpp"
#include "mlcsc/windows.hpp"

namespace mlcsc {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct LayerBound {
    std::size_t layer = 0;
    bool hypothesis = false;
    double value = kNaN;    // the theorem's bound
    double relaxed = kNaN;  // closed-form relaxation, where the theorem gives one
    bool product_ok = false;
    double product = kNaN;  // thm7 only: unrelaxed product form, needs only the margin and N.V.S.
    double mu = 0.0;
    double lambda = 0.0;
    double c = 1.0;
};

struct BoundReport {
    std::string theorem;
    std::string units;  // "squared_l2" or "patch_l2inf"
    std::vector<LayerBound> layers;
    double e0 = 0.0;
    double eps0 = 0.0;
    double margin = kNaN;  // thm7: coherence margin
    double eps_l = kNaN;   // thm6
    double zeta = kNaN;    // thm6: l1 weight 4 eps0 (full squared-loss form)

    bool all_hypotheses() const {
        return std::all_of(layers.begin(), layers.end(), [](const LayerBound& b) { return b.hypothesis; });
    }
    const LayerBound& at(std::size_t i) const { return layers.at(i - 1); }
};

/// lambda < (1 + 1/mu) / 2, with mu = 0 always admissible.
inline bool coherence_admits(double lambda, double mu, double factor = 0.5, bool strict = true) {
    if (mu <= 0.0) return true;
    const double edge = factor * (1.0 + 1.0 / mu);
    return strict ? lambda < edge : lambda <= edge;
}

namespace detail {

inline void check_sizes(std::size_t a, std::size_t b, const char* where) {
    if (a != b || a == 0) throw DimensionError(std::string(where) + ": per-layer inputs disagree in length");
}

}  // namespace detail

/// |g_i - g^_i|^2 <= 4 E0^2 / (1 - (2 lambda_i - 1) mu(D^(i))) for each layer.
inline BoundReport bound_thm4(const std::vector<double>& mu_eff, const std::vector<double>& lambdas, double e0) {
    detail::check_sizes(mu_eff.size(), lambdas.size(), "bound_thm4");
    BoundReport r{"thm4", "squared_l2", {}, e0};
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        LayerBound b;
        b.layer = i + 1;
        b.mu = mu_eff[i];
        b.lambda = lambdas[i];
        b.hypothesis = coherence_admits(b.lambda, b.mu);
        if (b.hypothesis) b.value = 4.0 * e0 * e0 / (1.0 - (2.0 * b.lambda - 1.0) * b.mu);
        r.layers.push_back(b);
    }
    return r;
}

/// Last-layer error E_L^2 = 4E0^2/(1-(2 lambda_L-1) mu(D^(L))) inflated by
/// prod_{j>i} (1 + (2 lambda_j - 1) mu(D_j)); relaxed form E_L^2 2^(L-i).
inline BoundReport bound_thm4_alt(double mu_eff_last, const std::vector<double>& mu_layers,
                                  const std::vector<double>& lambdas, double e0) {
    detail::check_sizes(mu_layers.size(), lambdas.size(), "bound_thm4_alt");
    const std::size_t L = lambdas.size();
    BoundReport r{"thm4_alt", "squared_l2", {}, e0};
    bool ok = coherence_admits(lambdas[L - 1], mu_eff_last);
    for (std::size_t j = 0; j < L; ++j) ok = ok && coherence_admits(lambdas[j], mu_layers[j]);
    const double el2 = 4.0 * e0 * e0 / (1.0 - (2.0 * lambdas[L - 1] - 1.0) * mu_eff_last);
    for (std::size_t i = 1; i <= L; ++i) {
        LayerBound b;
        b.layer = i;
        b.mu = mu_layers[i - 1];
        b.lambda = lambdas[i - 1];
        b.hypothesis = ok;
        if (ok) {
            double prod = 1.0;
            for (std::size_t j = i + 1; j <= L; ++j) prod *= 1.0 + (2.0 * lambdas[j - 1] - 1.0) * mu_layers[j - 1];
            b.value = el2 * prod;
            b.relaxed = el2 * std::pow(2.0, static_cast<double>(L - i));
        }
        r.layers.push_back(b);
    }
    return r;
}

/// Patch-wise l2,inf bound eps_L prod_{j>i} sqrt(3 c_j / 2), eps_L = 7.5 eps0 sqrt(nnz_patch_L).
/// c[j-1] is c_j (c[0] is unused).
inline BoundReport bound_thm6(double mu_eff_last, const std::vector<double>& mu_layers,
                              const std::vector<double>& lambdas, const std::vector<double>& c, double eps0,
                              double nnz_patch_last) {
    detail::check_sizes(mu_layers.size(), lambdas.size(), "bound_thm6");
    detail::check_sizes(c.size(), lambdas.size(), "bound_thm6");
    const std::size_t L = lambdas.size();
    BoundReport r{"thm6", "patch_l2inf", {}, 0.0, eps0};
    bool ok = coherence_admits(lambdas[L - 1], mu_eff_last, 1.0 / 3.0, false);
    for (std::size_t j = 0; j < L; ++j) ok = ok && coherence_admits(lambdas[j], mu_layers[j]);
    r.eps_l = 7.5 * eps0 * std::sqrt(nnz_patch_last);
    r.zeta = 4.0 * eps0;
    for (std::size_t i = 1; i <= L; ++i) {
        LayerBound b;
        b.layer = i;
        b.mu = mu_layers[i - 1];
        b.lambda = lambdas[i - 1];
        b.c = c[i - 1];
        b.hypothesis = ok;
        if (ok) {
            double prod = 1.0;
            for (std::size_t j = i + 1; j <= L; ++j) prod *= std::sqrt(1.5 * c[j - 1]);
            b.value = r.eps_l * prod;
        }
        r.layers.push_back(b);
    }
    return r;
}

struct Thm7Inputs {
    double mu_eff_last = 0.0;        // mu(D^(L)), normalized
    std::vector<double> mu_layers;   // mu(D_j)
    std::vector<double> lambdas;     // |g_j|^s_{0,inf}
    double e0 = 0.0;                 // |v|_2
    double eps0 = 0.0;               // |v|^p_{2,inf}
    double gamma_min = 0.0;          // smallest |entry| of g_L
    double atom_norm_min = 1.0;      // smallest column norm of D^(L)
};

/// Greedy-case bound E0^2/(1 - mu(D^(L))(lambda_L - 1)) (3/2)^(L-i) and the
/// margin (1 + 1/mu)/2 - (1/mu) eps0/|g_min| - lambda_L.
/// With atom_norm_min < 1 the coefficients are measured against unit-norm
/// atoms: |g_min| becomes w |g_min| and the base term is divided by w^2.
inline BoundReport bound_thm7(const Thm7Inputs& in) {
    detail::check_sizes(in.mu_layers.size(), in.lambdas.size(), "bound_thm7");
    const std::size_t L = in.lambdas.size();
    const double mu = in.mu_eff_last;
    const double lam_l = in.lambdas[L - 1];
    const double w = std::min(in.atom_norm_min, 1.0);
    BoundReport r{"thm7", "squared_l2", {}, in.e0, in.eps0};
    if (mu <= 0.0) {
        r.margin = std::numeric_limits<double>::infinity();
    } else if (in.gamma_min > 0.0) {
        r.margin = 0.5 * (1.0 + 1.0 / mu) - (1.0 / mu) * (in.eps0 / (w * in.gamma_min)) - lam_l;
    } else {
        r.margin = in.eps0 > 0.0 ? -std::numeric_limits<double>::infinity() : 0.5 * (1.0 + 1.0 / mu) - lam_l;
    }
    const bool margin_ok = r.margin > 0.0;
    bool layers_ok = true;
    for (std::size_t j = 0; j < L; ++j) layers_ok = layers_ok && coherence_admits(in.lambdas[j], in.mu_layers[j]);
    const double base = in.e0 * in.e0 / ((1.0 - mu * (lam_l - 1.0)) * w * w);
    for (std::size_t i = 1; i <= L; ++i) {
        LayerBound b;
        b.layer = i;
        b.mu = in.mu_layers[i - 1];
        b.lambda = in.lambdas[i - 1];
        b.hypothesis = margin_ok && layers_ok;
        b.product_ok = margin_ok;
        if (b.hypothesis) b.value = b.relaxed = base * std::pow(1.5, static_cast<double>(L - i));
        if (margin_ok) {
            double prod = 1.0;
            for (std::size_t j = i + 1; j <= L; ++j) prod *= 1.0 + (in.lambdas[j - 1] - 1.0) * in.mu_layers[j - 1];
            b.product = base * prod;
        }
        r.layers.push_back(b);
    }
    return r;
}

/// Layered (DCP) bound 4 E0^2 4^(i-1) prod_{j<=i} 1/(1 - (2 lambda_j - 1) mu(D_j)).
inline BoundReport bound_dcp_layered(const std::vector<double>& mu_layers, const std::vector<double>& lambdas,
                                     double e0) {
    detail::check_sizes(mu_layers.size(), lambdas.size(), "bound_dcp_layered");
    BoundReport r{"dcp_layered", "squared_l2", {}, e0};
    bool ok = true;
    double prod = 1.0;
    for (std::size_t i = 1; i <= lambdas.size(); ++i) {
        LayerBound b;
        b.layer = i;
        b.mu = mu_layers[i - 1];
        b.lambda = lambdas[i - 1];
        ok = ok && coherence_admits(b.lambda, b.mu);
        b.hypothesis = ok;
        if (ok) {
            prod /= 1.0 - (2.0 * b.lambda - 1.0) * b.mu;
            b.value = 4.0 * e0 * e0 * std::pow(4.0, static_cast<double>(i - 1)) * prod;
        }
        r.layers.push_back(b);
    }
    return r;
}

// ------------------------------------------------------------- model inputs

struct CoherenceProfile {
    std::vector<double> effective;          // mu(D^(i))
    std::vector<double> layer;              // mu(D_i)
    std::vector<double> effective_norm_min; // smallest atom norm of D^(i)
    std::vector<double> effective_norm_max;
};

inline CoherenceProfile coherence_profile(const MLCSCModel& model) {
    CoherenceProfile p;
    for (std::size_t i = 1; i <= model.depth(); ++i) {
        const auto& d = model.effective(i);
        p.effective.push_back(mutual_coherence(d));
        p.layer.push_back(mutual_coherence(model.layer(i), model.level_geometry(i - 1).spatial_len));
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (std::size_t f = 0; f < d.num_filters(); ++f) {
            lo = std::min(lo, d.filter_norm(f));
            hi = std::max(hi, d.filter_norm(f));
        }
        p.effective_norm_min.push_back(lo);
        p.effective_norm_max.push_back(hi);
    }
    return p;
}

/// c_j per layer (c_1 = 1).
inline std::vector<double> layer_cs(const MLCSCModel& model) {
    std::vector<double> c(model.depth(), 1.0);
    for (std::size_t i = 2; i <= model.depth(); ++i) c[i - 1] = static_cast<double>(layer_c(model, i));
    return c;
}

inline std::vector<double> as_doubles(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

// ------------------------------------------------------------ Stripe-RIP

struct SupportSpectrum {
    double sigma_min_sq = 1.0;
    double sigma_max_sq = 1.0;
    double delta() const { return std::max(sigma_max_sq - 1.0, 1.0 - sigma_min_sq); }
};

/// Extreme eigenvalues of D_T^T D_T.
template <LinearDictionary Dict>
SupportSpectrum support_spectrum(const Dict& d, const std::vector<std::size_t>& support) {
    if (support.empty()) return {};
    const Eigen::MatrixXd a = gather_columns(d, support);
    const Eigen::MatrixXd gram = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

/// Random support with at most k atoms per stripe: shuffled greedy fill, stopping
/// after `max_atoms` atoms (0 = as many as fit).
template <LinearDictionary Dict>
std::vector<std::size_t> random_stripe_support(const Dict& d, std::size_t k, Rng& rng, std::size_t max_atoms = 0) {
    const SignalGeometry code = d.code_geometry();
    const StripeSpec spec = d.stripe();
    std::vector<std::size_t> order(code.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    SparseVec pattern(code);
    if (k == 0) return {};
    for (std::size_t j : order) {
        if (max_atoms != 0 && pattern.nnz() == max_atoms) break;
        pattern.set(j, 1.0);
        if (l0_inf_stripe(pattern, spec) > k) pattern.set(j, 0.0);
    }
    return pattern.support();
}

template <LinearDictionary Dict>
SparseVec random_code_on(const Dict& d, const std::vector<std::size_t>& support, Rng& rng) {
    SparseVec g(d.code_geometry());
    for (std::size_t j : support) {
        double v = 0.0;
        while (std::abs(v) < kZeroThreshold) v = standard_normal(rng);
        g.set(j, v);
    }
    return g;
}

/// Empirical lower estimate of the Stripe-RIP constant: max over sampled unit
/// k-stripe-sparse g of | |D g|^2 - 1 |.
template <LinearDictionary Dict>
double estimate_stripe_rip(const Dict& d, std::size_t k, std::size_t trials, Rng& rng) {
    double best = 0.0;
    std::uniform_int_distribution<std::size_t> fill(0, 1);
    for (std::size_t t = 0; t < trials; ++t) {
        // alternate between small supports and full greedy fills
        const std::size_t cap_atoms = fill(rng) == 0 ? std::max<std::size_t>(k, 1) : 0;
        const auto support = random_stripe_support(d, k, rng, cap_atoms);
        if (support.empty()) continue;
        SparseVec g = random_code_on(d, support, rng);
        g = (1.0 / g.norm()) * g;
        best = std::max(best, std::abs(d.apply(g).squared_norm() - 1.0));
    }
    return best;
}

/// Gershgorin-type bound (k - 1) mu(D).
inline double coherence_rip_bound(std::size_t k, double mu) { return k == 0 ? 0.0 : static_cast<double>(k - 1) * mu; }

struct IsometryReport {
    std::size_t trials = 0;
    std::size_t violations = 0;
    double worst_ratio = 0.0;  // max lhs / rhs seen
};

/// Local one-sided near isometry: |D g|^{2,p}_{2,inf} <= (1 + delta) |g|^{2,s}_{2,inf}
/// over random k-stripe-sparse g. delta is the exact per-support constant, or
/// (k - 1) mu when `mu` is given.
template <LinearDictionary Dict>
IsometryReport check_local_isometry(const Dict& d, std::size_t k, std::size_t trials, Rng& rng,
                                    std::optional<double> mu = std::nullopt) {
    IsometryReport rep;
    const StripeSpec spec = d.stripe();
    std::uniform_int_distribution<std::size_t> fill(0, 1);
    for (std::size_t t = 0; t < trials; ++t) {
        ++rep.trials;
        const std::size_t cap_atoms = fill(rng) == 0 ? std::max<std::size_t>(k, 1) : 0;
        const auto support = random_stripe_support(d, k, rng, cap_atoms);
        const SparseVec g = random_code_on(d, support, rng);
        const DenseVec x = d.apply(g);
        const double lhs = std::pow(l2_inf_patch(x, spec.atom_size), 2);
        const double stripe = std::pow(l2_inf_stripe(g, spec.atom_size, spec.stride), 2);
        const double one_plus_delta = mu ? 1.0 + coherence_rip_bound(k, *mu) : support_spectrum(d, support).sigma_max_sq;
        const double rhs = one_plus_delta * stripe;
        if (rhs > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, lhs / rhs);
        if (lhs > rhs * (1.0 + 1e-12) + 1e-14) ++rep.violations;
    }
    return rep;
}

// ------------------------------------------------------------------- N.V.S.

/// |D g|_0 equals the number of non-zero rows of D restricted to Supp(g).
template <LinearDictionary Dict>
bool check_nvs(const Dict& d, const SparseVec& g) {
    const DenseVec x = d.apply(g);
    std::size_t nnz = 0;
    for (double v : x.raw())
        if (std::abs(v) > kZeroThreshold) ++nnz;
    return nnz == nonzero_row_count(d, g.support());
}

inline bool check_nvs(const ConvLayer& layer, const SparseVec& g) {
    const EffectiveDict d({layer}, layer.signal_geometry(g.geometry().spatial_len));
    return check_nvs(d, g);
}

// ------------------------------------------------------------------ metrics

struct SupportMetrics {
    double intersection = 1.0;  // |S ∩ S^| / max(|S|, |S^|)
    double rel_error = 0.0;     // |g^ - g|_2 / |g|_2
};

inline SupportMetrics support_metrics(const SparseVec& truth, const SparseVec& est) {
    require_same_geometry(truth.geometry(), est.geometry(), "support_metrics");
    SupportMetrics m;
    if (truth.empty()) {
        m.intersection = est.empty() ? 1.0 : 0.0;
        m.rel_error = est.empty() ? 0.0 : std::numeric_limits<double>::infinity();
        return m;
    }
    std::size_t common = 0;
    for (const auto& [i, v] : est.entries())
        if (truth.entries().count(i)) ++common;
    m.intersection = static_cast<double>(common) / static_cast<double>(std::max(truth.nnz(), est.nnz()));
    m.rel_error = (est - truth).norm() / truth.norm();
    return m;
}

/// Supp(est) ⊆ Supp(truth).
inline bool support_contained(const SparseVec& est, const SparseVec& truth) {
    for (const auto& [i, v] : est.entries())
        if (!truth.entries().count(i)) return false;
    return true;
}

}  // namespace mlcsc
