#pragma once

// Single-dictionary sparse coders: OMP, Subspace Pursuit, FISTA and IHT.
// All of them work against any LinearDictionary; atoms are ranked by
// normalized correlation |<r, d_j>| / |d_j| with ties going to the lowest index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlcsc/dictionary.hpp"
#include "mlcsc/errors.hpp"
#include "mlcsc/random.hpp"
#include "mlcsc/tensor.hpp"
#include "mlcsc/windows.hpp"

namespace mlcsc {

enum class Method { OMP, SubspacePursuit, FISTA, IHT };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::OMP: return "omp";
        case Method::SubspacePursuit: return "sp";
        case Method::FISTA: return "fista";
        case Method::IHT: return "iht";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "omp") return Method::OMP;
    if (s == "sp") return Method::SubspacePursuit;
    if (s == "fista") return Method::FISTA;
    if (s == "iht") return Method::IHT;
    throw ParameterError("unknown pursuit method '" + s + "'");
}

struct PursuitConfig {
    Method method = Method::OMP;
    std::optional<std::size_t> k;          // OMP iterations / SP and IHT cardinality
    std::optional<std::size_t> l0inf_cap;  // per-stripe cap for OMP
    double lambda_l1 = 0.0;                // FISTA penalty (half-squared-loss form)
    std::size_t max_iters = 1000;
    double tol = 1e-10;
    std::optional<double> step_size;       // FISTA / IHT, default 1/L
    bool skip_violations = false;          // capped OMP: skip offending atoms instead of stopping
    std::optional<StripeSpec> cap_stripe;  // stripe geometry for the cap; defaults to the dictionary's

    void validate() const {
        if (!(tol > 0.0)) throw ParameterError("PursuitConfig: tol must be positive");
        if (k && *k == 0 && method != Method::IHT) throw ParameterError("PursuitConfig: k must be >= 1");
        if (step_size && !(*step_size > 0.0)) throw ParameterError("PursuitConfig: step_size must be positive");
        switch (method) {
            case Method::SubspacePursuit:
            case Method::IHT:
                if (!k) throw ParameterError(std::string("PursuitConfig: ") + to_string(method) + " needs k");
                break;
            case Method::FISTA:
                if (!(lambda_l1 > 0.0)) throw ParameterError("PursuitConfig: lambda_l1 must be positive");
                break;
            case Method::OMP:
                break;
        }
    }
};

// ---------------------------------------------------------------- thresholds

namespace detail {

/// Indices of the k largest |v_i|, ties to the lowest index, returned sorted ascending.
inline std::vector<std::size_t> top_k(const std::vector<double>& score, std::size_t k) {
    std::vector<std::size_t> idx(score.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, idx.size());
    auto better = [&](std::size_t a, std::size_t b) {
        return score[a] > score[b] || (score[a] == score[b] && a < b);
    };
    std::nth_element(idx.begin(), idx.begin() + static_cast<long>(k), idx.end(), better);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace detail

/// Keeps the k largest-magnitude entries; ties at the k-th magnitude go to the lowest index.
inline std::vector<double> hard_threshold(const std::vector<double>& v, std::size_t k) {
    std::vector<double> mag(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) mag[i] = std::abs(v[i]);
    std::vector<double> out(v.size(), 0.0);
    for (std::size_t i : detail::top_k(mag, k)) out[i] = v[i];
    return out;
}

inline DenseVec hard_threshold(const DenseVec& v, std::size_t k) {
    return DenseVec(v.geometry(), hard_threshold(v.raw(), k));
}

inline std::vector<double> soft_threshold(const std::vector<double>& v, double tau) {
    if (tau < 0.0) throw ParameterError("soft_threshold: negative threshold");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]) - tau;
        out[i] = a > 0.0 ? std::copysign(a, v[i]) : 0.0;
    }
    return out;
}

inline DenseVec soft_threshold(const DenseVec& v, double tau) {
    return DenseVec(v.geometry(), soft_threshold(v.raw(), tau));
}

// ------------------------------------------------------------ linear algebra

/// Largest eigenvalue of D^T D by power iteration from a fixed start vector.
template <LinearDictionary Dict>
double estimate_lipschitz(const Dict& d, std::size_t iters = 50) {
    DenseVec v(d.code_geometry());
    Rng rng(0x5eedULL);
    for (auto& x : v.raw()) x = standard_normal(rng);
    double lam = 0.0;
    v *= 1.0 / v.norm();
    for (std::size_t it = 0; it < iters; ++it) {
        DenseVec w = d.adjoint(d.apply(v));
        lam = w.norm();
        if (lam == 0.0) return 0.0;
        w *= 1.0 / lam;
        v = std::move(w);
    }
    return lam;
}

template <LinearDictionary Dict>
Eigen::MatrixXd gather_columns(const Dict& d, const std::vector<std::size_t>& support) {
    const auto rows = static_cast<Eigen::Index>(d.signal_geometry().size());
    Eigen::MatrixXd a(rows, static_cast<Eigen::Index>(support.size()));
    for (std::size_t c = 0; c < support.size(); ++c) {
        const DenseVec col = d.column(support[c]);
        a.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(col.raw().data(), rows);
    }
    return a;
}

namespace detail {

inline Eigen::VectorXd conjugate_gradient(const Eigen::MatrixXd& g, const Eigen::VectorXd& b, double tol) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    Eigen::VectorXd r = b;
    Eigen::VectorXd p = r;
    double rs = r.squaredNorm();
    const double stop = tol * tol * std::max(b.squaredNorm(), 1e-300);
    for (Eigen::Index it = 0; it < 10 * b.size() && rs > stop; ++it) {
        const Eigen::VectorXd gp = g * p;
        const double denom = p.dot(gp);
        if (!(denom > 0.0)) return Eigen::VectorXd();
        const double alpha = rs / denom;
        x += alpha * p;
        r -= alpha * gp;
        const double rs_new = r.squaredNorm();
        p = r + (rs_new / rs) * p;
        rs = rs_new;
    }
    if (rs > stop) return Eigen::VectorXd();
    return x;
}

}  // namespace detail

/// Least-squares coefficients of y on the atoms in `support`.
/// Normal equations via Cholesky for up to 200 atoms, conjugate gradient beyond.
template <LinearDictionary Dict>
std::vector<double> least_squares(const Dict& d, const std::vector<std::size_t>& support, const DenseVec& y) {
    if (support.empty()) return {};
    const Eigen::MatrixXd a = gather_columns(d, support);
    const Eigen::Map<const Eigen::VectorXd> yv(y.raw().data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::MatrixXd gram = a.transpose() * a;
    const Eigen::VectorXd rhs = a.transpose() * yv;
    Eigen::VectorXd coef;
    if (support.size() <= 200) {
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        bool ok = llt.info() == Eigen::Success;
        if (ok) {
            const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
            const double scale = gram.diagonal().maxCoeff();
            ok = diag.minCoeff() > 1e-7 * std::sqrt(scale);
        }
        if (ok) coef = llt.solve(rhs);
    } else {
        coef = detail::conjugate_gradient(gram, rhs, 1e-10);
    }
    if (coef.size() == 0 || !coef.allFinite()) {
        throw RankDeficientError("least_squares: support system is rank deficient", support);
    }
    return std::vector<double>(coef.data(), coef.data() + coef.size());
}

template <LinearDictionary Dict>
SparseVec make_code(const Dict& d, const std::vector<std::size_t>& support, const std::vector<double>& coef) {
    SparseVec g(d.code_geometry());
    for (std::size_t c = 0; c < support.size(); ++c) g.set(support[c], coef[c]);
    return g;
}

template <LinearDictionary Dict>
DenseVec residual(const Dict& d, const DenseVec& y, const SparseVec& code) {
    return y - d.apply(code);
}

namespace detail {

template <LinearDictionary Dict>
std::vector<double> normalized_scores(const Dict& d, const DenseVec& r) {
    const DenseVec corr = d.adjoint(r);
    std::vector<double> s(corr.size());
    for (std::size_t j = 0; j < corr.size(); ++j) {
        const double nrm = d.column_norm(j);
        s[j] = nrm > 0.0 ? std::abs(corr[j]) / nrm : 0.0;
    }
    return s;
}

inline bool within_cap(const SparseVec& pattern, const StripeSpec& spec, std::size_t cap) {
    return l0_inf_stripe(pattern, spec) <= cap;
}

}  // namespace detail

// ----------------------------------------------------------------------- OMP

struct OmpTrace {
    std::vector<double> residual_norms;  // after each refit, starting with the warm-start residual
    std::vector<std::size_t> support_sizes;
    bool stopped_on_cap = false;
};

/// Orthogonal Matching Pursuit. With `warm_support` the run resumes from that
/// support (refit first); k then counts the total cardinality.
template <LinearDictionary Dict>
SparseVec omp(const DenseVec& y, const Dict& d, const PursuitConfig& cfg,
              const std::vector<std::size_t>& warm_support = {}, OmpTrace* trace = nullptr) {
    cfg.validate();
    require_same_geometry(y.geometry(), d.signal_geometry(), "omp");
    const std::size_t atoms = d.code_geometry().size();
    const std::size_t target = std::min(cfg.k.value_or(atoms), atoms);
    const StripeSpec spec = cfg.cap_stripe.value_or(d.stripe());

    std::vector<std::size_t> support = warm_support;
    std::sort(support.begin(), support.end());
    std::vector<char> chosen(atoms, 0);
    std::vector<char> banned(atoms, 0);
    SparseVec pattern(d.code_geometry());
    for (std::size_t j : support) {
        chosen.at(j) = 1;
        pattern.set(j, 1.0);
    }
    std::vector<double> coef = least_squares(d, support, y);
    DenseVec r = y - d.apply(make_code(d, support, coef));
    if (trace) {
        trace->residual_norms.push_back(r.norm());
        trace->support_sizes.push_back(support.size());
    }

    while (support.size() < target && r.norm() > cfg.tol) {
        const auto score = detail::normalized_scores(d, r);
        std::size_t pick = atoms;
        double best = 0.0;
        for (std::size_t j = 0; j < atoms; ++j) {
            if (chosen[j] || banned[j]) continue;
            if (score[j] > best) {
                best = score[j];
                pick = j;
            }
        }
        if (pick == atoms || best <= 1e-14 * std::max(1.0, r.norm())) break;
        if (cfg.l0inf_cap) {
            pattern.set(pick, 1.0);
            if (!detail::within_cap(pattern, spec, *cfg.l0inf_cap)) {
                pattern.set(pick, 0.0);
                if (trace) trace->stopped_on_cap = true;
                if (cfg.skip_violations) {
                    banned[pick] = 1;
                    continue;
                }
                break;
            }
        }
        chosen[pick] = 1;
        support.insert(std::lower_bound(support.begin(), support.end(), pick), pick);
        coef = least_squares(d, support, y);
        r = y - d.apply(make_code(d, support, coef));
        if (trace) {
            trace->residual_norms.push_back(r.norm());
            trace->support_sizes.push_back(support.size());
        }
    }
    return make_code(d, support, coef);
}

// --------------------------------------------------------- Subspace Pursuit

template <LinearDictionary Dict>
SparseVec subspace_pursuit(const DenseVec& y, const Dict& d, std::size_t k, PursuitConfig cfg) {
    cfg.method = Method::SubspacePursuit;
    cfg.k = k;
    cfg.validate();
    require_same_geometry(y.geometry(), d.signal_geometry(), "subspace_pursuit");
    const std::size_t atoms = d.code_geometry().size();
    const std::size_t rows = d.signal_geometry().size();
    k = std::min({k, atoms, rows});
    if (y.norm() <= cfg.tol) return SparseVec(d.code_geometry());

    std::vector<std::size_t> support = detail::top_k(detail::normalized_scores(d, y), k);
    std::vector<double> coef = least_squares(d, support, y);
    DenseVec r = y - d.apply(make_code(d, support, coef));
    double rnorm = r.norm();

    for (std::size_t it = 0; it < cfg.max_iters && rnorm > cfg.tol; ++it) {
        auto score = detail::normalized_scores(d, r);
        for (std::size_t j : support) score[j] = -1.0;
        const std::size_t extra = std::min(k, rows - std::min(rows, support.size()));
        std::vector<std::size_t> merged = support;
        for (std::size_t j : detail::top_k(score, extra)) merged.push_back(j);
        std::sort(merged.begin(), merged.end());

        const auto wide = least_squares(d, merged, y);
        std::vector<double> weight(atoms, -1.0);
        for (std::size_t c = 0; c < merged.size(); ++c) weight[merged[c]] = std::abs(wide[c]) * d.column_norm(merged[c]);
        std::vector<std::size_t> pruned = detail::top_k(weight, k);

        auto next_coef = least_squares(d, pruned, y);
        DenseVec next_r = y - d.apply(make_code(d, pruned, next_coef));
        const double next_norm = next_r.norm();
        if (next_norm >= rnorm) break;
        support = std::move(pruned);
        coef = std::move(next_coef);
        r = std::move(next_r);
        rnorm = next_norm;
    }
    return make_code(d, support, coef);
}

// --------------------------------------------------------------------- FISTA

/// 1/2 |y - D g|^2 + lambda |g|_1
template <LinearDictionary Dict>
double lasso_objective(const Dict& d, const DenseVec& y, const DenseVec& g, double lambda) {
    double l1 = 0.0;
    for (double v : g.raw()) l1 += std::abs(v);
    return 0.5 * (y - d.apply(g)).squared_norm() + lambda * l1;
}

/// FISTA for min 1/2 |y - D g|^2 + lambda |g|_1 with restart on objective increase.
/// Returns the last proximal (non-extrapolated) iterate.
template <LinearDictionary Dict>
SparseVec fista_lasso(const DenseVec& y, const Dict& d, double lambda, PursuitConfig cfg) {
    cfg.method = Method::FISTA;
    cfg.lambda_l1 = lambda;
    cfg.validate();
    require_same_geometry(y.geometry(), d.signal_geometry(), "fista_lasso");
    const double step = cfg.step_size ? *cfg.step_size : 1.0 / std::max(estimate_lipschitz(d), 1e-300);

    auto prox_step = [&](const DenseVec& z) {
        DenseVec grad = d.adjoint(d.apply(z) - y);
        DenseVec v = z;
        v.axpy(-step, grad);
        return soft_threshold(v, step * lambda);
    };

    DenseVec x(d.code_geometry());
    DenseVec z = x;
    double t = 1.0;
    double f_prev = lasso_objective(d, y, x, lambda);
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        DenseVec x_new = prox_step(z);
        double f_new = lasso_objective(d, y, x_new, lambda);
        if (f_new > f_prev) {
            t = 1.0;
            x_new = prox_step(x);
            f_new = lasso_objective(d, y, x_new, lambda);
        }
        const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = x_new;
        DenseVec diff = x_new - x;
        z.axpy((t - 1.0) / t_new, diff);
        t = t_new;
        const double change = std::abs(f_prev - f_new);
        x = std::move(x_new);
        const bool done = change <= cfg.tol * std::max(f_prev, 1e-300);
        f_prev = std::min(f_prev, f_new);
        if (done) break;
    }
    return SparseVec::from_dense(x);
}

// ----------------------------------------------------------------------- IHT

/// Iterative hard thresholding g <- H_k(g + step D^T (y - D g)).
/// Returns the iterate with the smallest residual seen, the start included.
template <LinearDictionary Dict>
SparseVec iht(const DenseVec& y, const Dict& d, std::size_t k, PursuitConfig cfg,
              const SparseVec* warm = nullptr) {
    cfg.method = Method::IHT;
    cfg.k = k;
    cfg.validate();
    require_same_geometry(y.geometry(), d.signal_geometry(), "iht");
    const double step = cfg.step_size ? *cfg.step_size : 1.0 / std::max(estimate_lipschitz(d), 1e-300);

    if (warm) require_same_geometry(warm->geometry(), d.code_geometry(), "iht warm start");
    DenseVec g = warm ? hard_threshold(warm->to_dense(), k) : DenseVec(d.code_geometry());
    DenseVec r = y - d.apply(g);
    DenseVec best = g;
    double best_norm = r.norm();
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        DenseVec v = g;
        v.axpy(step, d.adjoint(r));
        DenseVec next = hard_threshold(v, k);
        for (double& x : next.raw())
            if (std::abs(x) < kZeroThreshold) x = 0.0;
        DenseVec delta = next - g;
        g = std::move(next);
        r = y - d.apply(g);
        const double rn = r.norm();
        if (rn < best_norm) {
            best_norm = rn;
            best = g;
        }
        if (delta.norm() <= cfg.tol * std::max(1.0, g.norm())) break;
    }
    return SparseVec::from_dense(best);
}

/// Dispatches on cfg.method.
template <LinearDictionary Dict>
SparseVec sparse_code(const DenseVec& y, const Dict& d, const PursuitConfig& cfg) {
    switch (cfg.method) {
        case Method::OMP: return omp(y, d, cfg);
        case Method::SubspacePursuit: cfg.validate(); return subspace_pursuit(y, d, *cfg.k, cfg);
        case Method::FISTA: return fista_lasso(y, d, cfg.lambda_l1, cfg);
        case Method::IHT: cfg.validate(); return iht(y, d, *cfg.k, cfg);
    }
    throw ParameterError("sparse_code: unknown method");
}

}  // namespace mlcsc
