#pragma once

// Stripe and patch operators with the local (l0,inf / l2,inf) norms.
//
// A patch of width n at signal position i covers positions i, ..., i+n-1.
// The stripe at i collects every representation position whose atom (of
// spatial size n, placed at p*stride) overlaps that patch, i.e. the atoms at
// p*stride in [i-(n-1), i+(n-1)]: a window of width 2n-1 centred on i.
// All windows wrap circularly; a window wider than the axis covers it once.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mlcsc/errors.hpp"
#include "mlcsc/tensor.hpp"

namespace mlcsc {

/// Geometry of the stripes of a representation: spatial atom size and stride.
struct StripeSpec {
    std::size_t atom_size = 1;
    std::size_t stride = 1;
};

namespace detail {

inline std::size_t wrap(long long v, std::size_t n) {
    const auto m = static_cast<long long>(n);
    return static_cast<std::size_t>(((v % m) + m) % m);
}

template <class Vec, class F>
std::vector<double> per_position(const Vec& v, F&& f) {
    const auto& g = v.geometry();
    std::vector<double> acc(g.spatial_len, 0.0);
    if constexpr (requires { v.entries(); }) {
        for (const auto& [i, x] : v.entries()) acc[g.position_of(i)] += f(x);
    } else {
        for (std::size_t i = 0; i < v.size(); ++i) acc[g.position_of(i)] += f(v[i]);
    }
    return acc;
}

}  // namespace detail

/// Representation positions (in local stripe order) of the stripe at signal position i.
inline std::vector<std::size_t> stripe_positions(std::size_t code_len, std::size_t i, std::size_t n,
                                                 std::size_t stride = 1) {
    if (n == 0 || stride == 0) throw DimensionError("stripe_positions: n and stride must be positive");
    const std::size_t signal_len = code_len * stride;
    if (i >= signal_len) {
        throw IndexError("stripe position " + std::to_string(i) + " out of range [0, " +
                         std::to_string(signal_len) + ")");
    }
    const std::size_t width = std::min(2 * n - 1, signal_len);
    const long long start = static_cast<long long>(i) - static_cast<long long>(n - 1);
    std::vector<std::size_t> out;
    out.reserve(width / stride + 1);
    for (std::size_t t = 0; t < width; ++t) {
        const std::size_t q = detail::wrap(start + static_cast<long long>(t), signal_len);
        if (q % stride == 0) out.push_back(q / stride);
    }
    return out;
}

inline std::vector<std::size_t> patch_positions(std::size_t len, std::size_t i, std::size_t n) {
    if (n == 0) throw DimensionError("patch_positions: n must be positive");
    if (i >= len) {
        throw IndexError("patch position " + std::to_string(i) + " out of range [0, " + std::to_string(len) +
                         ")");
    }
    const std::size_t width = std::min(n, len);
    std::vector<std::size_t> out(width);
    for (std::size_t t = 0; t < width; ++t) out[t] = (i + t) % len;
    return out;
}

/// Stripe of gamma at signal position i, re-indexed to local positions.
inline SparseVec extract_stripe(const SparseVec& gamma, std::size_t i, std::size_t n, std::size_t stride = 1) {
    const auto& g = gamma.geometry();
    const auto positions = stripe_positions(g.spatial_len, i, n, stride);
    SparseVec out(SignalGeometry(std::max<std::size_t>(positions.size(), 1), g.channels));
    for (std::size_t local = 0; local < positions.size(); ++local) {
        for (std::size_t ch = 0; ch < g.channels; ++ch) {
            const double v = gamma.get(g.flat(positions[local], ch));
            if (v != 0.0) out.set(local * g.channels + ch, v);
        }
    }
    return out;
}

inline DenseVec extract_patch(const DenseVec& x, std::size_t i, std::size_t n) {
    const auto& g = x.geometry();
    const auto positions = patch_positions(g.spatial_len, i, n);
    DenseVec out(SignalGeometry(positions.size(), g.channels));
    for (std::size_t local = 0; local < positions.size(); ++local) {
        for (std::size_t ch = 0; ch < g.channels; ++ch) out.at(local, ch) = x.at(positions[local], ch);
    }
    return out;
}

namespace detail {

template <class Vec, class F>
double max_over_stripes(const Vec& v, std::size_t n, std::size_t stride, F&& f) {
    const auto acc = per_position(v, f);
    const std::size_t signal_len = v.geometry().spatial_len * stride;
    double best = 0.0;
    for (std::size_t i = 0; i < signal_len; ++i) {
        double s = 0.0;
        for (std::size_t p : stripe_positions(v.geometry().spatial_len, i, n, stride)) s += acc[p];
        best = std::max(best, s);
    }
    return best;
}

template <class Vec, class F>
double max_over_patches(const Vec& v, std::size_t n, F&& f) {
    const auto acc = per_position(v, f);
    const std::size_t len = v.geometry().spatial_len;
    double best = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        double s = 0.0;
        for (std::size_t p : patch_positions(len, i, n)) s += acc[p];
        best = std::max(best, s);
    }
    return best;
}

inline double count_nonzero(double x) { return std::abs(x) >= kZeroThreshold ? 1.0 : 0.0; }
inline double square(double x) { return x * x; }

}  // namespace detail

/// Largest number of non-zeros in any stripe.
inline std::size_t l0_inf_stripe(const SparseVec& gamma, std::size_t n, std::size_t stride = 1) {
    return static_cast<std::size_t>(detail::max_over_stripes(gamma, n, stride, detail::count_nonzero));
}

inline std::size_t l0_inf_stripe(const SparseVec& gamma, const StripeSpec& s) {
    return l0_inf_stripe(gamma, s.atom_size, s.stride);
}

/// Largest number of non-zeros in any width-n patch.
inline std::size_t l0_inf_patch(const SparseVec& gamma, std::size_t n) {
    return static_cast<std::size_t>(detail::max_over_patches(gamma, n, detail::count_nonzero));
}

/// Largest stripe l2 norm.
template <class Vec>
double l2_inf_stripe(const Vec& gamma, std::size_t n, std::size_t stride = 1) {
    return std::sqrt(detail::max_over_stripes(gamma, n, stride, detail::square));
}

/// Largest patch l2 norm.
template <class Vec>
double l2_inf_patch(const Vec& x, std::size_t n) {
    return std::sqrt(detail::max_over_patches(x, n, detail::square));
}

/// Upper bound on the number of width-n patches needed to cover a stripe of
/// width 2*prev_n-1, capped by the axis length.
inline std::size_t patches_per_stripe(std::size_t prev_n, std::size_t n, std::size_t axis_len) {
    const std::size_t width = std::min(2 * prev_n - 1, axis_len);
    return (width + n - 1) / n;
}

}  // namespace mlcsc
