#pragma once

// One layer of a multi-layer convolutional dictionary: m_out local filters of
// spatial size n over m_in input channels, placed every `stride` samples on a
// circular axis. Kernels are stored as sparse tap lists.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "mlcsc/errors.hpp"
#include "mlcsc/tensor.hpp"

namespace mlcsc {

struct KernelTap {
    std::uint32_t offset = 0;
    std::uint32_t channel = 0;
    double value = 0.0;

    friend bool operator==(const KernelTap&, const KernelTap&) = default;
};

using Kernel = std::vector<KernelTap>;

class ConvLayer {
public:
    ConvLayer() = default;

    ConvLayer(std::size_t m_in, std::size_t m_out, std::size_t n, std::size_t stride, std::vector<Kernel> kernels)
        : m_in_(m_in), m_out_(m_out), n_(n), stride_(stride), kernels_(std::move(kernels)) {
        if (m_in == 0 || m_out == 0 || n == 0 || stride == 0) {
            throw DimensionError("ConvLayer: m_in, m_out, n and stride must be positive");
        }
        if (kernels_.size() != m_out_) {
            throw DimensionError("ConvLayer: expected " + std::to_string(m_out_) + " kernels, got " +
                                 std::to_string(kernels_.size()));
        }
        for (std::size_t f = 0; f < m_out_; ++f) canonicalize(f);
    }

    /// Builds a layer from dense kernels laid out as [filter][offset * m_in + channel].
    static ConvLayer from_dense(std::size_t m_in, std::size_t n, std::size_t stride,
                                const std::vector<std::vector<double>>& dense) {
        std::vector<Kernel> kernels(dense.size());
        for (std::size_t f = 0; f < dense.size(); ++f) {
            if (dense[f].size() != n * m_in) throw DimensionError("ConvLayer::from_dense: bad kernel size");
            for (std::size_t idx = 0; idx < dense[f].size(); ++idx) {
                if (dense[f][idx] != 0.0) {
                    kernels[f].push_back({static_cast<std::uint32_t>(idx / m_in),
                                          static_cast<std::uint32_t>(idx % m_in), dense[f][idx]});
                }
            }
        }
        return ConvLayer(m_in, dense.size(), n, stride, std::move(kernels));
    }

    std::size_t m_in() const noexcept { return m_in_; }
    std::size_t m_out() const noexcept { return m_out_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t stride() const noexcept { return stride_; }
    const std::vector<Kernel>& kernels() const noexcept { return kernels_; }
    const Kernel& kernel(std::size_t f) const { return kernels_.at(f); }

    /// Size of one dense kernel (n * m_in).
    std::size_t kernel_size() const noexcept { return n_ * m_in_; }

    std::vector<double> dense_kernel(std::size_t f) const {
        std::vector<double> d(kernel_size(), 0.0);
        for (const auto& t : kernels_.at(f)) d[t.offset * m_in_ + t.channel] = t.value;
        return d;
    }

    std::size_t nnz() const noexcept {
        std::size_t s = 0;
        for (const auto& k : kernels_) s += k.size();
        return s;
    }

    /// Non-zeros of the densest filter.
    std::size_t max_filter_nnz() const noexcept {
        std::size_t s = 0;
        for (const auto& k : kernels_) s = std::max(s, k.size());
        return s;
    }

    /// Fraction of zero coefficients across all dense kernels.
    double sparsity() const noexcept {
        return 1.0 - static_cast<double>(nnz()) / static_cast<double>(kernel_size() * m_out_);
    }

    double filter_norm(std::size_t f) const {
        double s = 0.0;
        for (const auto& t : kernels_.at(f)) s += t.value * t.value;
        return std::sqrt(s);
    }

    /// Sum of squared kernel coefficients over all filters.
    double squared_frobenius() const noexcept {
        double s = 0.0;
        for (const auto& k : kernels_)
            for (const auto& t : k) s += t.value * t.value;
        return s;
    }

    bool is_normalized(double tol = 1e-8) const {
        for (std::size_t f = 0; f < m_out_; ++f) {
            if (std::abs(filter_norm(f) - 1.0) > tol) return false;
        }
        return true;
    }

    /// Representation geometry for a signal of the given spatial length.
    SignalGeometry code_geometry(std::size_t signal_len) const {
        if (signal_len % stride_ != 0) {
            throw DimensionError("ConvLayer: stride " + std::to_string(stride_) +
                                 " does not divide signal length " + std::to_string(signal_len));
        }
        return SignalGeometry(signal_len / stride_, m_out_);
    }

    SignalGeometry signal_geometry(std::size_t code_len) const { return SignalGeometry(code_len * stride_, m_in_); }

    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;

private:
    void canonicalize(std::size_t f) {
        auto& k = kernels_[f];
        std::erase_if(k, [](const KernelTap& t) { return t.value == 0.0; });
        for (const auto& t : k) {
            if (t.offset >= n_ || t.channel >= m_in_) {
                throw IndexError("ConvLayer: tap (" + std::to_string(t.offset) + "," + std::to_string(t.channel) +
                                 ") out of bounds in filter " + std::to_string(f));
            }
        }
        std::sort(k.begin(), k.end(), [](const KernelTap& a, const KernelTap& b) {
            return std::tie(a.offset, a.channel) < std::tie(b.offset, b.channel);
        });
        for (std::size_t j = 1; j < k.size(); ++j) {
            if (k[j].offset == k[j - 1].offset && k[j].channel == k[j - 1].channel) {
                throw InvariantError("ConvLayer: duplicate tap in filter " + std::to_string(f));
            }
        }
    }

    std::size_t m_in_ = 1;
    std::size_t m_out_ = 1;
    std::size_t n_ = 1;
    std::size_t stride_ = 1;
    std::vector<Kernel> kernels_;
};

namespace detail {

inline void check_code(const ConvLayer& layer, const SignalGeometry& code) {
    if (code.channels != layer.m_out()) {
        throw DimensionError("ConvLayer::apply: code has " + std::to_string(code.channels) + " channels, layer has " +
                             std::to_string(layer.m_out()) + " filters");
    }
}

inline void scatter_atom(const ConvLayer& layer, std::size_t pos, std::size_t f, double coef, DenseVec& out) {
    const std::size_t signal_len = out.geometry().spatial_len;
    const std::size_t base = pos * layer.stride();
    const std::size_t m_in = layer.m_in();
    double* x = out.raw().data();
    for (const auto& t : layer.kernel(f)) {
        std::size_t p = base + t.offset;
        if (p >= signal_len) p %= signal_len;
        x[p * m_in + t.channel] += coef * t.value;
    }
}

}  // namespace detail

/// x = D gamma for a dense representation.
inline DenseVec apply(const ConvLayer& layer, const DenseVec& gamma) {
    const auto& g = gamma.geometry();
    detail::check_code(layer, g);
    DenseVec out(layer.signal_geometry(g.spatial_len));
    for (std::size_t p = 0; p < g.spatial_len; ++p) {
        for (std::size_t f = 0; f < g.channels; ++f) {
            const double c = gamma.at(p, f);
            if (c != 0.0) detail::scatter_atom(layer, p, f, c, out);
        }
    }
    return out;
}

inline DenseVec apply(const ConvLayer& layer, const SparseVec& gamma) {
    const auto& g = gamma.geometry();
    detail::check_code(layer, g);
    DenseVec out(layer.signal_geometry(g.spatial_len));
    for (const auto& [i, c] : gamma.entries()) detail::scatter_atom(layer, g.position_of(i), g.channel_of(i), c, out);
    return out;
}

/// Checked variant: the caller states the expected output geometry.
template <class Code>
DenseVec apply(const ConvLayer& layer, const Code& gamma, const SignalGeometry& out_geometry) {
    require_same_geometry(layer.signal_geometry(gamma.geometry().spatial_len), out_geometry, "ConvLayer::apply");
    return apply(layer, gamma);
}

/// gamma = D^T x.
inline DenseVec adjoint(const ConvLayer& layer, const DenseVec& x) {
    const auto& g = x.geometry();
    if (g.channels != layer.m_in()) {
        throw DimensionError("ConvLayer::adjoint: signal has " + std::to_string(g.channels) +
                             " channels, layer expects " + std::to_string(layer.m_in()));
    }
    const auto code = layer.code_geometry(g.spatial_len);
    DenseVec out(code);
    const std::size_t signal_len = g.spatial_len;
    const std::size_t m_in = layer.m_in();
    const double* xs = x.raw().data();
    for (std::size_t p = 0; p < code.spatial_len; ++p) {
        const std::size_t base = p * layer.stride();
        for (std::size_t f = 0; f < layer.m_out(); ++f) {
            double s = 0.0;
            for (const auto& t : layer.kernel(f)) {
                std::size_t q = base + t.offset;
                if (q >= signal_len) q %= signal_len;
                s += xs[q * m_in + t.channel] * t.value;
            }
            out.at(p, f) = s;
        }
    }
    return out;
}

/// Scales every filter to unit l2 norm; a zero filter is an error.
inline ConvLayer normalize(const ConvLayer& layer) {
    std::vector<Kernel> kernels = layer.kernels();
    for (std::size_t f = 0; f < kernels.size(); ++f) {
        const double nrm = layer.filter_norm(f);
        if (nrm == 0.0) throw InvariantError("normalize: filter " + std::to_string(f) + " is zero");
        for (auto& t : kernels[f]) t.value /= nrm;
    }
    return ConvLayer(layer.m_in(), layer.m_out(), layer.n(), layer.stride(), std::move(kernels));
}

}  // namespace mlcsc
