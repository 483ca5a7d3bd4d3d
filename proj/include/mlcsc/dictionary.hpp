#pragma once

// Linear dictionaries the pursuit algorithms run against:
//   EffectiveDict  D^(i) = D_1 D_2 ... D_i, applied lazily layer by layer
//   DenseDict      an explicit matrix (non-convolutional, test instances)
// plus mutual coherence and support-propagation helpers.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mlcsc/conv_layer.hpp"
#include "mlcsc/errors.hpp"
#include "mlcsc/tensor.hpp"
#include "mlcsc/windows.hpp"

namespace mlcsc {

/// What a sparse coder needs from a dictionary.
template <class D>
concept LinearDictionary = requires(const D& d, const DenseVec& v, std::size_t j) {
    { d.signal_geometry() } -> std::convertible_to<SignalGeometry>;
    { d.code_geometry() } -> std::convertible_to<SignalGeometry>;
    { d.apply(v) } -> std::same_as<DenseVec>;
    { d.adjoint(v) } -> std::same_as<DenseVec>;
    { d.column(j) } -> std::same_as<DenseVec>;
    { d.column_norm(j) } -> std::convertible_to<double>;
    { d.stripe() } -> std::same_as<StripeSpec>;
};

/// Receptive field of the deepest layer: r_1 = n_1, r_j = r_{j-1} + (n_j - 1) * prod_{l<j} s_l.
/// For stride-1 stacks this is sum(n_j) - (L - 1).
inline std::size_t effective_support(const std::vector<ConvLayer>& layers) {
    if (layers.empty()) throw DimensionError("effective_support: empty layer list");
    std::size_t r = layers.front().n();
    std::size_t stride = layers.front().stride();
    for (std::size_t j = 1; j < layers.size(); ++j) {
        r += (layers[j].n() - 1) * stride;
        stride *= layers[j].stride();
    }
    return r;
}

class EffectiveDict {
public:
    EffectiveDict() = default;

    EffectiveDict(std::vector<ConvLayer> layers, SignalGeometry signal)
        : layers_(std::move(layers)), signal_(signal) {
        if (layers_.empty()) throw DimensionError("EffectiveDict: no layers");
        levels_.push_back(signal_);
        for (std::size_t j = 0; j < layers_.size(); ++j) {
            const auto& layer = layers_[j];
            const auto& below = levels_.back();
            if (layer.m_in() != below.channels) {
                throw DimensionError("compose: layer " + std::to_string(j + 1) + " expects " +
                                     std::to_string(layer.m_in()) + " input channels, previous level has " +
                                     std::to_string(below.channels));
            }
            if (layer.n() > below.spatial_len) {
                throw DimensionError("compose: layer " + std::to_string(j + 1) + " filter size exceeds axis length");
            }
            levels_.push_back(layer.code_geometry(below.spatial_len));
        }
        total_stride_ = 1;
        for (const auto& l : layers_) total_stride_ *= l.stride();
        atom_size_ = std::min(effective_support(layers_), signal_.spatial_len);
        build_atoms();
    }

    const std::vector<ConvLayer>& layers() const noexcept { return layers_; }
    std::size_t depth() const noexcept { return layers_.size(); }
    const SignalGeometry& signal_geometry() const noexcept { return signal_; }
    const SignalGeometry& code_geometry() const noexcept { return levels_.back(); }
    /// Geometry of gamma_i (level 0 is the signal).
    const SignalGeometry& level_geometry(std::size_t i) const { return levels_.at(i); }

    std::size_t num_filters() const noexcept { return code_geometry().channels; }
    std::size_t num_atoms() const noexcept { return code_geometry().size(); }
    std::size_t atom_size() const noexcept { return atom_size_; }
    std::size_t total_stride() const noexcept { return total_stride_; }
    StripeSpec stripe() const noexcept { return {atom_size_, total_stride_}; }

    DenseVec apply(const DenseVec& code) const {
        require_same_geometry(code.geometry(), code_geometry(), "EffectiveDict::apply");
        DenseVec v = mlcsc::apply(layers_.back(), code);
        for (std::size_t j = layers_.size() - 1; j-- > 0;) v = mlcsc::apply(layers_[j], v);
        return v;
    }

    DenseVec apply(const SparseVec& code) const {
        require_same_geometry(code.geometry(), code_geometry(), "EffectiveDict::apply");
        DenseVec v = mlcsc::apply(layers_.back(), code);
        for (std::size_t j = layers_.size() - 1; j-- > 0;) v = mlcsc::apply(layers_[j], v);
        return v;
    }

    DenseVec adjoint(const DenseVec& x) const {
        require_same_geometry(x.geometry(), signal_, "EffectiveDict::adjoint");
        DenseVec v = mlcsc::adjoint(layers_.front(), x);
        for (std::size_t j = 1; j < layers_.size(); ++j) v = mlcsc::adjoint(layers_[j], v);
        return v;
    }

    /// Atom of filter f placed at representation position 0.
    const std::vector<std::pair<std::size_t, double>>& filter_atom(std::size_t f) const { return atoms_.at(f); }
    double filter_norm(std::size_t f) const { return norms_.at(f); }

    DenseVec column(std::size_t j) const {
        DenseVec out(signal_);
        const auto& code = code_geometry();
        const std::size_t shift = code.position_of(j) * total_stride_ * signal_.channels;
        const std::size_t total = signal_.size();
        for (const auto& [idx, v] : atoms_.at(code.channel_of(j))) out[(idx + shift) % total] = v;
        return out;
    }

    double column_norm(std::size_t j) const { return norms_.at(code_geometry().channel_of(j)); }

    /// Signal-domain rows touched by atom j (|value| above the zero threshold).
    std::vector<std::size_t> column_rows(std::size_t j) const {
        const auto& code = code_geometry();
        const std::size_t shift = code.position_of(j) * total_stride_ * signal_.channels;
        const std::size_t total = signal_.size();
        std::vector<std::size_t> rows;
        for (const auto& [idx, v] : atoms_.at(code.channel_of(j))) rows.push_back((idx + shift) % total);
        return rows;
    }

    /// D^(i) built from the first i layers.
    EffectiveDict prefix(std::size_t i) const {
        if (i == 0 || i > layers_.size()) throw IndexError("EffectiveDict::prefix: bad depth");
        return EffectiveDict(std::vector<ConvLayer>(layers_.begin(), layers_.begin() + static_cast<long>(i)), signal_);
    }

private:
    void build_atoms() {
        const auto& code = code_geometry();
        atoms_.assign(code.channels, {});
        norms_.assign(code.channels, 0.0);
        for (std::size_t f = 0; f < code.channels; ++f) {
            SparseVec impulse(code);
            impulse.set(code.flat(0, f), 1.0);
            const DenseVec a = apply(impulse);
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (std::abs(a[i]) >= kZeroThreshold) {
                    atoms_[f].emplace_back(i, a[i]);
                    s += a[i] * a[i];
                }
            }
            norms_[f] = std::sqrt(s);
        }
    }

    std::vector<ConvLayer> layers_;
    SignalGeometry signal_;
    std::vector<SignalGeometry> levels_;
    std::size_t total_stride_ = 1;
    std::size_t atom_size_ = 1;
    std::vector<std::vector<std::pair<std::size_t, double>>> atoms_;
    std::vector<double> norms_;
};

inline EffectiveDict compose(std::vector<ConvLayer> layers, SignalGeometry signal) {
    return EffectiveDict(std::move(layers), signal);
}

/// Explicit matrix dictionary. Signals are (1 x rows), codes (1 x cols), so
/// every l0,inf norm reduces to the plain l0 count.
class DenseDict {
public:
    DenseDict() = default;
    explicit DenseDict(Eigen::MatrixXd m) : m_(std::move(m)) {
        if (m_.rows() == 0 || m_.cols() == 0) throw DimensionError("DenseDict: empty matrix");
        norms_ = m_.colwise().norm();
    }

    const Eigen::MatrixXd& matrix() const noexcept { return m_; }
    SignalGeometry signal_geometry() const { return {1, static_cast<std::size_t>(m_.rows())}; }
    SignalGeometry code_geometry() const { return {1, static_cast<std::size_t>(m_.cols())}; }
    std::size_t num_atoms() const noexcept { return static_cast<std::size_t>(m_.cols()); }
    StripeSpec stripe() const noexcept { return {1, 1}; }

    DenseVec apply(const DenseVec& code) const {
        require_same_geometry(code.geometry(), code_geometry(), "DenseDict::apply");
        Eigen::VectorXd x = m_ * Eigen::Map<const Eigen::VectorXd>(code.raw().data(), m_.cols());
        return DenseVec(signal_geometry(), std::vector<double>(x.data(), x.data() + x.size()));
    }
    DenseVec apply(const SparseVec& code) const { return apply(code.to_dense()); }

    DenseVec adjoint(const DenseVec& x) const {
        require_same_geometry(x.geometry(), signal_geometry(), "DenseDict::adjoint");
        Eigen::VectorXd c = m_.transpose() * Eigen::Map<const Eigen::VectorXd>(x.raw().data(), m_.rows());
        return DenseVec(code_geometry(), std::vector<double>(c.data(), c.data() + c.size()));
    }

    DenseVec column(std::size_t j) const {
        const auto col = m_.col(static_cast<Eigen::Index>(j));
        return DenseVec(signal_geometry(), std::vector<double>(col.data(), col.data() + col.size()));
    }
    double column_norm(std::size_t j) const { return norms_(static_cast<Eigen::Index>(j)); }

    std::vector<std::size_t> column_rows(std::size_t j) const {
        std::vector<std::size_t> rows;
        for (Eigen::Index r = 0; r < m_.rows(); ++r) {
            if (std::abs(m_(r, static_cast<Eigen::Index>(j))) >= kZeroThreshold) rows.push_back(static_cast<std::size_t>(r));
        }
        return rows;
    }

private:
    Eigen::MatrixXd m_;
    Eigen::RowVectorXd norms_;
};

/// Largest normalized correlation |<d_i, d_j>| / (|d_i| |d_j|) over distinct atoms.
/// Uses shift invariance: only one spatial period per filter is materialized.
inline double mutual_coherence(const EffectiveDict& d) {
    const auto& signal = d.signal_geometry();
    const std::size_t total = signal.size();
    const std::size_t positions = d.code_geometry().spatial_len;
    const std::size_t quantum = d.total_stride() * signal.channels;
    const std::size_t filters = d.num_filters();
    double best = 0.0;
    std::vector<double> dense(total);
    for (std::size_t f = 0; f < filters; ++f) {
        if (d.filter_norm(f) == 0.0) throw InvariantError("mutual_coherence: zero atom");
        std::fill(dense.begin(), dense.end(), 0.0);
        for (const auto& [idx, v] : d.filter_atom(f)) dense[idx] = v;
        for (std::size_t g = f; g < filters; ++g) {
            const double scale = d.filter_norm(f) * d.filter_norm(g);
            for (std::size_t t = (g == f ? 1 : 0); t < positions; ++t) {
                const std::size_t shift = t * quantum;
                double ip = 0.0;
                for (const auto& [idx, v] : d.filter_atom(g)) ip += v * dense[(idx + shift) % total];
                best = std::max(best, std::abs(ip) / scale);
            }
        }
    }
    return best;
}

inline double mutual_coherence(const DenseDict& d) {
    const auto& m = d.matrix();
    const Eigen::MatrixXd gram = m.transpose() * m;
    double best = 0.0;
    for (Eigen::Index i = 0; i < gram.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < gram.cols(); ++j) {
            best = std::max(best, std::abs(gram(i, j)) / std::sqrt(gram(i, i) * gram(j, j)));
        }
    }
    return best;
}

/// Coherence of a single layer on a signal axis of `signal_len` samples.
/// The filters must already be unit norm.
inline double mutual_coherence(const ConvLayer& layer, std::size_t signal_len) {
    if (!layer.is_normalized()) throw InvariantError("mutual_coherence: layer filters are not unit norm");
    return mutual_coherence(EffectiveDict({layer}, SignalGeometry(signal_len, layer.m_in())));
}

/// Number of signal rows touched by at least one atom in `support`.
template <class Dict>
std::size_t nonzero_row_count(const Dict& d, const std::vector<std::size_t>& support) {
    std::vector<char> hit(d.signal_geometry().size(), 0);
    std::size_t count = 0;
    for (std::size_t j : support) {
        for (std::size_t r : d.column_rows(j)) {
            if (!hit[r]) {
                hit[r] = 1;
                ++count;
            }
        }
    }
    return count;
}

}  // namespace mlcsc
