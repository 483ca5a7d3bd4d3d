#pragma once

// Dense and sparse signal containers over a 1-D circular spatial axis with
// channels. Flat layout is channel-major within a spatial position:
//   index = position * channels + channel

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mlcsc/errors.hpp"

namespace mlcsc {

/// Entries whose magnitude falls below this are treated as zero.
inline constexpr double kZeroThreshold = 1e-12;

struct SignalGeometry {
    std::size_t spatial_len = 1;
    std::size_t channels = 1;

    SignalGeometry() = default;
    SignalGeometry(std::size_t len, std::size_t ch) : spatial_len(len), channels(ch) {
        if (len == 0 || ch == 0) {
            throw DimensionError("SignalGeometry: spatial_len and channels must be positive");
        }
    }

    std::size_t size() const noexcept { return spatial_len * channels; }
    std::size_t flat(std::size_t pos, std::size_t ch) const noexcept { return pos * channels + ch; }
    std::size_t position_of(std::size_t index) const noexcept { return index / channels; }
    std::size_t channel_of(std::size_t index) const noexcept { return index % channels; }

    friend bool operator==(const SignalGeometry&, const SignalGeometry&) = default;
};

inline std::string to_string(const SignalGeometry& g) {
    return "(" + std::to_string(g.spatial_len) + "x" + std::to_string(g.channels) + ")";
}

inline void require_same_geometry(const SignalGeometry& a, const SignalGeometry& b, const char* where) {
    if (a != b) {
        throw DimensionError(std::string(where) + ": geometry mismatch " + to_string(a) + " vs " +
                             to_string(b));
    }
}

class DenseVec {
public:
    DenseVec() = default;
    explicit DenseVec(SignalGeometry g) : geometry_(g), values_(g.size(), 0.0) {}
    DenseVec(SignalGeometry g, std::vector<double> values) : geometry_(g), values_(std::move(values)) {
        if (values_.size() != geometry_.size()) {
            throw DimensionError("DenseVec: value count does not match geometry " + to_string(g));
        }
    }

    const SignalGeometry& geometry() const noexcept { return geometry_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double& at(std::size_t pos, std::size_t ch) noexcept { return values_[geometry_.flat(pos, ch)]; }
    double at(std::size_t pos, std::size_t ch) const noexcept { return values_[geometry_.flat(pos, ch)]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    std::vector<double>& raw() noexcept { return values_; }
    const std::vector<double>& raw() const noexcept { return values_; }

    double squared_norm() const noexcept {
        double s = 0.0;
        for (double v : values_) s += v * v;
        return s;
    }
    double norm() const noexcept { return std::sqrt(squared_norm()); }

    DenseVec& operator+=(const DenseVec& o) {
        require_same_geometry(geometry_, o.geometry_, "DenseVec::operator+=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    DenseVec& operator-=(const DenseVec& o) {
        require_same_geometry(geometry_, o.geometry_, "DenseVec::operator-=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    DenseVec& operator*=(double a) noexcept {
        for (double& v : values_) v *= a;
        return *this;
    }

    friend DenseVec operator+(DenseVec a, const DenseVec& b) { return a += b; }
    friend DenseVec operator-(DenseVec a, const DenseVec& b) { return a -= b; }
    friend DenseVec operator*(double s, DenseVec a) { return a *= s; }

    /// this += alpha * x
    void axpy(double alpha, const DenseVec& x) {
        require_same_geometry(geometry_, x.geometry_, "DenseVec::axpy");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += alpha * x.values_[i];
    }

private:
    SignalGeometry geometry_;
    std::vector<double> values_;
};

inline double dot(const DenseVec& a, const DenseVec& b) {
    require_same_geometry(a.geometry(), b.geometry(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Sparse vector: ordered flat index -> value, never storing (near-)zeros.
class SparseVec {
public:
    using Map = std::map<std::size_t, double>;

    SparseVec() = default;
    explicit SparseVec(SignalGeometry g) : geometry_(g) {}

    static SparseVec from_dense(const DenseVec& d) {
        SparseVec s(d.geometry());
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (std::abs(d[i]) >= kZeroThreshold) s.entries_.emplace_hint(s.entries_.end(), i, d[i]);
        }
        return s;
    }

    DenseVec to_dense() const {
        DenseVec d(geometry_);
        for (const auto& [i, v] : entries_) d[i] = v;
        return d;
    }

    const SignalGeometry& geometry() const noexcept { return geometry_; }
    const Map& entries() const noexcept { return entries_; }
    std::size_t nnz() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    /// Stores v at index i; values below the zero threshold erase the entry.
    void set(std::size_t i, double v) {
        if (i >= geometry_.size()) {
            throw IndexError("SparseVec::set: index " + std::to_string(i) + " out of range for " +
                             to_string(geometry_));
        }
        if (std::abs(v) < kZeroThreshold) {
            entries_.erase(i);
        } else {
            entries_[i] = v;
        }
    }

    double get(std::size_t i) const {
        auto it = entries_.find(i);
        return it == entries_.end() ? 0.0 : it->second;
    }

    std::vector<std::size_t> support() const {
        std::vector<std::size_t> s;
        s.reserve(entries_.size());
        for (const auto& e : entries_) s.push_back(e.first);
        return s;
    }

    double squared_norm() const noexcept {
        double s = 0.0;
        for (const auto& e : entries_) s += e.second * e.second;
        return s;
    }
    double norm() const noexcept { return std::sqrt(squared_norm()); }
    double l1_norm() const noexcept {
        double s = 0.0;
        for (const auto& e : entries_) s += std::abs(e.second);
        return s;
    }

    /// Smallest magnitude over the support; 0 for the empty vector.
    double min_abs() const noexcept {
        if (entries_.empty()) return 0.0;
        double m = std::abs(entries_.begin()->second);
        for (const auto& e : entries_) m = std::min(m, std::abs(e.second));
        return m;
    }

private:
    SignalGeometry geometry_;
    Map entries_;
};

inline SparseVec operator-(const SparseVec& a, const SparseVec& b) {
    require_same_geometry(a.geometry(), b.geometry(), "SparseVec::operator-");
    SparseVec out = a;
    for (const auto& [i, v] : b.entries()) out.set(i, out.get(i) - v);
    return out;
}

inline SparseVec operator+(const SparseVec& a, const SparseVec& b) {
    require_same_geometry(a.geometry(), b.geometry(), "SparseVec::operator+");
    SparseVec out = a;
    for (const auto& [i, v] : b.entries()) out.set(i, out.get(i) + v);
    return out;
}

inline SparseVec operator*(double s, const SparseVec& a) {
    SparseVec out(a.geometry());
    for (const auto& [i, v] : a.entries()) out.set(i, s * v);
    return out;
}

}  // namespace mlcsc
