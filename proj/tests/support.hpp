#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mlcsc/mlcsc.hpp"

namespace testing_support {

using namespace mlcsc;

inline DenseVec random_dense(const SignalGeometry& g, Rng& rng) {
    DenseVec v(g);
    for (double& x : v.raw()) x = standard_normal(rng);
    return v;
}

/// nnz distinct random positions with Gaussian values.
inline SparseVec random_sparse(const SignalGeometry& g, std::size_t nnz, Rng& rng) {
    std::vector<std::size_t> idx(g.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    SparseVec s(g);
    for (std::size_t t = 0; t < std::min(nnz, idx.size()); ++t) {
        double v = 0.0;
        while (std::abs(v) < 1e-3) v = standard_normal(rng);
        s.set(idx[t], v);
    }
    return s;
}

/// Random layer whose filters keep `taps` random coordinates each (0 = dense).
inline ConvLayer sparse_random_layer(std::size_t m_in, std::size_t m_out, std::size_t n, std::size_t stride,
                                     std::size_t taps, Rng& rng) {
    std::vector<Kernel> kernels(m_out);
    std::vector<std::uint32_t> pool(n * m_in);
    for (auto& k : kernels) {
        for (std::uint32_t i = 0; i < pool.size(); ++i) pool[i] = i;
        std::shuffle(pool.begin(), pool.end(), rng);
        const std::size_t keep = taps == 0 ? pool.size() : std::min(taps, pool.size());
        for (std::size_t t = 0; t < keep; ++t)
            k.push_back({static_cast<std::uint32_t>(pool[t] / m_in), static_cast<std::uint32_t>(pool[t] % m_in),
                         standard_normal(rng)});
    }
    return normalize(ConvLayer(m_in, m_out, n, stride, std::move(kernels)));
}

inline Eigen::MatrixXd random_unit_columns(std::size_t rows, std::size_t cols, Rng& rng) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = standard_normal(rng);
        m.col(j).normalize();
    }
    return m;
}

}  // namespace testing_support
