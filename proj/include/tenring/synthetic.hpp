// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "tenring/random.hpp"
#include "tenring/tensor.hpp"
#include "tenring/tr_factors.hpp"

namespace tenring {

/// Factors with i.i.d. N(0, scale^2) core entries; handy for building
/// tensors of known TR-rank.
inline TRFactors random_factors(const std::vector<index_t>& dims, const std::vector<index_t>& ranks,
                                std::uint64_t seed, double scale = 1.0) {
    detail::require(dims.size() == ranks.size(), "random_factors: dims/ranks length mismatch");
    const index_t n_cores = static_cast<index_t>(dims.size());
    GaussianSampler gauss(seed);
    std::vector<DenseTensor> cores;
    cores.reserve(dims.size());
    for (index_t n = 0; n < n_cores; ++n) {
        DenseTensor core({ranks[n], dims[n], ranks[(n + 1) % n_cores]});
        for (index_t i = 0; i < core.size(); ++i) core[i] = scale * gauss.next();
        cores.push_back(std::move(core));
    }
    return TRFactors(std::move(cores));
}

/// Dense tensor of exact TR-rank `ranks` (generically), reconstructed from
/// random factors.
inline DenseTensor low_rank_tensor(const std::vector<index_t>& dims,
                                   const std::vector<index_t>& ranks, std::uint64_t seed) {
    return reconstruct_full(random_factors(dims, ranks, seed));
}

/// Deterministic stand-in for a natural RGB photo: a sum of separable
/// cosine waves with power-law amplitudes (so mode-1/2 spectra decay the
/// way photographs do), per-channel mixing, and a faint high-frequency
/// texture, affinely mapped to [0, 1].
inline DenseTensor synthetic_image(index_t rows, index_t cols, index_t channels,
                                   std::uint64_t seed) {
    detail::require(rows >= 1 && cols >= 1 && channels >= 1,
                    "synthetic_image: dimensions must be positive");
    const index_t terms = std::min<index_t>(220, std::min(rows, cols));
    SplitMix64 rng(seed);

    Matrix u(rows, terms), v(cols, terms);
    std::vector<Vector> weights(static_cast<std::size_t>(channels), Vector(terms));
    for (index_t k = 0; k < terms; ++k) {
        const double amp = std::pow(static_cast<double>(k + 1), -1.15);
        const double fr = static_cast<double>(k) + rng.next_unit();
        const double fc = static_cast<double>(k) + rng.next_unit();
        const double pr = 2.0 * std::numbers::pi * rng.next_unit();
        const double pc = 2.0 * std::numbers::pi * rng.next_unit();
        for (index_t i = 0; i < rows; ++i)
            u(i, k) = std::cos(std::numbers::pi * fr * (static_cast<double>(i) + 0.5) /
                                   static_cast<double>(rows) +
                               pr);
        for (index_t j = 0; j < cols; ++j)
            v(j, k) = std::cos(std::numbers::pi * fc * (static_cast<double>(j) + 0.5) /
                                   static_cast<double>(cols) +
                               pc);
        for (index_t c = 0; c < channels; ++c) {
            const double phase = 2.0 * std::numbers::pi *
                                 (static_cast<double>(c) / static_cast<double>(channels));
            weights[static_cast<std::size_t>(c)](k) =
                amp * (1.0 + 0.35 * std::cos(phase + 2.0 * std::numbers::pi * rng.next_unit()));
        }
    }

    DenseTensor img({rows, cols, channels});
    for (index_t c = 0; c < channels; ++c) {
        Eigen::Map<Matrix> plane(img.data() + rows * cols * c, rows, cols);
        plane.noalias() = u * weights[static_cast<std::size_t>(c)].asDiagonal() * v.transpose();
    }

    // faint texture so the spectrum has a realistic noise floor
    for (index_t i = 0; i < img.size(); ++i) img[i] += 0.01 * (rng.next_unit() - 0.5);

    Eigen::Map<Vector> flat(img.data(), img.size());
    const double lo = flat.minCoeff();
    const double hi = flat.maxCoeff();
    if (hi > lo) flat = (flat.array() - lo) / (hi - lo);
    return img;
}

}  // namespace tenring
