// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "tenring/random.hpp"
#include "tenring/solvers.hpp"
#include "tenring/tensor.hpp"
#include "tenring/tr_factors.hpp"

namespace tenring {

/// Per-mode projection sizes K_n. K_n = I_n means "leave this mode alone":
/// the mode keeps an identity basis and no randomness is consumed for it.
struct ProjectionSpec {
    std::vector<index_t> sketch_dims;
    std::uint64_t seed = 0;
};

/// Output of the tensor random projection: the shrunken tensor together
/// with one orthonormal basis per mode (identity for skipped modes).
struct SketchResult {
    DenseTensor projected;
    std::vector<Matrix> bases;
};

/// Matrix with i.i.d. standard normal entries drawn from the sampler in
/// column-major order. Deterministic given the sampler state.
inline Matrix gaussian_matrix(index_t rows, index_t cols, GaussianSampler& gauss) {
    detail::require(rows >= 1 && cols >= 1, "gaussian_matrix: dimensions must be positive");
    Matrix m(rows, cols);
    double* p = m.data();
    for (index_t i = 0; i < rows * cols; ++i) p[i] = gauss.next();
    return m;
}

namespace detail {

// Economy QR with the sign convention that every diagonal entry of the
// triangular factor is nonnegative, which makes Q unique for full-rank
// input and runs reproducible.
inline Matrix economy_q(const Matrix& y) {
    const index_t k = std::min(y.rows(), y.cols());
    Eigen::HouseholderQR<Matrix> qr(y);
    Matrix q = qr.householderQ() * Matrix::Identity(y.rows(), k);
    const auto diag = qr.matrixQR().diagonal();
    for (index_t j = 0; j < k; ++j)
        if (diag(j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

}  // namespace detail

/// Tensor random projection, one mode at a time: sketch the current mode-n
/// unfolding with a Gaussian test matrix, orthonormalize by economy QR, and
/// shrink the working tensor with the transposed basis before moving on.
/// The test matrix for mode n is sized against the already-shrunken working
/// tensor, and all draws come from one stream seeded with spec.seed.
inline SketchResult sketch(const DenseTensor& x, const ProjectionSpec& spec) {
    detail::require(static_cast<index_t>(spec.sketch_dims.size()) == x.order(),
                    "sketch: projection size list must match tensor order");
    for (index_t n = 0; n < x.order(); ++n)
        detail::require(spec.sketch_dims[n] >= 1 && spec.sketch_dims[n] <= x.dim(n),
                        "sketch: need 1 <= K_n <= I_n in mode " + std::to_string(n));

    GaussianSampler gauss(spec.seed);
    SketchResult out;
    out.projected = x;
    out.bases.reserve(static_cast<std::size_t>(x.order()));
    for (index_t n = 0; n < x.order(); ++n) {
        const index_t k = spec.sketch_dims[n];
        const index_t dim = x.dim(n);
        if (k == dim) {
            out.bases.push_back(Matrix::Identity(dim, dim));
            continue;
        }
        const Matrix xn = unfold_classic(out.projected, n);
        const Matrix test = gaussian_matrix(xn.cols(), k, gauss);
        Matrix y(dim, k);
        y.noalias() = xn * test;
        Matrix q = detail::economy_q(y);
        out.projected = mode_n_product(out.projected, n, q.transpose());
        out.bases.push_back(std::move(q));
    }
    return out;
}

/// Lift the projected tensor back to full scale through the bases,
/// P x_1 Q_1 x_2 ... x_N Q_N. This is the plain TRP approximation of x.
inline DenseTensor lift_back(const SketchResult& sk) {
    DenseTensor t = sk.projected;
    for (index_t n = 0; n < t.order(); ++n) {
        const Matrix& q = sk.bases[static_cast<std::size_t>(n)];
        if (q.rows() == q.cols() && q.isIdentity(0.0)) continue;
        t = mode_n_product(t, n, q);
    }
    return t;
}

/// Lift small-scale TR cores to full scale: core n is multiplied along its
/// physical (middle) mode by basis Q_n. Identity bases copy the core
/// bit-exactly.
inline TRFactors back_project(const TRFactors& z, const std::vector<Matrix>& bases) {
    detail::require(static_cast<index_t>(bases.size()) == z.order(),
                    "back_project: need one basis per core");
    std::vector<DenseTensor> cores;
    cores.reserve(bases.size());
    for (index_t n = 0; n < z.order(); ++n) {
        const Matrix& q = bases[static_cast<std::size_t>(n)];
        detail::require(q.cols() == z.dim(n),
                        "back_project: basis/core dimension mismatch in mode " + std::to_string(n));
        if (q.rows() == q.cols() && q.isIdentity(0.0)) {
            cores.push_back(z.core(n));
            continue;
        }
        cores.push_back(mode_n_product(z.core(n), 1, q));
    }
    return TRFactors(std::move(cores));
}

namespace detail {

template <typename Solver>
SolveReport randomized_decompose(const DenseTensor& x, const SolverConfig& cfg,
                                 const ProjectionSpec& spec, Solver&& solve_small,
                                 const char* who) {
    const Stopwatch clock;
    if (cfg.ranks) {
        for (index_t n = 0; n < std::min<index_t>(x.order(), static_cast<index_t>(cfg.ranks->size())); ++n)
            if ((*cfg.ranks)[static_cast<std::size_t>(n)] > spec.sketch_dims[static_cast<std::size_t>(n)])
                std::cerr << who << ": warning: rank " << (*cfg.ranks)[static_cast<std::size_t>(n)]
                          << " exceeds projection size " << spec.sketch_dims[static_cast<std::size_t>(n)]
                          << " in mode " << n << "\n";
    }
    SketchResult sk = sketch(x, spec);
    SolveReport inner = solve_small(sk.projected, cfg);
    SolveReport rep;
    rep.factors = back_project(inner.factors, sk.bases);
    rep.rse_history = std::move(inner.rse_history);
    rep.rse_history.push_back(rse(x, reconstruct_full(rep.factors)));
    rep.sweeps_run = inner.sweeps_run;
    rep.elapsed_seconds = clock.seconds();
    return rep;
}

}  // namespace detail

/// Randomized TR decomposition, ALS flavor: sketch, run trals on the small
/// tensor, lift the cores back. The final rse_history entry is measured
/// against the original x.
inline SolveReport rtrals(const DenseTensor& x, const SolverConfig& cfg, const ProjectionSpec& spec) {
    return detail::randomized_decompose(
        x, cfg, spec, [](const DenseTensor& p, const SolverConfig& c) { return trals(p, c); },
        "rtrals");
}

/// Randomized TR decomposition, sequential-SVD flavor.
inline SolveReport rtrsvd(const DenseTensor& x, const SolverConfig& cfg, const ProjectionSpec& spec) {
    return detail::randomized_decompose(
        x, cfg, spec, [](const DenseTensor& p, const SolverConfig& c) { return trsvd(p, c); },
        "rtrsvd");
}

}  // namespace tenring
