// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tenring/io.hpp"
#include "tenring/tensor.hpp"

namespace tenring {

/// Tensor-ring factors: an ordered list of N third-order cores, core n of
/// shape (R_n, I_n, R_{n+1}) with the circular convention R_{N+1} = R_1.
/// An order-N tensor is recovered from them as
///
///     X(i_1, ..., i_N) = Trace( G_1(i_1) G_2(i_2) ... G_N(i_N) ),
///
/// where G_n(i) is the i-th mode-2 slice of core n, an R_n x R_{n+1}
/// matrix. Any positive rank vector is accepted.
class TRFactors {
public:
    TRFactors() = default;

    explicit TRFactors(std::vector<DenseTensor> cores) : cores_(std::move(cores)) {
        detail::require(!cores_.empty(), "TRFactors: need at least one core");
        const index_t n_cores = order();
        for (index_t n = 0; n < n_cores; ++n) {
            detail::require(cores_[n].order() == 3,
                            "TRFactors: core " + std::to_string(n) + " is not third-order");
            const index_t next = (n + 1) % n_cores;
            detail::require(cores_[n].dim(2) == cores_[next].dim(0),
                            "TRFactors: rank mismatch between cores " + std::to_string(n) +
                                " and " + std::to_string(next));
        }
    }

    index_t order() const { return static_cast<index_t>(cores_.size()); }

    const DenseTensor& core(index_t n) const { return cores_[static_cast<std::size_t>(n)]; }
    DenseTensor& core(index_t n) { return cores_[static_cast<std::size_t>(n)]; }
    const std::vector<DenseTensor>& cores() const { return cores_; }

    index_t rank(index_t n) const { return core(n).dim(0); }
    index_t dim(index_t n) const { return core(n).dim(1); }

    std::vector<index_t> ranks() const {
        std::vector<index_t> r(static_cast<std::size_t>(order()));
        for (index_t n = 0; n < order(); ++n) r[n] = rank(n);
        return r;
    }

    std::vector<index_t> dims() const {
        std::vector<index_t> d(static_cast<std::size_t>(order()));
        for (index_t n = 0; n < order(); ++n) d[n] = dim(n);
        return d;
    }

    /// Mode-2 slice G_n(i) as an R_n x R_{n+1} view into the core buffer.
    Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> slice(index_t n, index_t i) const {
        const DenseTensor& g = core(n);
        if (i < 0 || i >= g.dim(1))
            throw std::out_of_range("TRFactors: slice index out of range in mode " + std::to_string(n));
        return {g.data() + g.dim(0) * i, g.dim(0), g.dim(2),
                Eigen::OuterStride<>(g.dim(0) * g.dim(1))};
    }

private:
    std::vector<DenseTensor> cores_;
};

/// Single reconstructed entry: trace of the ordered product of mode-2
/// slices picked by the multi-index.
inline double reconstruct_elementwise(const TRFactors& f, std::span<const index_t> idx) {
    const index_t n_cores = f.order();
    if (static_cast<index_t>(idx.size()) != n_cores)
        throw std::out_of_range("reconstruct_elementwise: multi-index has wrong length");
    Matrix acc = f.slice(0, idx[0]);
    for (index_t n = 1; n < n_cores; ++n) acc = Matrix(acc * f.slice(n, idx[static_cast<std::size_t>(n)]));
    return acc.trace();
}

inline double reconstruct_elementwise(const TRFactors& f, std::initializer_list<index_t> idx) {
    return reconstruct_elementwise(f, std::span<const index_t>(idx.begin(), idx.size()));
}

namespace detail {

// (Ra, P, Rb) o (Rb, I, Rc) -> (Ra, P*I, Rc). With the first-index-fastest
// layout both reshapes are free, so the contraction is a single GEMM.
inline DenseTensor chain_contract(const DenseTensor& a, const DenseTensor& g) {
    const index_t ra = a.dim(0), p = a.dim(1), rb = a.dim(2);
    require(g.dim(0) == rb, "chain_contract: shared rank mismatch");
    const index_t i = g.dim(1), rc = g.dim(2);
    DenseTensor out({ra, p * i, rc});
    Eigen::Map<const Matrix> am(a.data(), ra * p, rb);
    Eigen::Map<const Matrix> gm(g.data(), rb, i * rc);
    Eigen::Map<Matrix> om(out.data(), ra * p, i * rc);
    om.noalias() = am * gm;
    return out;
}

}  // namespace detail

/// Subchain tensor: all cores except core n merged in cyclic order
/// (n+1, ..., N, 1, ..., n-1) into a third-order tensor of shape
/// (R_{n+1}, prod_{k != n} I_k, R_n). Its middle index runs over
/// (i_{n+1}, ..., i_{n-1}) with earlier modes varying fastest, matching the
/// column order of unfold_tr at mode n.
inline DenseTensor subchain(const TRFactors& f, index_t mode) {
    const index_t n_cores = f.order();
    if (mode < 0 || mode >= n_cores) throw std::out_of_range("subchain: mode out of range");
    detail::require(n_cores >= 2, "subchain: needs at least two cores");
    DenseTensor cur = f.core((mode + 1) % n_cores);
    for (index_t s = 2; s < n_cores; ++s)
        cur = detail::chain_contract(cur, f.core((mode + s) % n_cores));
    return cur;
}

/// Full reconstruction through the unfolding identity
/// X_<n> = G_{n,(2)} * (G_{!=n,<2>})^T, folded back at the chosen mode.
inline DenseTensor reconstruct_full(const TRFactors& f, index_t mode = 0) {
    const index_t n_cores = f.order();
    if (mode < 0 || mode >= n_cores) throw std::out_of_range("reconstruct_full: mode out of range");
    std::vector<index_t> shape = f.dims();
    if (n_cores == 1) {
        DenseTensor out(shape);
        for (index_t i = 0; i < shape[0]; ++i) out[i] = f.slice(0, i).trace();
        return out;
    }
    const Matrix core2 = unfold_classic(f.core(mode), 1);   // I_n x (R_n R_{n+1})
    const Matrix sub2 = unfold_tr(subchain(f, mode), 1);    // prod I_k x (R_n R_{n+1})
    Matrix xn(core2.rows(), sub2.rows());
    xn.noalias() = core2 * sub2.transpose();
    return fold_tr(xn, mode, std::move(shape));
}

/// Total number of model parameters, sum of R_n * I_n * R_{n+1}.
inline index_t num_params(const TRFactors& f) {
    index_t total = 0;
    for (index_t n = 0; n < f.order(); ++n) total += f.core(n).size();
    return total;
}

/// Compression ratio: tensor entries divided by model parameters.
inline double compression_ratio(std::span<const index_t> shape, const TRFactors& f) {
    detail::require(static_cast<index_t>(shape.size()) == f.order(),
                    "compression_ratio: shape order does not match factors");
    for (index_t n = 0; n < f.order(); ++n)
        detail::require(shape[n] == f.dim(n), "compression_ratio: shape does not match factor dims");
    double entries = 1.0;
    for (index_t d : shape) entries *= static_cast<double>(d);
    return entries / static_cast<double>(num_params(f));
}

inline double compression_ratio(const DenseTensor& t, const TRFactors& f) {
    return compression_ratio(std::span<const index_t>(t.shape()), f);
}

// TRNG factor container: magic "TRNG", u32 version (=1), u32 N, then the N
// cores as consecutive DTEN records. Round-trips bit-exactly.

inline void write_trng(std::ostream& os, const TRFactors& f) {
    static const unsigned char magic[4] = {'T', 'R', 'N', 'G'};
    detail::write_bytes(os, magic, 4);
    detail::write_u32_le(os, 1u);
    detail::write_u32_le(os, static_cast<std::uint32_t>(f.order()));
    for (index_t n = 0; n < f.order(); ++n) write_dten(os, f.core(n));
}

inline TRFactors read_trng(std::istream& is) {
    unsigned char magic[4];
    detail::read_bytes(is, magic, 4, "TRNG magic");
    if (magic[0] != 'T' || magic[1] != 'R' || magic[2] != 'N' || magic[3] != 'G')
        throw format_error("not a TRNG file (bad magic)");
    const std::uint32_t version = detail::read_u32_le(is, "TRNG version");
    if (version != 1u)
        throw format_error("unsupported TRNG version " + std::to_string(version));
    const std::uint32_t n_cores = detail::read_u32_le(is, "TRNG core count");
    if (n_cores == 0u) throw format_error("TRNG must contain at least one core");
    std::vector<DenseTensor> cores;
    cores.reserve(n_cores);
    for (std::uint32_t n = 0; n < n_cores; ++n) cores.push_back(read_dten(is));
    try {
        return TRFactors(std::move(cores));
    } catch (const std::invalid_argument& e) {
        throw format_error(std::string("TRNG cores are inconsistent: ") + e.what());
    }
}

inline void write_trng(const std::string& path, const TRFactors& f) {
    auto os = detail::open_output(path);
    write_trng(os, f);
}

inline TRFactors read_trng(const std::string& path) {
    auto is = detail::open_input(path);
    return read_trng(is);
}

}  // namespace tenring
