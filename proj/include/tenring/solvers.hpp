// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tenring/random.hpp"
#include "tenring/tr_factors.hpp"
#include "tenring/tensor.hpp"

namespace tenring {

/// Shared solver knobs. `tolerance` is the target relative error for trsvd
/// and the relative RSE-change stopping threshold for trals; 0 disables
/// early stopping.
struct SolverConfig {
    std::optional<std::vector<index_t>> ranks;
    double tolerance = 0.0;
    index_t max_sweeps = 50;
    std::uint64_t seed = 0;
    double sgd_step = 1e-3;
    index_t sgd_batch = 1;
};

struct SolveReport {
    TRFactors factors;
    std::vector<double> rse_history;
    index_t sweeps_run = 0;
    double elapsed_seconds = 0.0;
};

/// Thrown when an iterative solver detects a runaway residual.
class divergence_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Relative squared error ||ref - approx||_F / ||ref||_F.
inline double rse(const DenseTensor& ref, const DenseTensor& approx) {
    detail::require(ref.shape() == approx.shape(), "rse: shape mismatch");
    Eigen::Map<const Vector> a(ref.data(), ref.size());
    Eigen::Map<const Vector> b(approx.data(), approx.size());
    const double denom = a.norm();
    detail::require(denom > 0.0, "rse: reference tensor has zero norm");
    return (a - b).norm() / denom;
}

namespace detail {

inline std::vector<index_t> solver_ranks(const DenseTensor& x, const SolverConfig& cfg,
                                         const char* who) {
    require(cfg.ranks.has_value(), std::string(who) + ": rank vector required");
    const auto& ranks = *cfg.ranks;
    require(static_cast<index_t>(ranks.size()) == x.order(),
            std::string(who) + ": rank vector length must equal tensor order");
    for (index_t r : ranks) require(r >= 1, std::string(who) + ": ranks must be positive");
    require(cfg.max_sweeps >= 1, std::string(who) + ": max_sweeps must be positive");
    return ranks;
}

inline TRFactors zero_factors(const std::vector<index_t>& dims, const std::vector<index_t>& ranks) {
    const index_t n_cores = static_cast<index_t>(dims.size());
    std::vector<DenseTensor> cores;
    cores.reserve(dims.size());
    for (index_t n = 0; n < n_cores; ++n)
        cores.emplace_back(std::vector<index_t>{ranks[n], dims[n], ranks[(n + 1) % n_cores]});
    return TRFactors(std::move(cores));
}

// Cores i.i.d. N(0,1) scaled by (||x||_F / prod R_n)^(1/N); entries filled
// in flat (first-index-fastest) order, core by core.
inline TRFactors init_factors(const std::vector<index_t>& dims, const std::vector<index_t>& ranks,
                              std::uint64_t seed, double xnorm) {
    const index_t n_cores = static_cast<index_t>(dims.size());
    double prod_ranks = 1.0;
    for (index_t r : ranks) prod_ranks *= static_cast<double>(r);
    const double scale = xnorm > 0.0 ? std::pow(xnorm / prod_ranks, 1.0 / static_cast<double>(n_cores)) : 0.0;
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

// Gram matrix S^T S of the mode-2 TR unfolding S of subchain(f, n), without
// materializing the subchain. Each core contributes a transfer matrix
//   W_k((r, r'), (s, s')) = sum_i G_k(r, i, s) G_k(r', i, s'),
// and the ordered product over k = n+1, ..., n-1 is the Gram matrix up to
// an index shuffle.
inline Matrix subchain_gram(const TRFactors& f, index_t n) {
    const index_t n_cores = f.order();
    Matrix omega;
    for (index_t s = 1; s < n_cores; ++s) {
        const index_t k = (n + s) % n_cores;
        const DenseTensor& g = f.core(k);
        const index_t rk = g.dim(0), rk1 = g.dim(2);
        const Matrix h = unfold_classic(g, 1);  // I_k x (R_k R_{k+1})
        Matrix gram(h.cols(), h.cols());
        gram.noalias() = h.transpose() * h;
        Matrix w(rk * rk, rk1 * rk1);
        for (index_t s2 = 0; s2 < rk1; ++s2)
            for (index_t s1 = 0; s1 < rk1; ++s1)
                for (index_t r2 = 0; r2 < rk; ++r2)
                    for (index_t r1 = 0; r1 < rk; ++r1)
                        w(r1 + rk * r2, s1 + rk1 * s2) = gram(r1 + rk * s1, r2 + rk * s2);
        omega = (s == 1) ? std::move(w) : Matrix(omega * w);
    }
    const index_t rn = f.rank(n);
    const index_t rn1 = f.rank((n + 1) % n_cores);
    Matrix m(rn * rn1, rn * rn1);
    for (index_t b2 = 0; b2 < rn1; ++b2)
        for (index_t a2 = 0; a2 < rn; ++a2)
            for (index_t b = 0; b < rn1; ++b)
                for (index_t a = 0; a < rn; ++a)
                    m(a + rn * b, a2 + rn * b2) = omega(b + rn1 * b2, a + rn * a2);
    return m;
}

// Right-hand side V(i_n, r_n + R_n r_{n+1}) = X_<n> * S of the mode-n
// normal equations, computed by contracting the cyclically permuted tensor
// with one core at a time instead of materializing the subchain S.
inline Matrix subchain_rhs(const Matrix& xn_tr, const TRFactors& f, index_t n) {
    const index_t n_cores = f.order();
    const index_t dim_n = xn_tr.rows();

    // B holds modes (I_{n+1}, ..., I_{n-1}, I_n), first listed fastest.
    Matrix b = xn_tr.transpose();

    // Contract over I_{n+1} with core n+1 permuted to ((r, s), i) layout.
    const index_t k0 = (n + 1) % n_cores;
    const DenseTensor& g0 = f.core(k0);
    const index_t r0 = g0.dim(0), i0 = g0.dim(1), s0 = g0.dim(2);
    Matrix ghat(r0 * s0, i0);
    for (index_t i = 0; i < i0; ++i)
        for (index_t s = 0; s < s0; ++s)
            for (index_t r = 0; r < r0; ++r)
                ghat(r + r0 * s, i) = g0[r + r0 * (i + i0 * s)];
    const index_t rest0 = b.size() / i0;
    Matrix cur(r0 * s0, rest0);
    cur.noalias() = ghat * Eigen::Map<const Matrix>(b.data(), i0, rest0);

    // Repeatedly contract the (rank, mode) pair now sitting in the middle.
    const index_t front = r0;
    for (index_t s = 2; s < n_cores; ++s) {
        const index_t k = (n + s) % n_cores;
        const DenseTensor& g = f.core(k);
        const index_t rk = g.dim(0), ik = g.dim(1), rk1 = g.dim(2);
        const index_t mid = rk * ik;
        const index_t tail = cur.size() / (front * mid);
        Eigen::Map<const Matrix> gmat(g.data(), mid, rk1);
        Matrix next(front * rk1, tail);
        for (index_t t = 0; t < tail; ++t) {
            Eigen::Map<const Matrix> in_slab(cur.data() + front * mid * t, front, mid);
            Eigen::Map<Matrix> out_slab(next.data() + front * rk1 * t, front, rk1);
            out_slab.noalias() = in_slab * gmat;
        }
        cur = std::move(next);
    }

    // cur modes are (R_{n+1}, R_n, I_n); reorder into V(i_n, r_n + R_n r_{n+1}).
    const index_t rn = f.rank(n);
    const index_t rn1 = front;
    Matrix v(dim_n, rn * rn1);
    const double* c = cur.data();
    for (index_t i = 0; i < dim_n; ++i)
        for (index_t a = 0; a < rn; ++a)
            for (index_t bb = 0; bb < rn1; ++bb)
                v(i, a + rn * bb) = c[bb + rn1 * (a + rn * i)];
    return v;
}

// Ridge jitter used when a triangular factor turns out singular:
// lambda = 1e-12 * trace(gram) / dim(gram).
inline Matrix ridge_solve(Matrix gram, const Matrix& rhs) {
    const double lambda = 1e-12 * gram.trace() / static_cast<double>(gram.rows());
    gram.diagonal().array() += lambda;
    return gram.ldlt().solve(rhs);
}

// Least squares min ||A z - b|| via Householder QR, falling back to the
// jittered normal equations when R is numerically singular or the system
// is underdetermined.
inline Matrix ls_solve_qr(const Matrix& a, const Matrix& b) {
    if (a.rows() >= a.cols()) {
        Eigen::HouseholderQR<Matrix> qr(a);
        const Vector diag = qr.matrixQR().diagonal().cwiseAbs();
        const double dmax = diag.maxCoeff();
        const double cutoff = dmax * static_cast<double>(std::max(a.rows(), a.cols())) *
                              std::numeric_limits<double>::epsilon() * 16.0;
        if (dmax > 0.0 && diag.minCoeff() > cutoff) return qr.solve(b);
    }
    return ridge_solve(a.transpose() * a, a.transpose() * b);
}

// Solve the normal equations M z = rhs by Cholesky, with the same jitter
// fallback on numerical failure.
inline Matrix ls_solve_gram(const Matrix& gram, const Matrix& rhs) {
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() == Eigen::Success) {
        const Vector diag = llt.matrixLLT().diagonal().cwiseAbs();
        const double dmax = diag.maxCoeff();
        const double cutoff = dmax * static_cast<double>(gram.rows()) *
                              std::numeric_limits<double>::epsilon() * 16.0;
        if (dmax > 0.0 && diag.minCoeff() > cutoff) return llt.solve(rhs);
    }
    return ridge_solve(gram, rhs);
}

// Scatter the solved mode-2 unfolding (m x I_n, columns over i_n) back into
// core n, whose layout is (R_n, I_n, R_{n+1}).
inline void store_core(DenseTensor& core, const Matrix& z) {
    const index_t rn = core.dim(0), in = core.dim(1), rn1 = core.dim(2);
    double* dst = core.data();
    for (index_t s = 0; s < rn1; ++s)
        for (index_t i = 0; i < in; ++i)
            for (index_t r = 0; r < rn; ++r)
                dst[r + rn * (i + in * s)] = z(r + rn * s, i);
}

// Subchains with at most this many rows are materialized and solved by QR;
// larger systems go through the transfer-matrix Gram route.
constexpr index_t kDirectLsMaxRows = 4096;

// One ALS core update: exact least-squares fit of core n against the
// mode-n TR unfolding of the data.
inline void als_update_mode(const Matrix& xn_tr, TRFactors& f, index_t n) {
    const index_t n_cols = xn_tr.cols();
    const index_t m = f.rank(n) * f.rank((n + 1) % f.order());
    Matrix z;
    if (n_cols <= kDirectLsMaxRows && n_cols >= m) {
        const Matrix a = unfold_tr(subchain(f, n), 1);
        z = ls_solve_qr(a, xn_tr.transpose());
    } else {
        const Matrix gram = subchain_gram(f, n);
        const Matrix v = subchain_rhs(xn_tr, f, n);
        z = ls_solve_gram(gram, v.transpose());
    }
    store_core(f.core(n), z);
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// Exact single-core representation used by every solver when N == 1:
// X(i) = Trace(G(:, i, :)) is matched by putting x on the (0, i, 0) line.
inline SolveReport solve_order_one(const DenseTensor& x, const std::vector<index_t>& ranks,
                                   const Stopwatch& clock) {
    DenseTensor core({ranks[0], x.dim(0), ranks[0]});
    for (index_t i = 0; i < x.dim(0); ++i) core[core.offset(std::array<index_t, 3>{0, i, 0})] = x[i];
    SolveReport rep;
    rep.factors = TRFactors({std::move(core)});
    const double xnorm = frobenius_norm(x);
    rep.rse_history = {xnorm > 0.0 ? rse(x, reconstruct_full(rep.factors)) : 0.0};
    rep.sweeps_run = 1;
    rep.elapsed_seconds = clock.seconds();
    return rep;
}

inline SolveReport degenerate_zero_report(const DenseTensor& x, const std::vector<index_t>& ranks,
                                          const Stopwatch& clock) {
    // Zero data: return zero cores and RSE 0 by convention.
    SolveReport rep;
    rep.factors = zero_factors(x.shape(), ranks);
    rep.rse_history = {0.0};
    rep.sweeps_run = 0;
    rep.elapsed_seconds = clock.seconds();
    return rep;
}

}  // namespace detail

/// Alternating least squares at fixed TR-ranks. Each sweep solves the N
/// exact least-squares subproblems X_<n> ~ G_{n,(2)} S_n^T in cyclic order,
/// so the recorded per-sweep RSE is non-increasing up to rounding. Stops
/// after max_sweeps or when the relative RSE change drops below
/// cfg.tolerance.
inline SolveReport trals(const DenseTensor& x, const SolverConfig& cfg) {
    const detail::Stopwatch clock;
    const auto ranks = detail::solver_ranks(x, cfg, "trals");
    const double xnorm = frobenius_norm(x);
    if (xnorm == 0.0) return detail::degenerate_zero_report(x, ranks, clock);
    if (x.order() == 1) return detail::solve_order_one(x, ranks, clock);

    TRFactors f = detail::init_factors(x.shape(), ranks, cfg.seed, xnorm);

    // Cache the N cyclic unfoldings when that fits in a sane budget.
    const bool cache_unfoldings = x.size() * x.order() <= (index_t(1) << 27);
    std::vector<Matrix> unfoldings;
    if (cache_unfoldings) {
        unfoldings.reserve(static_cast<std::size_t>(x.order()));
        for (index_t n = 0; n < x.order(); ++n) unfoldings.push_back(unfold_tr(x, n));
    }

    SolveReport rep;
    for (index_t sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        for (index_t n = 0; n < x.order(); ++n) {
            if (cache_unfoldings) {
                detail::als_update_mode(unfoldings[static_cast<std::size_t>(n)], f, n);
            } else {
                const Matrix xn = unfold_tr(x, n);
                detail::als_update_mode(xn, f, n);
            }
        }
        rep.rse_history.push_back(rse(x, reconstruct_full(f)));
        rep.sweeps_run = sweep;
        const std::size_t k = rep.rse_history.size();
        if (k >= 2 && std::abs(rep.rse_history[k - 1] - rep.rse_history[k - 2]) <
                          cfg.tolerance * rep.rse_history[k - 2])
            break;
    }
    rep.factors = std::move(f);
    rep.elapsed_seconds = clock.seconds();
    return rep;
}

/// Extra figures reported by trsvd for error accounting.
struct TrsvdInfo {
    /// Sum of squared singular values discarded across all truncations;
    /// divides by ||x||_F^2 to upper-bound RSE^2.
    double discarded_sq = 0.0;
};

namespace detail {

// Smallest rank whose discarded tail of squared singular values stays
// within budget_sq; never below 1.
inline index_t truncation_rank(const Vector& sv, double budget_sq, double* discarded_sq) {
    index_t r = sv.size();
    double tail = 0.0;
    while (r > 1) {
        const double t = tail + sv[r - 1] * sv[r - 1];
        if (t > budget_sq) break;
        tail = t;
        --r;
    }
    if (discarded_sq) *discarded_sq += tail;
    return r;
}

// Divisor of r nearest to floor(sqrt(r)), ties toward the smaller divisor.
inline std::pair<index_t, index_t> balanced_divisor_split(index_t r) {
    index_t target = static_cast<index_t>(std::sqrt(static_cast<double>(r)));
    while ((target + 1) * (target + 1) <= r) ++target;
    while (target > 1 && target * target > r) --target;
    index_t best = 1;
    for (index_t d = 1; d <= r; ++d) {
        if (r % d != 0) continue;
        if (std::abs(d - target) < std::abs(best - target)) best = d;
    }
    return {best, r / best};
}

}  // namespace detail

/// Sequential truncated-SVD construction with automatic rank selection.
/// The first SVD of the I_1 x prod I_k reshape fixes the pair (R_1, R_2)
/// by a balanced divisor split of its truncation rank; the remaining modes
/// are peeled off train-style, with the trailing rank folded back to R_1.
/// Each truncation keeps the discarded energy within
/// (tolerance * ||x||_F / sqrt(N))^2, so the final RSE is at most
/// cfg.tolerance whenever every threshold is met.
inline SolveReport trsvd(const DenseTensor& x, const SolverConfig& cfg, TrsvdInfo* info = nullptr) {
    const detail::Stopwatch clock;
    detail::require(cfg.tolerance >= 0.0, "trsvd: tolerance must be nonnegative");
    const index_t order = x.order();
    const double xnorm = frobenius_norm(x);
    if (order == 1) return detail::solve_order_one(x, {1}, clock);
    if (xnorm == 0.0)
        return detail::degenerate_zero_report(x, std::vector<index_t>(order, 1), clock);

    const double budget = cfg.tolerance * xnorm / std::sqrt(static_cast<double>(order));
    const double budget_sq = budget * budget;
    double discarded_sq = 0.0;

    // First split: SVD of the mode-1 reshape (free under this layout).
    const index_t dim0 = x.dim(0);
    Eigen::Map<const Matrix> m0(x.data(), dim0, x.size() / dim0);
    Eigen::BDCSVD<Matrix> svd0(m0, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const index_t r01 = detail::truncation_rank(svd0.singularValues(), budget_sq, &discarded_sq);
    const auto [ra, rb] = detail::balanced_divisor_split(r01);

    std::vector<DenseTensor> cores(static_cast<std::size_t>(order));
    {
        DenseTensor g0({ra, dim0, rb});
        const Matrix& u = svd0.matrixU();
        for (index_t q = 0; q < rb; ++q)
            for (index_t i = 0; i < dim0; ++i)
                for (index_t p = 0; p < ra; ++p)
                    g0[p + ra * (i + dim0 * q)] = u(i, p + ra * q);
        cores[0] = std::move(g0);
    }

    // Remainder W = S V^T reorganized so the R_1 index trails:
    // T(q, i_2, ..., i_N, p) = W(p + ra*q, :).
    const index_t rest = x.size() / dim0;
    Matrix w = svd0.singularValues().head(r01).asDiagonal() *
               svd0.matrixV().leftCols(r01).transpose();
    std::vector<double> cur(static_cast<std::size_t>(r01 * rest));
    for (index_t p = 0; p < ra; ++p)
        for (index_t c = 0; c < rest; ++c)
            for (index_t q = 0; q < rb; ++q)
                cur[static_cast<std::size_t>(q + rb * c + rb * rest * p)] = w(p + ra * q, c);

    index_t lead = rb;
    index_t tail_cols = rest;
    for (index_t k = 1; k + 1 < order; ++k) {
        const index_t dim_k = x.dim(k);
        const index_t rows = lead * dim_k;
        const index_t cols = static_cast<index_t>(cur.size()) / rows;
        Eigen::Map<const Matrix> mk(cur.data(), rows, cols);
        Eigen::BDCSVD<Matrix> svd(mk, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const index_t r = detail::truncation_rank(svd.singularValues(), budget_sq, &discarded_sq);

        DenseTensor gk({lead, dim_k, r});
        Eigen::Map<Matrix>(gk.data(), rows, r) = svd.matrixU().leftCols(r);
        cores[static_cast<std::size_t>(k)] = std::move(gk);

        const Matrix next = svd.singularValues().head(r).asDiagonal() *
                            svd.matrixV().leftCols(r).transpose();
        cur.assign(next.data(), next.data() + next.size());
        lead = r;
        tail_cols = cols / dim_k;
    }
    (void)tail_cols;

    {
        const index_t dim_last = x.dim(order - 1);
        DenseTensor glast({lead, dim_last, ra}, std::move(cur));
        cores[static_cast<std::size_t>(order - 1)] = std::move(glast);
    }

    SolveReport rep;
    rep.factors = TRFactors(std::move(cores));
    rep.rse_history = {rse(x, reconstruct_full(rep.factors))};
    rep.sweeps_run = 1;
    rep.elapsed_seconds = clock.seconds();
    if (info) info->discarded_sq = discarded_sq;
    return rep;
}

namespace detail {

// Per-sample gradient of 1/2 (x(idx) - Trace(prod G_n(i_n)))^2 with respect
// to each selected slice: residual * (suffix * prefix)^T.
struct SgdWorkspace {
    std::vector<Matrix> prefix;  // prefix[k] = G_0(i_0) ... G_{k-1}(i_{k-1})
    std::vector<Matrix> suffix;  // suffix[k] = G_{k+1}(i_{k+1}) ... G_{N-1}(i_{N-1})
};

}  // namespace detail

/// Stochastic gradient baseline at fixed ranks: uniform entry sampling with
/// replacement, slice-wise gradient steps, RSE recorded once per
/// sweep-equivalent (prod I_n samples). Aborts with divergence_error when
/// the RSE exceeds 10x its initial value.
inline SolveReport trsgd(const DenseTensor& x, const SolverConfig& cfg) {
    const detail::Stopwatch clock;
    const auto ranks = detail::solver_ranks(x, cfg, "trsgd");
    detail::require(cfg.sgd_step >= 0.0, "trsgd: step size must be nonnegative");
    detail::require(cfg.sgd_batch >= 1, "trsgd: batch size must be positive");
    const double xnorm = frobenius_norm(x);
    if (xnorm == 0.0) return detail::degenerate_zero_report(x, ranks, clock);
    if (x.order() == 1) return detail::solve_order_one(x, ranks, clock);

    const index_t order = x.order();
    GaussianSampler gauss(cfg.seed);
    TRFactors f = [&] {
        // Same init scheme as trals, drawing from the same stream.
        double prod_ranks = 1.0;
        for (index_t r : ranks) prod_ranks *= static_cast<double>(r);
        const double scale = std::pow(xnorm / prod_ranks, 1.0 / static_cast<double>(order));
        std::vector<DenseTensor> cores;
        for (index_t n = 0; n < order; ++n) {
            DenseTensor core({ranks[n], x.dim(n), ranks[(n + 1) % order]});
            for (index_t i = 0; i < core.size(); ++i) core[i] = scale * gauss.next();
            cores.push_back(std::move(core));
        }
        return TRFactors(std::move(cores));
    }();
    SplitMix64& idx_rng = gauss.engine();

    SolveReport rep;
    const double initial_rse = rse(x, reconstruct_full(f));
    rep.rse_history.push_back(initial_rse);

    std::vector<index_t> idx(static_cast<std::size_t>(order));
    std::vector<Matrix> prefix(static_cast<std::size_t>(order) + 1);
    std::vector<Matrix> grads(static_cast<std::size_t>(order));
    // Batch accumulators: one zero tensor per core plus the touched slices.
    std::vector<DenseTensor> acc;
    std::vector<std::vector<index_t>> touched(static_cast<std::size_t>(order));
    for (index_t n = 0; n < order; ++n) acc.emplace_back(f.core(n).shape());

    const index_t per_sweep = x.size();
    for (index_t sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        index_t remaining = per_sweep;
        while (remaining > 0) {
            const index_t batch = std::min<index_t>(cfg.sgd_batch, remaining);
            for (auto& list : touched) list.clear();
            for (index_t b = 0; b < batch; ++b) {
                for (index_t n = 0; n < order; ++n)
                    idx[static_cast<std::size_t>(n)] = static_cast<index_t>(
                        idx_rng.next_below(static_cast<std::uint64_t>(x.dim(n))));

                prefix[0] = Matrix::Identity(f.rank(0), f.rank(0));
                for (index_t n = 0; n < order; ++n)
                    prefix[static_cast<std::size_t>(n) + 1] =
                        Matrix(prefix[static_cast<std::size_t>(n)] * f.slice(n, idx[static_cast<std::size_t>(n)]));
                const double residual = prefix[static_cast<std::size_t>(order)].trace() - x.at(idx);

                // suffix built on the fly right-to-left
                Matrix suffix = Matrix::Identity(f.rank(0), f.rank(0));
                for (index_t n = order - 1; n >= 0; --n) {
                    grads[static_cast<std::size_t>(n)] =
                        Matrix(residual * (suffix * prefix[static_cast<std::size_t>(n)]).transpose());
                    suffix = Matrix(f.slice(n, idx[static_cast<std::size_t>(n)]) * suffix);
                }
                for (index_t n = 0; n < order; ++n) {
                    DenseTensor& a = acc[static_cast<std::size_t>(n)];
                    const index_t rn = a.dim(0), in = a.dim(1), rn1 = a.dim(2);
                    const index_t i = idx[static_cast<std::size_t>(n)];
                    detail::StridedMap slab(a.data() + rn * i, rn, rn1,
                                            Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(rn * in, 1));
                    slab += grads[static_cast<std::size_t>(n)];
                    touched[static_cast<std::size_t>(n)].push_back(i);
                }
            }
            const double step = cfg.sgd_step / static_cast<double>(batch);
            for (index_t n = 0; n < order; ++n) {
                DenseTensor& a = acc[static_cast<std::size_t>(n)];
                DenseTensor& g = f.core(n);
                const index_t rn = a.dim(0), in = a.dim(1), rn1 = a.dim(2);
                for (index_t i : touched[static_cast<std::size_t>(n)]) {
                    detail::StridedMap aslab(a.data() + rn * i, rn, rn1,
                                             Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(rn * in, 1));
                    detail::StridedMap gslab(g.data() + rn * i, rn, rn1,
                                             Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(rn * in, 1));
                    gslab -= step * aslab;
                    aslab.setZero();
                }
            }
            remaining -= batch;
        }
        const double cur = rse(x, reconstruct_full(f));
        rep.rse_history.push_back(cur);
        rep.sweeps_run = sweep;
        if (cur > 10.0 * initial_rse)
            throw divergence_error("trsgd: RSE " + std::to_string(cur) + " exceeds 10x initial " +
                                   std::to_string(initial_rse) + "; reduce the step size");
    }
    rep.factors = std::move(f);
    rep.elapsed_seconds = clock.seconds();
    return rep;
}

}  // namespace tenring
