// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tenring {

using index_t = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline index_t product(std::span<const index_t> dims) {
    index_t p = 1;
    for (index_t d : dims) p *= d;
    return p;
}

}  // namespace detail

/// Dense N-way array of doubles with an explicit shape (I_1, ..., I_N).
///
/// Storage convention: entries are kept in one flat buffer with the first
/// index varying fastest,
///
///     offset(i_1, ..., i_N) = i_1 + I_1*(i_2 + I_2*(i_3 + ...)).
///
/// Every unfolding and mode product below is defined by an explicit index
/// map against this layout. Modes are 0-based in the API.
class DenseTensor {
public:
    DenseTensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit DenseTensor(std::vector<index_t> shape) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(static_cast<std::size_t>(detail::product(shape_)), 0.0);
    }

    DenseTensor(std::vector<index_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        detail::require(static_cast<index_t>(data_.size()) == detail::product(shape_),
                        "DenseTensor: data length does not match shape product");
    }

    index_t order() const { return static_cast<index_t>(shape_.size()); }
    const std::vector<index_t>& shape() const { return shape_; }
    index_t dim(index_t mode) const { return shape_[check_mode(mode)]; }
    index_t size() const { return static_cast<index_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double operator[](index_t flat) const { return data_[static_cast<std::size_t>(flat)]; }
    double& operator[](index_t flat) { return data_[static_cast<std::size_t>(flat)]; }

    /// Flat offset of a full multi-index; bounds-checked.
    index_t offset(std::span<const index_t> idx) const {
        if (static_cast<index_t>(idx.size()) != order())
            throw std::out_of_range("DenseTensor: multi-index has wrong length");
        index_t off = 0;
        index_t stride = 1;
        for (index_t n = 0; n < order(); ++n) {
            if (idx[n] < 0 || idx[n] >= shape_[n])
                throw std::out_of_range("DenseTensor: index out of range in mode " + std::to_string(n));
            off += idx[n] * stride;
            stride *= shape_[n];
        }
        return off;
    }

    double at(std::span<const index_t> idx) const { return data_[offset(idx)]; }
    double& at(std::span<const index_t> idx) { return data_[offset(idx)]; }
    double at(std::initializer_list<index_t> idx) const {
        return at(std::span<const index_t>(idx.begin(), idx.size()));
    }

    index_t check_mode(index_t mode) const {
        if (mode < 0 || mode >= order())
            throw std::out_of_range("DenseTensor: mode " + std::to_string(mode) + " out of range");
        return mode;
    }

private:
    void validate_shape() {
        detail::require(!shape_.empty(), "DenseTensor: order must be at least 1");
        for (index_t d : shape_)
            detail::require(d >= 1, "DenseTensor: every extent must be positive");
    }

    std::vector<index_t> shape_;
    std::vector<double> data_;
};

namespace detail {

// Sizes of the index blocks before/at/after a mode. With the first-index-
// fastest layout the tensor reads as a (left, dim, right) 3-way array.
struct ModeSplit {
    index_t left, dim, right;
};

inline ModeSplit mode_split(std::span<const index_t> shape, index_t mode) {
    ModeSplit s{1, shape[mode], 1};
    for (index_t n = 0; n < mode; ++n) s.left *= shape[n];
    for (index_t n = mode + 1; n < static_cast<index_t>(shape.size()); ++n) s.right *= shape[n];
    return s;
}

using StridedMap = Eigen::Map<Matrix, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
using ConstStridedMap = Eigen::Map<const Matrix, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;

}  // namespace detail

/// First mode-n unfolding: rows are mode n, columns run over the remaining
/// modes in natural order (i_1, ..., i_{n-1}, i_{n+1}, ..., i_N), earlier
/// listed indices varying fastest. Result is I_n x prod_{k != n} I_k.
inline Matrix unfold_classic(const DenseTensor& t, index_t mode) {
    t.check_mode(mode);
    const auto [left, dim, right] = detail::mode_split(t.shape(), mode);
    Matrix m(dim, left * right);
    for (index_t r = 0; r < right; ++r) {
        Eigen::Map<const Matrix> slab(t.data() + left * dim * r, left, dim);
        m.middleCols(left * r, left) = slab.transpose();
    }
    return m;
}

/// Second mode-n unfolding (the cyclic one used by tensor-ring algebra):
/// columns run over (i_{n+1}, ..., i_N, i_1, ..., i_{n-1}), earlier listed
/// indices varying fastest. Coincides with unfold_classic at mode 0.
inline Matrix unfold_tr(const DenseTensor& t, index_t mode) {
    t.check_mode(mode);
    const auto [left, dim, right] = detail::mode_split(t.shape(), mode);
    Matrix m(dim, left * right);
    for (index_t l = 0; l < left; ++l) {
        detail::ConstStridedMap slab(t.data() + l, dim, right,
                                     Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(left * dim, left));
        m.middleCols(right * l, right) = slab;
    }
    return m;
}

/// Inverse of unfold_classic for the given mode and target shape.
inline DenseTensor fold_classic(const Matrix& m, index_t mode, std::vector<index_t> shape) {
    detail::require(mode >= 0 && mode < static_cast<index_t>(shape.size()),
                    "fold_classic: mode out of range for shape");
    DenseTensor t(std::move(shape));
    const auto [left, dim, right] = detail::mode_split(t.shape(), mode);
    detail::require(m.rows() == dim && m.cols() == left * right,
                    "fold_classic: matrix size inconsistent with shape");
    for (index_t r = 0; r < right; ++r) {
        Eigen::Map<Matrix> slab(t.data() + left * dim * r, left, dim);
        slab = m.middleCols(left * r, left).transpose();
    }
    return t;
}

/// Inverse of unfold_tr for the given mode and target shape.
inline DenseTensor fold_tr(const Matrix& m, index_t mode, std::vector<index_t> shape) {
    detail::require(mode >= 0 && mode < static_cast<index_t>(shape.size()),
                    "fold_tr: mode out of range for shape");
    DenseTensor t(std::move(shape));
    const auto [left, dim, right] = detail::mode_split(t.shape(), mode);
    detail::require(m.rows() == dim && m.cols() == left * right,
                    "fold_tr: matrix size inconsistent with shape");
    for (index_t l = 0; l < left; ++l) {
        detail::StridedMap slab(t.data() + l, dim, right,
                                Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(left * dim, left));
        slab = m.middleCols(right * l, right);
    }
    return t;
}

/// Mode-n product t x_n m: contracts mode n of t with the columns of m.
/// Result shape replaces I_n by m.rows(). Equals
/// fold_classic(m * unfold_classic(t, n), n, new shape).
inline DenseTensor mode_n_product(const DenseTensor& t, index_t mode, const Matrix& m) {
    t.check_mode(mode);
    detail::require(m.cols() == t.dim(mode), "mode_n_product: inner dimensions do not match");
    const auto [left, dim, right] = detail::mode_split(t.shape(), mode);
    std::vector<index_t> out_shape = t.shape();
    out_shape[mode] = m.rows();
    DenseTensor out(std::move(out_shape));
    const index_t odim = m.rows();
    for (index_t r = 0; r < right; ++r) {
        Eigen::Map<const Matrix> in_slab(t.data() + left * dim * r, left, dim);
        Eigen::Map<Matrix> out_slab(out.data() + left * odim * r, left, odim);
        out_slab.noalias() = in_slab * m.transpose();
    }
    return out;
}

inline double inner_product(const DenseTensor& a, const DenseTensor& b) {
    detail::require(a.shape() == b.shape(), "inner_product: shape mismatch");
    Eigen::Map<const Vector> va(a.data(), a.size());
    Eigen::Map<const Vector> vb(b.data(), b.size());
    return va.dot(vb);
}

inline double frobenius_norm(const DenseTensor& t) {
    return Eigen::Map<const Vector>(t.data(), t.size()).norm();
}

}  // namespace tenring
