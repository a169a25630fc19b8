// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "tenring/tensor.hpp"

namespace tenring {

/// Malformed or unreadable on-disk data.
class format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void write_bytes(std::ostream& os, const unsigned char* p, std::size_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    write_bytes(os, b, 4);
}

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    write_bytes(os, b, 8);
}

inline void write_f64_le(std::ostream& os, double v) {
    write_u64_le(os, std::bit_cast<std::uint64_t>(v));
}

inline void read_bytes(std::istream& is, unsigned char* p, std::size_t n, const char* what) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw format_error(std::string("unexpected end of file while reading ") + what);
}

inline std::uint32_t read_u32_le(std::istream& is, const char* what) {
    unsigned char b[4];
    read_bytes(is, b, 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t read_u64_le(std::istream& is, const char* what) {
    unsigned char b[8];
    read_bytes(is, b, 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double read_f64_le(std::istream& is, const char* what) {
    return std::bit_cast<double>(read_u64_le(is, what));
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open '" + path + "' for writing");
    return os;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open '" + path + "' for reading");
    return is;
}

}  // namespace detail

// DTEN tensor container: magic "DTEN", u32 version (=1), u32 order N,
// N x u64 extents, then prod(I_n) little-endian f64 values in the flat
// first-index-fastest order. Round-trips bit-exactly.

inline void write_dten(std::ostream& os, const DenseTensor& t) {
    static const unsigned char magic[4] = {'D', 'T', 'E', 'N'};
    detail::write_bytes(os, magic, 4);
    detail::write_u32_le(os, 1u);
    detail::write_u32_le(os, static_cast<std::uint32_t>(t.order()));
    for (index_t d : t.shape()) detail::write_u64_le(os, static_cast<std::uint64_t>(d));
    for (index_t i = 0; i < t.size(); ++i) detail::write_f64_le(os, t[i]);
    if (!os) throw format_error("I/O error while writing DTEN data");
}

inline DenseTensor read_dten(std::istream& is) {
    unsigned char magic[4];
    detail::read_bytes(is, magic, 4, "DTEN magic");
    if (magic[0] != 'D' || magic[1] != 'T' || magic[2] != 'E' || magic[3] != 'N')
        throw format_error("not a DTEN file (bad magic)");
    const std::uint32_t version = detail::read_u32_le(is, "DTEN version");
    if (version != 1u)
        throw format_error("unsupported DTEN version " + std::to_string(version));
    const std::uint32_t order = detail::read_u32_le(is, "DTEN order");
    if (order == 0u) throw format_error("DTEN order must be at least 1");
    std::vector<index_t> shape(order);
    index_t total = 1;
    for (auto& d : shape) {
        const std::uint64_t v = detail::read_u64_le(is, "DTEN extent");
        if (v == 0u) throw format_error("DTEN extents must be positive");
        d = static_cast<index_t>(v);
        total *= d;
    }
    std::vector<double> data(static_cast<std::size_t>(total));
    for (auto& x : data) x = detail::read_f64_le(is, "DTEN values");
    return DenseTensor(std::move(shape), std::move(data));
}

inline void write_dten(const std::string& path, const DenseTensor& t) {
    auto os = detail::open_output(path);
    write_dten(os, t);
}

inline DenseTensor read_dten(const std::string& path) {
    auto is = detail::open_input(path);
    return read_dten(is);
}

/// Binary PGM (P5, maxval 255) with the band linearly rescaled so that
/// min -> 0 and max -> 255; a constant band maps to 0.
inline void write_pgm(std::ostream& os, const Matrix& band) {
    os << "P5\n" << band.rows() << " " << band.cols() << "\n255\n";
    const double lo = band.minCoeff();
    const double hi = band.maxCoeff();
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    // pixels in row-major scan order
    for (index_t i = 0; i < band.rows(); ++i) {
        for (index_t j = 0; j < band.cols(); ++j) {
            const double v = (band(i, j) - lo) * scale;
            const int q = static_cast<int>(v + 0.5);
            const unsigned char byte = static_cast<unsigned char>(q < 0 ? 0 : (q > 255 ? 255 : q));
            os.put(static_cast<char>(byte));
        }
    }
    if (!os) throw format_error("I/O error while writing PGM data");
}

inline void write_pgm(const std::string& path, const Matrix& band) {
    auto os = detail::open_output(path);
    write_pgm(os, band);
}

}  // namespace tenring
