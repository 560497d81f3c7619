#ifndef MPCG_SPARSE_HPP
#define MPCG_SPARSE_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace mpcg {

/// Precision levels used by the solver stages.
template <typename T>
concept Scalar = std::same_as<T, float> || std::same_as<T, double>;

/// Dense vector at a fixed precision level; the element type is the precision tag.
template <Scalar T>
using Vector = std::vector<T>;

struct Triplet {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
};

namespace detail {

template <Scalar T>
bool same_bits(T a, T b) {
    if constexpr (std::same_as<T, float>)
        return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b);
    else
        return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

} // namespace detail

/**
 * Square symmetric matrix in CSR form with full (both triangles) storage.
 *
 * Invariants checked on construction:
 *  - row_starts nondecreasing, row_starts[0] = 0, row_starts[n] = m;
 *  - column indices strictly increasing within a row and in [0, n);
 *  - every stored (i, j, v) has a mirror (j, i, v) with identical bits;
 *  - every diagonal entry is stored.
 *
 * Diagonal positivity is not part of the structural contract; the operations
 * that need it (Jacobi preconditioning, scaled Gershgorin bounds) check it.
 * Instances are immutable once built.
 */
template <Scalar T>
class CsrMatrix {
public:
    using value_type = T;

    CsrMatrix() = default;

    CsrMatrix(std::size_t n, std::vector<std::size_t> row_starts,
              std::vector<std::size_t> col_indices, std::vector<T> values)
        : n_(n), row_starts_(std::move(row_starts)), col_indices_(std::move(col_indices)),
          values_(std::move(values)) {
        validate();
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t nonzeros() const noexcept { return values_.size(); }

    std::span<const std::size_t> row_starts() const noexcept { return row_starts_; }
    std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
    std::span<const T> values() const noexcept { return values_; }

    std::span<const std::size_t> row_cols(std::size_t i) const noexcept {
        return {col_indices_.data() + row_starts_[i], row_starts_[i + 1] - row_starts_[i]};
    }
    std::span<const T> row_values(std::size_t i) const noexcept {
        return {values_.data() + row_starts_[i], row_starts_[i + 1] - row_starts_[i]};
    }

    /// Stored value at (i, j), or 0 when the entry is structurally absent.
    T at(std::size_t i, std::size_t j) const {
        auto cols = row_cols(i);
        auto it = std::lower_bound(cols.begin(), cols.end(), j);
        if (it == cols.end() || *it != j) return T(0);
        return values_[row_starts_[i] + static_cast<std::size_t>(it - cols.begin())];
    }

    T diagonal(std::size_t i) const { return at(i, i); }

    Vector<T> diagonal() const {
        Vector<T> d(n_);
        for (std::size_t i = 0; i < n_; ++i) d[i] = diagonal(i);
        return d;
    }

    /// Number of off-diagonal neighbours of vertex i in the matrix graph.
    std::size_t degree(std::size_t i) const noexcept {
        return row_starts_[i + 1] - row_starts_[i] - 1;
    }

    friend bool operator==(const CsrMatrix& a, const CsrMatrix& b) {
        if (a.n_ != b.n_ || a.row_starts_ != b.row_starts_ || a.col_indices_ != b.col_indices_)
            return false;
        return std::equal(a.values_.begin(), a.values_.end(), b.values_.begin(), b.values_.end(),
                          [](T x, T y) { return detail::same_bits(x, y); });
    }

private:
    void validate() const {
        if (n_ == 0) throw Error(ErrorCode::InvalidArgument, "matrix dimension must be positive");
        if (row_starts_.size() != n_ + 1 || row_starts_.front() != 0 ||
            row_starts_.back() != col_indices_.size() || col_indices_.size() != values_.size())
            throw Error(ErrorCode::DimensionMismatch, "inconsistent CSR array lengths");
        for (std::size_t i = 0; i < n_; ++i) {
            if (row_starts_[i] > row_starts_[i + 1])
                throw Error(ErrorCode::InvalidArgument, "row_starts must be nondecreasing");
            for (std::size_t k = row_starts_[i]; k < row_starts_[i + 1]; ++k) {
                const std::size_t j = col_indices_[k];
                if (j >= n_)
                    throw Error(ErrorCode::IndexOutOfRange,
                                "column " + std::to_string(j) + " in row " + std::to_string(i));
                if (k > row_starts_[i] && col_indices_[k - 1] >= j)
                    throw Error(ErrorCode::DuplicateEntry,
                                "columns not strictly increasing in row " + std::to_string(i));
            }
        }
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t k = row_starts_[i]; k < row_starts_[i + 1]; ++k) {
                const std::size_t j = col_indices_[k];
                if (j == i) continue;
                auto cols = row_cols(j);
                auto it = std::lower_bound(cols.begin(), cols.end(), i);
                if (it == cols.end() || *it != i ||
                    !detail::same_bits(values_[row_starts_[j] + static_cast<std::size_t>(it - cols.begin())],
                                       values_[k]))
                    throw Error(ErrorCode::AsymmetricInput,
                                "entry (" + std::to_string(i) + "," + std::to_string(j) +
                                    ") has no matching mirror");
            }
        }
        for (std::size_t i = 0; i < n_; ++i) {
            auto cols = row_cols(i);
            if (!std::binary_search(cols.begin(), cols.end(), i))
                throw Error(ErrorCode::MissingDiagonal, "row " + std::to_string(i));
        }
    }

    std::size_t n_ = 0;
    std::vector<std::size_t> row_starts_;
    std::vector<std::size_t> col_indices_;
    std::vector<T> values_;
};

/// Full-precision matrix (binary64 values).
using SparseSymMatrix = CsrMatrix<double>;
/// Reduced-precision copy (binary32 values) used by the first solver stage.
using ReducedMatrix = CsrMatrix<float>;

enum class Mirror { no, yes };

/**
 * Builds a CSR matrix from coordinate triplets.
 *
 * With Mirror::yes every off-diagonal (i, j, v) also contributes (j, i, v), so
 * callers pass one triangle. Explicit zeros are dropped. Duplicates are
 * rejected rather than summed.
 */
template <Scalar T = double>
CsrMatrix<T> from_coordinates(std::span<const Triplet> triplets, std::size_t n,
                              Mirror mirror = Mirror::no) {
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "matrix dimension must be positive");

    std::vector<Triplet> entries;
    entries.reserve(mirror == Mirror::yes ? 2 * triplets.size() : triplets.size());
    for (const auto& t : triplets) {
        if (t.row >= n || t.col >= n)
            throw Error(ErrorCode::IndexOutOfRange, "(" + std::to_string(t.row) + "," +
                                                        std::to_string(t.col) + ") with n = " +
                                                        std::to_string(n));
        if (t.value == 0.0) continue;
        entries.push_back(t);
        if (mirror == Mirror::yes && t.row != t.col) entries.push_back({t.col, t.row, t.value});
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t k = 1; k < entries.size(); ++k) {
        if (entries[k].row == entries[k - 1].row && entries[k].col == entries[k - 1].col)
            throw Error(ErrorCode::DuplicateEntry, "(" + std::to_string(entries[k].row) + "," +
                                                       std::to_string(entries[k].col) + ")");
    }

    std::vector<std::size_t> row_starts(n + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<T> vals;
    cols.reserve(entries.size());
    vals.reserve(entries.size());
    for (const auto& e : entries) {
        ++row_starts[e.row + 1];
        cols.push_back(e.col);
        vals.push_back(static_cast<T>(e.value));
    }
    for (std::size_t i = 0; i < n; ++i) row_starts[i + 1] += row_starts[i];
    return CsrMatrix<T>(n, std::move(row_starts), std::move(cols), std::move(vals));
}

template <Scalar T = double>
CsrMatrix<T> from_coordinates(const std::vector<Triplet>& triplets, std::size_t n,
                              Mirror mirror = Mirror::no) {
    return from_coordinates<T>(std::span<const Triplet>(triplets), n, mirror);
}

/// y = A x, accumulated entirely in T.
template <Scalar T>
void spmv(const CsrMatrix<T>& a, std::span<const T> x, std::span<T> y) {
    if (x.size() != a.size() || y.size() != a.size())
        throw Error(ErrorCode::DimensionMismatch,
                    "spmv: matrix " + std::to_string(a.size()) + ", vector " +
                        std::to_string(x.size()));
    const auto rs = a.row_starts();
    const auto ci = a.col_indices();
    const auto v = a.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        T sum = T(0);
        for (std::size_t k = rs[i]; k < rs[i + 1]; ++k) sum += v[k] * x[ci[k]];
        y[i] = sum;
    }
}

template <Scalar T>
Vector<T> spmv(const CsrMatrix<T>& a, std::span<const T> x) {
    Vector<T> y(a.size());
    spmv(a, x, std::span<T>(y));
    return y;
}

template <Scalar T>
Vector<T> spmv(const CsrMatrix<T>& a, const Vector<T>& x) {
    return spmv(a, std::span<const T>(x));
}

template <Scalar T>
T dot(std::span<const T> x, std::span<const T> y) {
    if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "dot");
    T sum = T(0);
    for (std::size_t i = 0; i < x.size(); ++i) sum += x[i] * y[i];
    return sum;
}

template <Scalar T>
T norm2(std::span<const T> x) {
    return std::sqrt(dot(x, x));
}

namespace detail {

template <Scalar To>
To narrow_checked(double v) {
    const auto r = static_cast<To>(v);
    if (std::isinf(r) && !std::isinf(v))
        throw Error(ErrorCode::OverflowToInfinity,
                    "value " + std::to_string(v) + " exceeds binary32 range");
    return r;
}

} // namespace detail

/// Rounds every value to the nearest binary32; the sparsity structure is copied as-is.
inline ReducedMatrix downcast(const SparseSymMatrix& a) {
    std::vector<float> vals;
    vals.reserve(a.nonzeros());
    for (double v : a.values()) vals.push_back(detail::narrow_checked<float>(v));
    return ReducedMatrix(a.size(), {a.row_starts().begin(), a.row_starts().end()},
                         {a.col_indices().begin(), a.col_indices().end()}, std::move(vals));
}

inline Vector<float> downcast_vector(std::span<const double> x) {
    Vector<float> out;
    out.reserve(x.size());
    for (double v : x) out.push_back(detail::narrow_checked<float>(v));
    return out;
}

/// Exact: every binary32 value is a binary64 value.
inline Vector<double> upcast_vector(std::span<const float> x) {
    return Vector<double>(x.begin(), x.end());
}

} // namespace mpcg

#endif // MPCG_SPARSE_HPP
