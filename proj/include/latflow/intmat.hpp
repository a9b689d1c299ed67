#pragma once

// Exact integer matrix reductions: row Hermite normal form, Smith normal
// form with unimodular transforms, and integer kernels. All arithmetic is
// int64 with overflow checks; the matrices seen here are at most 10 x 10
// with small entries.

#include "latflow/types.hpp"

#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace latflow {

namespace intmat_detail {

inline std::int64_t mul(std::int64_t a, std::int64_t b) {
    std::int64_t out;
    if (__builtin_mul_overflow(a, b, &out))
        throw std::overflow_error("integer matrix overflow");
    return out;
}

inline std::int64_t add(std::int64_t a, std::int64_t b) {
    std::int64_t out;
    if (__builtin_add_overflow(a, b, &out))
        throw std::overflow_error("integer matrix overflow");
    return out;
}

// Floor division for the reduction step of HNF.
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0)))
        --q;
    return q;
}

// row r += c * row s
inline void row_axpy(IntMatrix& m, Eigen::Index r, Eigen::Index s, std::int64_t c) {
    if (c == 0)
        return;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        m(r, j) = add(m(r, j), mul(c, m(s, j)));
}

// col r += c * col s
inline void col_axpy(IntMatrix& m, Eigen::Index r, Eigen::Index s, std::int64_t c) {
    if (c == 0)
        return;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        m(i, r) = add(m(i, r), mul(c, m(i, s)));
}

} // namespace intmat_detail

struct ExtendedGcd {
    std::int64_t g; // gcd >= 0
    std::int64_t x; // a*x + b*y = g
    std::int64_t y;
};

inline ExtendedGcd extended_gcd(std::int64_t a, std::int64_t b) {
    std::int64_t old_r = a, r = b, old_s = 1, s = 0, old_t = 0, t = 1;
    while (r != 0) {
        const std::int64_t q = old_r / r;
        std::tie(old_r, r) = std::pair{r, old_r - q * r};
        std::tie(old_s, s) = std::pair{s, old_s - q * s};
        std::tie(old_t, t) = std::pair{t, old_t - q * t};
    }
    if (old_r < 0)
        return {-old_r, -old_s, -old_t};
    return {old_r, old_s, old_t};
}

inline std::int64_t content(const IntVector& v) {
    std::int64_t g = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        g = std::gcd(g, v(i));
    return g;
}

/// Row-style Hermite normal form of the row lattice of a. Zero rows are
/// dropped. Pivots are positive, strictly increasing in column, and the
/// entries above each pivot are reduced into [0, pivot).
inline IntMatrix row_hnf(IntMatrix a) {
    using namespace intmat_detail;
    const Eigen::Index rows = a.rows(), cols = a.cols();
    Eigen::Index pivot_row = 0;
    std::vector<Eigen::Index> pivot_cols;
    for (Eigen::Index c = 0; c < cols && pivot_row < rows; ++c) {
        // Euclid down the column until a single nonzero remains at pivot_row.
        for (Eigen::Index r = pivot_row + 1; r < rows; ++r) {
            if (a(r, c) == 0)
                continue;
            const auto [g, x, y] = extended_gcd(a(pivot_row, c), a(r, c));
            const std::int64_t p = a(pivot_row, c) / g;
            const std::int64_t q = a(r, c) / g;
            for (Eigen::Index j = 0; j < cols; ++j) {
                const std::int64_t top = a(pivot_row, j), bottom = a(r, j);
                a(pivot_row, j) = add(mul(x, top), mul(y, bottom));
                a(r, j) = add(mul(-q, top), mul(p, bottom));
            }
        }
        if (a(pivot_row, c) == 0)
            continue;
        if (a(pivot_row, c) < 0)
            a.row(pivot_row) *= -1;
        const std::int64_t piv = a(pivot_row, c);
        for (Eigen::Index r = 0; r < pivot_row; ++r)
            row_axpy(a, r, pivot_row, -floor_div(a(r, c), piv));
        pivot_cols.push_back(c);
        ++pivot_row;
    }
    return a.topRows(pivot_row);
}

/// Smith normal form p * a * q = d with p, q unimodular; q_inv = q^{-1}.
struct SmithForm {
    std::vector<std::int64_t> divisors; // nonzero diagonal, each divides the next
    IntMatrix p;
    IntMatrix q;
    IntMatrix q_inv;

    int rank() const { return static_cast<int>(divisors.size()); }
};

inline SmithForm smith_form(IntMatrix a) {
    using namespace intmat_detail;
    const Eigen::Index m = a.rows(), n = a.cols();
    IntMatrix p = IntMatrix::Identity(m, m);
    IntMatrix q = IntMatrix::Identity(n, n);
    IntMatrix q_inv = IntMatrix::Identity(n, n);

    auto swap_rows = [&](Eigen::Index i, Eigen::Index j) {
        if (i == j)
            return;
        a.row(i).swap(a.row(j));
        p.row(i).swap(p.row(j));
    };
    auto swap_cols = [&](Eigen::Index i, Eigen::Index j) {
        if (i == j)
            return;
        a.col(i).swap(a.col(j));
        q.col(i).swap(q.col(j));
        q_inv.row(i).swap(q_inv.row(j));
    };
    // col r += c * col s, mirrored on q and q_inv.
    auto col_op = [&](Eigen::Index r, Eigen::Index s, std::int64_t c) {
        col_axpy(a, r, s, c);
        col_axpy(q, r, s, c);
        row_axpy(q_inv, s, r, -c);
    };
    auto row_op = [&](Eigen::Index r, Eigen::Index s, std::int64_t c) {
        row_axpy(a, r, s, c);
        row_axpy(p, r, s, c);
    };

    std::vector<std::int64_t> divisors;
    for (Eigen::Index t = 0; t < std::min(m, n); ++t) {
        // Smallest nonzero entry of the trailing block becomes the pivot.
        while (true) {
            Eigen::Index bi = -1, bj = -1;
            for (Eigen::Index i = t; i < m; ++i)
                for (Eigen::Index j = t; j < n; ++j)
                    if (a(i, j) != 0 && (bi < 0 || std::llabs(a(i, j)) < std::llabs(a(bi, bj)))) {
                        bi = i;
                        bj = j;
                    }
            if (bi < 0)
                break;
            swap_rows(t, bi);
            swap_cols(t, bj);
            bool clean = true;
            for (Eigen::Index i = t + 1; i < m; ++i) {
                row_op(i, t, -(a(i, t) / a(t, t)));
                clean = clean && a(i, t) == 0;
            }
            for (Eigen::Index j = t + 1; j < n; ++j) {
                col_op(j, t, -(a(t, j) / a(t, t)));
                clean = clean && a(t, j) == 0;
            }
            if (!clean)
                continue;
            // Divisibility: fold any offending row into row t and retry.
            Eigen::Index bad = -1;
            for (Eigen::Index i = t + 1; i < m && bad < 0; ++i)
                for (Eigen::Index j = t + 1; j < n; ++j)
                    if (a(i, j) % a(t, t) != 0) {
                        bad = i;
                        break;
                    }
            if (bad < 0)
                break;
            row_op(t, bad, 1);
        }
        if (a(t, t) == 0)
            break;
        if (a(t, t) < 0) {
            a.row(t) *= -1;
            p.row(t) *= -1;
        }
        divisors.push_back(a(t, t));
    }
    return {std::move(divisors), std::move(p), std::move(q), std::move(q_inv)};
}

/// Basis (as rows, in HNF) of {v in Z^n : a v = 0}.
inline IntMatrix integer_kernel(const IntMatrix& a) {
    const auto snf = smith_form(a);
    const Eigen::Index n = a.cols();
    const Eigen::Index r = snf.rank();
    if (r == n)
        return IntMatrix(0, n);
    IntMatrix rows = snf.q.rightCols(n - r).transpose();
    return row_hnf(rows);
}

/// Exact determinant of a small square integer matrix (Bareiss).
inline std::int64_t integer_determinant(IntMatrix a) {
    using namespace intmat_detail;
    const Eigen::Index n = a.rows();
    if (n != a.cols())
        throw std::invalid_argument("determinant of non-square matrix");
    if (n == 0)
        return 1;
    std::int64_t sign = 1, prev = 1;
    for (Eigen::Index k = 0; k < n - 1; ++k) {
        if (a(k, k) == 0) {
            Eigen::Index s = k + 1;
            while (s < n && a(s, k) == 0)
                ++s;
            if (s == n)
                return 0;
            a.row(k).swap(a.row(s));
            sign = -sign;
        }
        for (Eigen::Index i = k + 1; i < n; ++i)
            for (Eigen::Index j = k + 1; j < n; ++j)
                a(i, j) = add(mul(a(i, j), a(k, k)), -mul(a(i, k), a(k, j))) / prev;
        prev = a(k, k);
    }
    return sign * a(n - 1, n - 1);
}

} // namespace latflow
