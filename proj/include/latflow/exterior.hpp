#pragma once

// Exterior algebra of R^k with the sup norm on coefficients.
//
// Basis elements e_I are indexed by bitmasks: bit b set means coordinate b
// (0-based) belongs to I, and e_I = e_{i_1} ^ ... ^ e_{i_j} with
// i_1 < ... < i_j. The empty mask is the scalar grade, e_{} = 1.

#include "latflow/types.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace latflow {

using Mask = std::uint32_t;

inline constexpr int kMaxExteriorDim = 8;

namespace detail {

template <class T>
T checked_mul(T a, T b) {
    if constexpr (std::is_integral_v<T>) {
        T out;
        if (__builtin_mul_overflow(a, b, &out))
            throw std::overflow_error("integer overflow in exterior product");
        return out;
    } else {
        return a * b;
    }
}

template <class T>
T checked_add(T a, T b) {
    if constexpr (std::is_integral_v<T>) {
        T out;
        if (__builtin_add_overflow(a, b, &out))
            throw std::overflow_error("integer overflow in exterior product");
        return out;
    } else {
        return a + b;
    }
}

} // namespace detail

/// Sign of the shuffle taking (I, J) to sorted I u J, for disjoint I, J.
/// Counts pairs (i in I, j in J) with i > j.
inline int shuffle_sign(Mask i_mask, Mask j_mask) {
    int inversions = 0;
    for (Mask rest = j_mask; rest != 0; rest &= rest - 1) {
        const int j = std::countr_zero(rest);
        const Mask above = ~((Mask{2} << j) - 1);
        inversions += std::popcount(i_mask & above);
    }
    return (inversions % 2 == 0) ? 1 : -1;
}

/// All masks of popcount j over k coordinates, in increasing numeric order.
inline std::vector<Mask> subsets_of_size(int k, int j) {
    std::vector<Mask> out;
    for (Mask m = 0; m < (Mask{1} << k); ++m)
        if (std::popcount(m) == j)
            out.push_back(m);
    return out;
}

/// Dense multivector: 2^k coefficients, one per subset of {0..k-1}.
template <class T>
class BasicMultiVector {
public:
    using value_type = T;

    explicit BasicMultiVector(int dim) : dim_(dim) {
        if (dim < 0 || dim > kMaxExteriorDim)
            throw std::invalid_argument("exterior dimension must lie in [0, 8]");
        coeffs_.assign(std::size_t{1} << dim, T{0});
    }

    BasicMultiVector(int dim, std::vector<T> coeffs) : dim_(dim), coeffs_(std::move(coeffs)) {
        if (dim < 0 || dim > kMaxExteriorDim)
            throw std::invalid_argument("exterior dimension must lie in [0, 8]");
        if (coeffs_.size() != (std::size_t{1} << dim))
            throw std::invalid_argument("coefficient table must have 2^k entries");
    }

    static BasicMultiVector scalar(int dim, T value) {
        BasicMultiVector out(dim);
        out.coeffs_[0] = value;
        return out;
    }

    static BasicMultiVector basis(int dim, Mask subset, T value = T{1}) {
        BasicMultiVector out(dim);
        if (subset >= out.coeffs_.size())
            throw std::invalid_argument("basis subset outside {0..k-1}");
        out.coeffs_[subset] = value;
        return out;
    }

    /// Grade-1 element sum v_i e_i.
    static BasicMultiVector from_vector(std::span<const T> v) {
        BasicMultiVector out(static_cast<int>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i)
            out.coeffs_[Mask{1} << i] = v[i];
        return out;
    }

    int dimension() const { return dim_; }
    std::size_t size() const { return coeffs_.size(); }
    const std::vector<T>& coefficients() const { return coeffs_; }

    T operator[](Mask subset) const { return coeffs_.at(subset); }

    bool is_zero() const {
        return std::all_of(coeffs_.begin(), coeffs_.end(), [](T c) { return c == T{0}; });
    }

    auto sup_norm() const {
        using std::abs;
        T best{0};
        for (T c : coeffs_)
            best = std::max(best, static_cast<T>(abs(c)));
        return best;
    }

    /// Largest grade carrying a nonzero coefficient, or -1 for zero.
    int top_grade() const {
        int g = -1;
        for (Mask m = 0; m < coeffs_.size(); ++m)
            if (coeffs_[m] != T{0})
                g = std::max(g, std::popcount(m));
        return g;
    }

    BasicMultiVector operator-() const {
        BasicMultiVector out(*this);
        for (T& c : out.coeffs_)
            c = -c;
        return out;
    }

    friend bool operator==(const BasicMultiVector&, const BasicMultiVector&) = default;

    template <class U>
    BasicMultiVector<U> cast() const {
        std::vector<U> c(coeffs_.begin(), coeffs_.end());
        return BasicMultiVector<U>(dim_, std::move(c));
    }

private:
    int dim_;
    std::vector<T> coeffs_;
};

using MultiVector = BasicMultiVector<Real>;
using IntMultiVector = BasicMultiVector<std::int64_t>;

template <class T>
BasicMultiVector<T> wedge(const BasicMultiVector<T>& a, const BasicMultiVector<T>& b) {
    if (a.dimension() != b.dimension())
        throw std::invalid_argument("wedge: dimension mismatch");
    const auto& ac = a.coefficients();
    const auto& bc = b.coefficients();
    std::vector<T> out(ac.size(), T{0});
    for (Mask i = 0; i < ac.size(); ++i) {
        if (ac[i] == T{0})
            continue;
        for (Mask j = 0; j < bc.size(); ++j) {
            if (bc[j] == T{0} || (i & j) != 0)
                continue;
            T term = detail::checked_mul(ac[i], bc[j]);
            if (shuffle_sign(i, j) < 0)
                term = -term;
            out[i | j] = detail::checked_add(out[i | j], term);
        }
    }
    return BasicMultiVector<T>(a.dimension(), std::move(out));
}

/// Rank-j discrete subgroup given by j basis vectors in R^k (or Z^k).
template <class T>
struct BasicSubgroupBasis {
    int dimension = 0;
    std::vector<std::vector<T>> vectors;

    int rank() const { return static_cast<int>(vectors.size()); }
};

using SubgroupBasis = BasicSubgroupBasis<std::int64_t>;
using RealSubgroupBasis = BasicSubgroupBasis<Real>;

/// w = v_1 ^ ... ^ v_j, or the scalar 1 for the trivial subgroup.
/// Defined up to sign; only sign-insensitive uses are meaningful.
template <class T>
BasicMultiVector<T> represent(const BasicSubgroupBasis<T>& g) {
    auto w = BasicMultiVector<T>::scalar(g.dimension, T{1});
    for (const auto& v : g.vectors) {
        if (static_cast<int>(v.size()) != g.dimension)
            throw std::invalid_argument("represent: basis vector of wrong length");
        w = wedge(w, BasicMultiVector<T>::from_vector(std::span<const T>(v)));
    }
    if (w.is_zero())
        throw std::invalid_argument("represent: basis vectors are linearly dependent");
    return w;
}

template <class T>
auto subgroup_norm(const BasicSubgroupBasis<T>& g) {
    return represent(g).sup_norm();
}

/// Image of w under the exterior power of the linear map a (k x k):
/// e_I maps to (a e_{i_1}) ^ ... ^ (a e_{i_j}).
template <class Scalar, class Derived>
BasicMultiVector<Scalar> exterior_action(const Eigen::MatrixBase<Derived>& a,
                                         const BasicMultiVector<Scalar>& w) {
    const int k = w.dimension();
    if (a.rows() != k || a.cols() != k)
        throw std::invalid_argument("exterior_action: matrix/multivector dimension mismatch");
    std::vector<BasicMultiVector<Scalar>> columns;
    columns.reserve(k);
    for (int c = 0; c < k; ++c) {
        std::vector<Scalar> col(k);
        for (int r = 0; r < k; ++r)
            col[r] = static_cast<Scalar>(a(r, c));
        columns.push_back(BasicMultiVector<Scalar>::from_vector(col));
    }
    std::vector<Scalar> out(w.size(), Scalar{0});
    for (Mask subset = 0; subset < w.size(); ++subset) {
        const Scalar c = w[subset];
        if (c == Scalar{0})
            continue;
        auto image = BasicMultiVector<Scalar>::scalar(k, c);
        for (Mask rest = subset; rest != 0; rest &= rest - 1)
            image = wedge(image, columns[std::countr_zero(rest)]);
        const auto& ic = image.coefficients();
        for (Mask m = 0; m < ic.size(); ++m)
            out[m] += ic[m];
    }
    return BasicMultiVector<Scalar>(k, std::move(out));
}

/// j-th compound matrix of a (k x k): entry (J, I) is the minor det a[J, I],
/// rows and columns ordered as subsets_of_size(k, j).
template <class Derived>
RealMatrix compound_matrix(const Eigen::MatrixBase<Derived>& a, int j) {
    const int k = static_cast<int>(a.rows());
    const auto subsets = subsets_of_size(k, j);
    const auto n = static_cast<Eigen::Index>(subsets.size());
    RealMatrix out = RealMatrix::Zero(n, n);
    std::vector<Eigen::Index> position(std::size_t{1} << k, -1);
    for (Eigen::Index i = 0; i < n; ++i)
        position[subsets[i]] = i;
    RealMatrix ar = a.template cast<Real>();
    for (Eigen::Index col = 0; col < n; ++col) {
        const auto image = exterior_action(ar, MultiVector::basis(k, subsets[col]));
        for (Eigen::Index row = 0; row < n; ++row)
            out(row, col) = image[subsets[row]];
    }
    return out;
}

} // namespace latflow
