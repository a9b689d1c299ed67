#pragma once

// Lattices gZ^k, the shortest-vector function delta (sup norm), the
// diagonal flow g_t, unipotent one-parameter maps, and the poset of primitive
// subgroups of Z^k.

#include "latflow/exterior.hpp"
#include "latflow/intmat.hpp"
#include "latflow/types.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace latflow {

inline constexpr Real kSingularDetTolerance = 1e-12L;
inline constexpr Real kUnimodularTolerance = 1e-9L;

namespace lattice_detail {

// Error-free transformations (Dekker, Knuth) in the working precision.
inline void two_sum(Real a, Real b, Real& s, Real& e) {
    s = a + b;
    const Real bb = s - a;
    e = (a - (s - bb)) + (b - bb);
}

inline void split(Real a, Real& hi, Real& lo) {
    constexpr Real factor = 4294967297.0L; // 2^32 + 1 for a 64-bit significand
    const Real c = factor * a;
    hi = c - (c - a);
    lo = a - hi;
}

inline void two_prod(Real a, Real b, Real& p, Real& e) {
    p = a * b;
    Real ah, al, bh, bl;
    split(a, ah, al);
    split(b, bh, bl);
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
}

/// sum_j row(j) * m(j) as if computed in twice the working precision.
template <class Row>
Real accurate_dot(const Row& row, const IntVector& m) {
    Real s = 0, c = 0;
    for (Eigen::Index j = 0; j < m.size(); ++j) {
        if (m(j) == 0)
            continue;
        Real p, ep, q;
        two_prod(row(j), static_cast<Real>(m(j)), p, ep);
        two_sum(s, p, s, q);
        c += q + ep;
    }
    return s + c;
}

} // namespace lattice_detail

/// Full-rank lattice g Z^k; the columns of the basis generate it. The basis
/// is kept as diag(scale) * core so that flowed lattices, whose entries mix
/// e^t with e^-t, still evaluate their points to full relative accuracy.
class Lattice {
public:
    explicit Lattice(const RealMatrix& basis, bool integer_derived = false)
        : Lattice(RealVector::Ones(basis.rows()), basis, integer_derived) {}

    /// Lattice diag(scale) * core Z^k.
    Lattice(RealVector scale, RealMatrix core, bool integer_derived = false)
        : core_(std::move(core)), scale_(std::move(scale)), integer_derived_(integer_derived) {
        if (core_.rows() != core_.cols() || core_.rows() == 0 || scale_.size() != core_.rows())
            throw std::invalid_argument("lattice basis must be a nonempty square matrix");
        if (!core_.allFinite() || !scale_.allFinite())
            throw std::invalid_argument("lattice basis has non-finite entries");
        basis_ = scale_.asDiagonal() * core_;
        det_ = scale_.prod() * core_.determinant();
        if (std::abs(det_) <= kSingularDetTolerance)
            throw std::invalid_argument("lattice basis is numerically singular");
    }

    static Lattice standard(int k) { return Lattice(RealMatrix::Identity(k, k), true); }

    int dimension() const { return static_cast<int>(basis_.rows()); }
    const RealMatrix& basis() const { return basis_; }
    Real determinant() const { return det_; }
    bool integer_derived() const { return integer_derived_; }
    bool unimodular() const { return std::abs(std::abs(det_) - 1) <= kUnimodularTolerance; }

    RealVector point(const IntVector& m) const {
        RealVector v(core_.rows());
        for (Eigen::Index i = 0; i < core_.rows(); ++i)
            v(i) = scale_(i) * lattice_detail::accurate_dot(core_.row(i), m);
        return v;
    }

    /// Lattice (transform * g) Z^k. Diagonal transforms only rescale.
    Lattice transformed(const RealMatrix& transform) const {
        const bool keep = integer_derived_ && transform.isIdentity(0);
        if (transform.rows() == transform.cols() && transform.rows() == core_.rows() &&
            RealMatrix(transform.diagonal().asDiagonal()) == transform)
            return Lattice(scale_.cwiseProduct(transform.diagonal()), core_, keep);
        return Lattice(transform * basis_, keep);
    }

private:
    RealMatrix core_;
    RealVector scale_;
    RealMatrix basis_;
    Real det_;
    bool integer_derived_;
};

/// Flow parameters t_1..t_n >= 0; t = sum t_i is always derived.
class FlowVector {
public:
    FlowVector() = default;
    explicit FlowVector(std::vector<Real> components) : t_(std::move(components)) {
        for (Real ti : t_)
            if (!(ti >= 0) || !std::isfinite(static_cast<double>(ti)))
                throw std::invalid_argument("flow components must be finite and nonnegative");
    }

    std::size_t size() const { return t_.size(); }
    const std::vector<Real>& components() const { return t_; }
    Real operator[](std::size_t i) const { return t_.at(i); }
    Real total() const { return std::accumulate(t_.begin(), t_.end(), Real{0}); }

    FlowVector floor() const {
        std::vector<Real> f(t_.size());
        std::transform(t_.begin(), t_.end(), f.begin(), [](Real x) { return std::floor(x); });
        return FlowVector(std::move(f));
    }

    friend bool operator==(const FlowVector&, const FlowVector&) = default;

private:
    std::vector<Real> t_;
};

/// g_t = diag(e^t, e^{-t_1}, ..., e^{-t_n}).
inline RealMatrix flow_matrix(const FlowVector& t) {
    const auto n = static_cast<Eigen::Index>(t.size());
    RealMatrix g = RealMatrix::Zero(n + 1, n + 1);
    g(0, 0) = std::exp(t.total());
    for (Eigen::Index i = 0; i < n; ++i)
        g(i + 1, i + 1) = std::exp(-t[static_cast<std::size_t>(i)]);
    return g;
}

/// u_y = [[1, y^T], [0, I_n]].
inline RealMatrix unipotent_shear(std::span<const Real> y) {
    const auto n = static_cast<Eigen::Index>(y.size());
    RealMatrix u = RealMatrix::Identity(n + 1, n + 1);
    for (Eigen::Index i = 0; i < n; ++i)
        u(0, i + 1) = y[static_cast<std::size_t>(i)];
    return u;
}

/// Lambda_y = u_y Z^{n+1}; its points are (q.y + p, q_1, ..., q_n).
inline Lattice make_lambda_y(std::span<const Real> y) {
    for (Real v : y)
        if (!std::isfinite(static_cast<double>(v)))
            throw std::invalid_argument("make_lambda_y: non-finite entry");
    return Lattice(unipotent_shear(y));
}

inline Lattice apply_flow(const Lattice& lattice, const FlowVector& t) {
    if (lattice.dimension() != static_cast<int>(t.size()) + 1)
        throw std::invalid_argument("apply_flow: lattice dimension must be n + 1");
    return lattice.transformed(flow_matrix(t));
}

/// exp(x N) for nilpotent N, via the terminating power series.
inline RealMatrix unipotent_orbit_point(const RealMatrix& nilpotent, Real x) {
    const auto k = nilpotent.rows();
    if (k != nilpotent.cols())
        throw std::invalid_argument("unipotent_orbit_point: N must be square");
    RealMatrix power = RealMatrix::Identity(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        power = power * nilpotent;
    const Real scale = std::max<Real>(1, nilpotent.cwiseAbs().maxCoeff());
    if (power.cwiseAbs().maxCoeff() > 1e-12L * std::pow(scale, static_cast<Real>(k)))
        throw std::invalid_argument("unipotent_orbit_point: N is not nilpotent");
    RealMatrix term = RealMatrix::Identity(k, k);
    RealMatrix sum = term;
    for (Eigen::Index i = 1; i < k; ++i) {
        term = term * nilpotent * (x / static_cast<Real>(i));
        sum += term;
    }
    return sum;
}

inline Real sup_norm(const RealVector& v) { return v.size() == 0 ? 0 : v.cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------
// Short vector enumeration

/// LLL-reduced basis together with the unimodular change of basis.
struct ReducedBasis {
    RealMatrix basis;   // original * transform
    IntMatrix transform;
};

/// LLL reduction (Euclidean, delta = 0.99) of the columns of `basis`. Used
/// only to shrink the certified enumeration box; the lattice is unchanged.
inline ReducedBasis lll_reduce(const RealMatrix& basis) {
    const Eigen::Index n = basis.cols();
    RealMatrix b = basis;
    IntMatrix u = IntMatrix::Identity(n, n);
    if (n <= 1)
        return {b, u};

    RealMatrix mu = RealMatrix::Zero(n, n);
    RealVector norms(n);
    RealMatrix star = b;
    auto gram_schmidt = [&]() {
        for (Eigen::Index i = 0; i < n; ++i) {
            star.col(i) = b.col(i);
            for (Eigen::Index j = 0; j < i; ++j) {
                mu(i, j) = norms(j) > 0 ? b.col(i).dot(star.col(j)) / norms(j) : 0;
                star.col(i) -= mu(i, j) * star.col(j);
            }
            norms(i) = star.col(i).squaredNorm();
        }
    };
    gram_schmidt();
    constexpr Real lovasz = 0.99L;
    Eigen::Index k = 1;
    int guard = 0;
    while (k < n) {
        if (++guard > 100000)
            break; // float stalls are harmless: enumeration stays exact for any basis
        for (Eigen::Index j = k - 1; j >= 0; --j) {
            const Real r = std::round(mu(k, j));
            if (r == 0)
                continue;
            if (std::abs(r) > 4e18L)
                throw std::overflow_error("lll_reduce: transform entries overflow");
            const auto c = static_cast<std::int64_t>(r);
            b.col(k) -= r * b.col(j);
            for (Eigen::Index row = 0; row < n; ++row)
                u(row, k) = intmat_detail::add(u(row, k), intmat_detail::mul(-c, u(row, j)));
            for (Eigen::Index l = 0; l <= j; ++l)
                mu(k, l) -= r * (l == j ? 1 : mu(j, l));
        }
        if (norms(k) >= (lovasz - mu(k, k - 1) * mu(k, k - 1)) * norms(k - 1)) {
            ++k;
        } else {
            b.col(k).swap(b.col(k - 1));
            u.col(k).swap(u.col(k - 1));
            gram_schmidt();
            k = std::max<Eigen::Index>(k - 1, 1);
        }
    }
    // Recompute from the exact integer transform to avoid drift.
    return {basis * u.cast<Real>(), u};
}

/// LLL reduction of a lattice with its columns re-evaluated exactly after
/// every pass. A single pass on a strongly flowed basis stalls once the
/// cancellation reaches the working precision; the next pass resumes from
/// accurate columns.
inline ReducedBasis reduce(const Lattice& lattice) {
    const Eigen::Index n = lattice.dimension();
    IntMatrix u = IntMatrix::Identity(n, n);
    RealMatrix cols = lattice.basis();
    for (int pass = 0; pass < 8; ++pass) {
        const auto r = lll_reduce(cols);
        if (r.transform == IntMatrix::Identity(n, n))
            break;
        IntMatrix next = IntMatrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index l = 0; l < n; ++l)
                    next(i, j) = intmat_detail::add(next(i, j), intmat_detail::mul(u(i, l), r.transform(l, j)));
        u = std::move(next);
        for (Eigen::Index c = 0; c < n; ++c)
            cols.col(c) = lattice.point(u.col(c));
    }
    return {cols, u};
}

struct ShortVector {
    IntVector coefficients; // in the coordinates of the original basis
    Real norm;
};

struct EnumerationOptions {
    std::int64_t budget = enumeration_budget_default().load();
    Real bound_scale = 1; // multiplies every certified box half-width
};

namespace lattice_detail {

// Certified per-coordinate half-widths: |m_i| <= ||row_i(B^{-1})||_1 * radius.
inline std::vector<std::int64_t> box_bounds(const RealMatrix& reduced, Real radius, Real scale,
                                            std::int64_t budget) {
    const RealMatrix inv = reduced.inverse();
    std::vector<std::int64_t> bounds(static_cast<std::size_t>(reduced.cols()));
    long double volume = 1;
    for (Eigen::Index i = 0; i < reduced.cols(); ++i) {
        const Real b = inv.row(i).cwiseAbs().sum() * radius * (1 + 1e-12L) * scale + 1e-9L;
        if (!(b < 1e15L))
            throw BudgetExceeded("enumeration box half-width overflows");
        bounds[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(b));
        volume *= static_cast<long double>(2 * bounds[static_cast<std::size_t>(i)] + 1);
    }
    if (volume > static_cast<long double>(budget))
        throw BudgetExceeded("enumeration box of " + std::to_string(static_cast<double>(volume)) +
                             " points exceeds budget of " + std::to_string(budget));
    return bounds;
}

// Visits every nonzero m in the box whose leading nonzero entry is positive,
// passing the partial image reduced * m. The callback may shrink nothing;
// boxes are small after reduction.
template <class Visit>
void visit_box(const RealMatrix& reduced, const std::vector<std::int64_t>& bounds, Visit&& visit) {
    const Eigen::Index n = reduced.cols();
    IntVector m = IntVector::Zero(n);
    std::vector<RealVector> partial(static_cast<std::size_t>(n) + 1, RealVector::Zero(reduced.rows()));
    // Recursive odometer from the last coordinate backwards so the sign
    // normalization (leading nonzero positive) prunes half the box.
    std::function<void(Eigen::Index, bool)> rec = [&](Eigen::Index i, bool nonzero_so_far) {
        if (i == n) {
            if (nonzero_so_far)
                visit(m, partial[static_cast<std::size_t>(n)]);
            return;
        }
        const std::int64_t b = bounds[static_cast<std::size_t>(i)];
        const std::int64_t lo = nonzero_so_far ? -b : 0;
        for (std::int64_t v = lo; v <= b; ++v) {
            m(i) = v;
            partial[static_cast<std::size_t>(i) + 1] =
                partial[static_cast<std::size_t>(i)] + static_cast<Real>(v) * reduced.col(i);
            rec(i + 1, nonzero_so_far || v != 0);
        }
        m(i) = 0;
    };
    rec(0, false);
}

inline bool lex_less(const IntVector& a, const IntVector& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a(i) != b(i))
            return a(i) < b(i);
    return false;
}

inline IntVector normalize_sign(IntVector v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v(i) != 0) {
            if (v(i) < 0)
                v = -v;
            break;
        }
    }
    return v;
}

} // namespace lattice_detail

/// Every nonzero m (up to sign, leading nonzero coefficient positive) with
/// ||basis * m||_inf <= radius. Complete by the box certificate.
inline std::vector<ShortVector> enumerate_short_vectors(const RealMatrix& basis, Real radius,
                                                        const EnumerationOptions& opts = {}) {
    std::vector<ShortVector> out;
    if (radius < 0)
        return out;
    const auto reduced = lll_reduce(basis);
    const auto bounds = lattice_detail::box_bounds(reduced.basis, radius, opts.bound_scale, opts.budget);
    lattice_detail::visit_box(reduced.basis, bounds, [&](const IntVector& m, const RealVector& image) {
        const Real norm = sup_norm(image);
        if (norm <= radius) {
            IntVector orig = reduced.transform * m;
            out.push_back({lattice_detail::normalize_sign(std::move(orig)), norm});
        }
    });
    std::sort(out.begin(), out.end(), [](const ShortVector& a, const ShortVector& b) {
        return lattice_detail::lex_less(a.coefficients, b.coefficients);
    });
    return out;
}

struct DeltaResult {
    Real value;
    IntVector witness; // coefficient vector m with ||g m|| = value
    std::int64_t box_points;
};

inline constexpr Real kDeltaTieTolerance = 1e-12L;

/// delta(L) = min over nonzero lattice vectors of the sup norm. Exact: the
/// search box is certified by ||m||_inf <= ||B^{-1}||_{inf->inf} R for a
/// (reduced) basis B and current radius R. Ties go to the lexicographically
/// smallest sign-normalized coefficient vector.
inline DeltaResult delta(const Lattice& lattice, const EnumerationOptions& opts = {}) {
    const auto reduced = reduce(lattice);
    const RealMatrix& b = reduced.basis;
    Real radius = std::numeric_limits<Real>::infinity();
    for (Eigen::Index c = 0; c < b.cols(); ++c)
        radius = std::min(radius, sup_norm(b.col(c)));

    // Shrinking search: restart with the tighter certified box whenever the
    // best norm found drops substantially.
    while (true) {
        const auto bounds = lattice_detail::box_bounds(b, radius, opts.bound_scale, opts.budget);
        Real best = std::numeric_limits<Real>::infinity();
        std::vector<IntVector> ties;
        std::int64_t visited = 0;
        lattice_detail::visit_box(b, bounds, [&](const IntVector& m, const RealVector& image) {
            ++visited;
            const Real norm = sup_norm(image);
            if (norm < best * (1 - kDeltaTieTolerance)) {
                best = norm;
                ties.clear();
                ties.push_back(m);
            } else if (norm <= best * (1 + kDeltaTieTolerance)) {
                ties.push_back(m);
            }
        });
        if (best < radius * 0.5L && visited > 4096) {
            radius = best;
            continue;
        }
        std::vector<std::pair<IntVector, Real>> candidates;
        Real value = std::numeric_limits<Real>::infinity();
        for (const auto& m : ties) {
            IntVector orig = lattice_detail::normalize_sign(reduced.transform * m);
            const Real norm = sup_norm(lattice.point(orig));
            value = std::min(value, norm);
            candidates.emplace_back(std::move(orig), norm);
        }
        IntVector witness;
        for (const auto& [m, norm] : candidates)
            if (norm <= value * (1 + kDeltaTieTolerance) &&
                (witness.size() == 0 || lattice_detail::lex_less(m, witness)))
                witness = m;
        value = sup_norm(lattice.point(witness));
        return {value, witness, visited};
    }
}

// ---------------------------------------------------------------------------
// Primitive subgroups of Z^k

/// Nonzero primitive subgroup of Z^k, stored as its row Hermite normal form
/// (rows are basis vectors). Equality is equality of HNF matrices.
class PrimitiveSubgroup {
public:
    /// Validates primitivity; `rows` need not be reduced.
    static PrimitiveSubgroup from_basis(const IntMatrix& rows) {
        const auto hnf = row_hnf(rows);
        if (hnf.rows() != rows.rows() || hnf.rows() == 0)
            throw std::invalid_argument("primitive subgroup basis must be independent and nonempty");
        const auto snf = smith_form(hnf);
        for (auto d : snf.divisors)
            if (d != 1)
                throw std::invalid_argument("subgroup is not primitive");
        return PrimitiveSubgroup(hnf);
    }

    int dimension() const { return static_cast<int>(hnf_.cols()); }
    int rank() const { return static_cast<int>(hnf_.rows()); }
    const IntMatrix& hnf() const { return hnf_; }

    SubgroupBasis basis() const {
        SubgroupBasis g{dimension(), {}};
        for (Eigen::Index r = 0; r < hnf_.rows(); ++r) {
            std::vector<std::int64_t> v(static_cast<std::size_t>(hnf_.cols()));
            for (Eigen::Index c = 0; c < hnf_.cols(); ++c)
                v[static_cast<std::size_t>(c)] = hnf_(r, c);
            g.vectors.push_back(std::move(v));
        }
        return g;
    }

    IntMultiVector representative() const { return represent(basis()); }

    /// ||T Gamma||: sup norm of the exterior image of the representative.
    Real norm_under(const RealMatrix& transform) const {
        return exterior_action(transform, representative().cast<Real>()).sup_norm();
    }

    Real norm() const { return static_cast<Real>(representative().sup_norm()); }

    /// True if v lies in this subgroup (equivalently in its real span).
    bool contains_vector(std::span<const std::int64_t> v) const {
        const auto w = representative();
        const auto vv = IntMultiVector::from_vector(v);
        return wedge(w, vv).is_zero();
    }

    /// Inclusion of subgroups (this subset of other).
    bool is_subgroup_of(const PrimitiveSubgroup& other) const {
        if (rank() > other.rank() || dimension() != other.dimension())
            return false;
        const auto w = other.representative();
        for (Eigen::Index r = 0; r < hnf_.rows(); ++r) {
            std::vector<std::int64_t> v(static_cast<std::size_t>(hnf_.cols()));
            for (Eigen::Index c = 0; c < hnf_.cols(); ++c)
                v[static_cast<std::size_t>(c)] = hnf_(r, c);
            if (!wedge(w, IntMultiVector::from_vector(std::span<const std::int64_t>(v))).is_zero())
                return false;
        }
        return true;
    }

    bool comparable_with(const PrimitiveSubgroup& other) const {
        return is_subgroup_of(other) || other.is_subgroup_of(*this);
    }

    friend bool operator==(const PrimitiveSubgroup& a, const PrimitiveSubgroup& b) {
        return a.hnf_.rows() == b.hnf_.rows() && a.hnf_.cols() == b.hnf_.cols() && a.hnf_ == b.hnf_;
    }

    /// Canonical order: rank, then row-major HNF entries.
    friend bool operator<(const PrimitiveSubgroup& a, const PrimitiveSubgroup& b) {
        if (a.rank() != b.rank())
            return a.rank() < b.rank();
        for (Eigen::Index r = 0; r < a.hnf_.rows(); ++r)
            for (Eigen::Index c = 0; c < a.hnf_.cols(); ++c)
                if (a.hnf_(r, c) != b.hnf_(r, c))
                    return a.hnf_(r, c) < b.hnf_(r, c);
        return false;
    }

    std::string to_string() const {
        std::string s = "[";
        for (Eigen::Index r = 0; r < hnf_.rows(); ++r) {
            s += r ? "; " : "";
            for (Eigen::Index c = 0; c < hnf_.cols(); ++c)
                s += (c ? " " : "") + std::to_string(hnf_(r, c));
        }
        return s + "]";
    }

private:
    explicit PrimitiveSubgroup(IntMatrix hnf) : hnf_(std::move(hnf)) {}
    IntMatrix hnf_;
};

/// Primitive hull (real span intersected with Z^k) of independent integer
/// vectors. Rows of the Smith transform q^{-1} span the saturation.
inline PrimitiveSubgroup saturate(const IntMatrix& rows) {
    if (rows.rows() == 0)
        throw std::invalid_argument("saturate: empty basis");
    const auto snf = smith_form(rows);
    if (snf.rank() != rows.rows())
        throw std::invalid_argument("saturate: basis vectors are linearly dependent");
    return PrimitiveSubgroup::from_basis(snf.q_inv.topRows(snf.rank()));
}

inline PrimitiveSubgroup saturate(const SubgroupBasis& g) {
    IntMatrix rows(g.rank(), g.dimension);
    for (int r = 0; r < g.rank(); ++r)
        for (int c = 0; c < g.dimension; ++c)
            rows(r, c) = g.vectors[static_cast<std::size_t>(r)].at(static_cast<std::size_t>(c));
    return saturate(rows);
}

/// Index of the subgroup spanned by `rows` inside its saturation.
inline std::int64_t saturation_index(const IntMatrix& rows) {
    const auto snf = smith_form(rows);
    std::int64_t prod = 1;
    for (auto d : snf.divisors)
        prod = intmat_detail::mul(prod, d);
    return prod;
}

struct EnumeratedSubgroup {
    PrimitiveSubgroup subgroup;
    Real norm; // ||T Gamma||
};

namespace lattice_detail {

// Matrix of v -> w ^ v from Z^k to the grade (j+1) coefficients.
inline IntMatrix wedge_map(const IntMultiVector& w, int k, int j) {
    const auto targets = subsets_of_size(k, j + 1);
    IntMatrix m = IntMatrix::Zero(static_cast<Eigen::Index>(std::max<std::size_t>(targets.size(), 1)), k);
    for (std::size_t r = 0; r < targets.size(); ++r) {
        const Mask target = targets[r];
        for (int i = 0; i < k; ++i) {
            const Mask bit = Mask{1} << i;
            if ((target & bit) == 0)
                continue;
            const Mask source = target & ~bit;
            m(static_cast<Eigen::Index>(r), i) = shuffle_sign(source, bit) * w[source];
        }
    }
    return m;
}

} // namespace lattice_detail

/// Every primitive subgroup Gamma of Z^k with ||T Gamma|| <= norm_cap.
///
/// Rank by rank, the representatives w of rank-j subgroups are the primitive
/// decomposable points of the lattice Z^{C(k,j)} of grade-j integer
/// coefficients, and ||T Gamma|| = ||(^j T) w||. A certified short-vector
/// enumeration in that lattice therefore finds all candidates; each is kept
/// iff the kernel of v -> w ^ v has rank j and its representative is +-w.
inline std::vector<EnumeratedSubgroup>
enumerate_primitive_subgroups_with_norms(int k, Real norm_cap, const std::optional<RealMatrix>& transform = {},
                                         const EnumerationOptions& opts = {}) {
    if (k < 0 || k > 5)
        throw std::invalid_argument("enumerate_primitive_subgroups: k must lie in [0, 5]");
    if (!(norm_cap > 0))
        throw std::invalid_argument("enumerate_primitive_subgroups: norm_cap must be positive");
    const RealMatrix t = transform ? *transform : RealMatrix::Identity(k, k);
    if (t.rows() != k || t.cols() != k)
        throw std::invalid_argument("enumerate_primitive_subgroups: transform must be k x k");

    std::vector<EnumeratedSubgroup> out;
    for (int j = 1; j <= k; ++j) {
        const auto subsets = subsets_of_size(k, j);
        const RealMatrix compound = compound_matrix(t, j);
        const auto candidates = enumerate_short_vectors(compound, norm_cap, opts);
        for (const auto& cand : candidates) {
            if (content(cand.coefficients) != 1)
                continue;
            std::vector<std::int64_t> coeffs(std::size_t{1} << k, 0);
            for (std::size_t i = 0; i < subsets.size(); ++i)
                coeffs[subsets[i]] = cand.coefficients(static_cast<Eigen::Index>(i));
            const IntMultiVector w(k, std::move(coeffs));
            const IntMatrix kernel = j == k ? IntMatrix(IntMatrix::Identity(k, k))
                                            : integer_kernel(lattice_detail::wedge_map(w, k, j));
            if (kernel.rows() != j)
                continue;
            auto gamma = PrimitiveSubgroup::from_basis(kernel);
            const auto rep = gamma.representative();
            if (!(rep == w || rep == -w))
                continue;
            out.push_back({std::move(gamma), cand.norm});
        }
    }
    std::sort(out.begin(), out.end(),
              [](const EnumeratedSubgroup& a, const EnumeratedSubgroup& b) { return a.subgroup < b.subgroup; });
    return out;
}

inline std::vector<PrimitiveSubgroup> enumerate_primitive_subgroups(int k, Real norm_cap,
                                                                    const std::optional<RealMatrix>& transform = {},
                                                                    const EnumerationOptions& opts = {}) {
    std::vector<PrimitiveSubgroup> out;
    for (auto& e : enumerate_primitive_subgroups_with_norms(k, norm_cap, transform, opts))
        out.push_back(std::move(e.subgroup));
    return out;
}

} // namespace latflow
