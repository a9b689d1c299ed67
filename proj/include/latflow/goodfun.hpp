#pragma once

// (C, alpha)-good functions: explicit constants, grid-based checking of the
// sublevel inequality, closure properties, and nondegeneracy detection.

#include "latflow/polynomial.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace latflow {

using Point = std::vector<double>;

/// A real function on R^d: either an exact polynomial or a black box.
class ScalarField {
public:
    using Evaluator = std::function<double(std::span<const double>)>;

    static ScalarField from_polynomial(Polynomial p) {
        ScalarField f;
        f.dim_ = p.variables();
        f.poly_ = std::move(p);
        return f;
    }

    /// fd_step <= 0 selects the default step 1e-4 (1 + |x0|).
    static ScalarField black_box(int dimension, Evaluator eval, double fd_step = 0) {
        if (dimension < 1)
            throw std::invalid_argument("scalar field dimension must be positive");
        if (!eval)
            throw std::invalid_argument("black-box scalar field needs an evaluator");
        ScalarField f;
        f.dim_ = dimension;
        f.eval_ = std::move(eval);
        f.fd_step_ = fd_step;
        return f;
    }

    int dimension() const { return dim_; }
    bool is_polynomial() const { return poly_.has_value(); }
    const Polynomial& polynomial() const { return *poly_; }
    double fd_step() const { return fd_step_; }

    double operator()(std::span<const double> x) const { return poly_ ? (*poly_)(x) : eval_(x); }
    double operator()(double x) const {
        const double pt[1] = {x};
        return (*this)(std::span<const double>(pt, 1));
    }

private:
    ScalarField() = default;
    int dim_ = 1;
    std::optional<Polynomial> poly_;
    Evaluator eval_;
    double fd_step_ = 0;
};

enum class BallMetric { euclidean, sup };

/// Open ball B(center, radius); the enlarged ball has radius 3^dilation * radius.
/// With the sup metric balls are cubes.
struct Ball {
    Point center;
    double radius = 1;
    int dilation_exponent = 0;
    BallMetric metric = BallMetric::euclidean;

    Ball() = default;
    Ball(Point c, double r, int dilation = 0, BallMetric m = BallMetric::euclidean)
        : center(std::move(c)), radius(r), dilation_exponent(dilation), metric(m) {
        if (center.empty())
            throw std::invalid_argument("ball needs a center");
        if (!(radius > 0))
            throw std::invalid_argument("ball radius must be positive");
        if (dilation_exponent < 0)
            throw std::invalid_argument("dilation exponent must be nonnegative");
    }

    /// Interval (a, b) as a one-dimensional ball.
    static Ball interval(double a, double b) {
        if (!(b > a))
            throw std::invalid_argument("interval must have a < b");
        return Ball({0.5 * (a + b)}, 0.5 * (b - a));
    }

    int dimension() const { return static_cast<int>(center.size()); }

    Ball enlarged() const {
        return Ball(center, radius * std::pow(3.0, dilation_exponent), 0, metric);
    }

    bool contains(std::span<const double> x) const {
        double acc = 0;
        for (std::size_t i = 0; i < center.size(); ++i) {
            const double d = std::abs(x[i] - center[i]);
            acc = metric == BallMetric::sup ? std::max(acc, d) : acc + d * d;
        }
        return metric == BallMetric::sup ? acc < radius : acc < radius * radius;
    }
};

struct GoodConstants {
    double C;
    double alpha;
};

/// Polynomials of degree <= k are (2k(k+1)^{1/k}, 1/k)-good on R.
inline GoodConstants good_constants_polynomial(int k) {
    if (k < 1)
        throw std::invalid_argument("good_constants_polynomial: degree must be >= 1 (constants need separate handling)");
    const double kk = k;
    return {2 * kk * std::pow(kk + 1, 1 / kk), 1 / kk};
}

/// C_{k,A1,A2} = k(k+1)((A1/A2)(k+1)(2k^k+1))^{1/k}.
inline double product_good_constant(int k, double a1, double a2) {
    if (k < 1)
        throw std::invalid_argument("product_good_constant: k must be >= 1");
    if (!(a2 > 0) || !(a1 >= a2))
        throw std::invalid_argument("product_good_constant: need A1 >= A2 > 0");
    const double kk = k;
    return kk * (kk + 1) * std::pow((a1 / a2) * (kk + 1) * (2 * std::pow(kk, kk) + 1), 1 / kk);
}

/// The full cube bound d C_{k,A1,A2} (eps/||f||)^{1/dk}, per unit volume.
inline double product_good_bound(int d, int k, double a1, double a2, double eps, double sup) {
    if (d < 1)
        throw std::invalid_argument("product_good_bound: d must be >= 1");
    return d * product_good_constant(k, a1, a2) * std::pow(eps / sup, 1.0 / (d * k));
}

/// n points spaced logarithmically from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int n) {
    if (!(lo > 0) || !(hi >= lo) || n < 1)
        throw std::invalid_argument("log_grid: need 0 < lo <= hi and n >= 1");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] =
            n == 1 ? hi : lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    out.front() = n == 1 ? hi : lo;
    out.back() = hi;
    return out;
}

// ---------------------------------------------------------------------------
// Grid sampling

namespace goodfun_detail {

// Values of f on a uniform grid over the bounding cube of B: nodes
// (grid_n + 1)^d and cell centers grid_n^d, with ball membership flags.
struct GridSample {
    int d = 1;
    int n = 0;
    std::vector<double> node_value;
    std::vector<char> node_inside;
    std::vector<double> center_value;
    std::vector<char> center_inside;
};

inline GridSample sample_grid(const ScalarField& f, const Ball& b, int grid_n) {
    const int d = b.dimension();
    if (f.dimension() != d)
        throw std::invalid_argument("scalar field and ball dimensions differ");
    if (grid_n < 1)
        throw std::invalid_argument("grid_n must be positive");
    double total = 1;
    for (int i = 0; i < d; ++i)
        total *= grid_n + 1.0;
    if (total > 5e7)
        throw std::invalid_argument("grid too large: reduce grid_n for this dimension");

    GridSample g;
    g.d = d;
    g.n = grid_n;
    const double h = 2 * b.radius / grid_n;
    Point x(static_cast<std::size_t>(d));

    auto fill = [&](int per_dim, double offset, std::vector<double>& values, std::vector<char>& inside) {
        std::size_t count = 1;
        for (int i = 0; i < d; ++i)
            count *= static_cast<std::size_t>(per_dim);
        values.resize(count);
        inside.resize(count);
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        for (std::size_t flat = 0; flat < count; ++flat) {
            std::size_t rem = flat;
            for (int i = d - 1; i >= 0; --i) {
                idx[static_cast<std::size_t>(i)] = static_cast<int>(rem % static_cast<std::size_t>(per_dim));
                rem /= static_cast<std::size_t>(per_dim);
            }
            for (int i = 0; i < d; ++i)
                x[static_cast<std::size_t>(i)] =
                    b.center[static_cast<std::size_t>(i)] - b.radius + (idx[static_cast<std::size_t>(i)] + offset) * h;
            // Nodes on the ball's own boundary are treated as inside so that
            // cells at the edge of an interval or cube are not flagged.
            bool in;
            if (b.metric == BallMetric::sup || d == 1) {
                in = true;
            } else {
                double r2 = 0;
                for (int i = 0; i < d; ++i) {
                    const double dx = x[static_cast<std::size_t>(i)] - b.center[static_cast<std::size_t>(i)];
                    r2 += dx * dx;
                }
                in = r2 <= b.radius * b.radius;
            }
            inside[flat] = in;
            values[flat] = f(x);
        }
    };
    fill(grid_n + 1, 0.0, g.node_value, g.node_inside);
    fill(grid_n, 0.5, g.center_value, g.center_inside);
    return g;
}

// Calls visit(center_index, corner_indices) for every cell.
template <class Visit>
void for_each_cell(const GridSample& g, Visit&& visit) {
    const int d = g.d;
    const std::size_t cells = g.center_value.size();
    const std::size_t corners = std::size_t{1} << d;
    std::vector<std::size_t> corner(corners);
    std::vector<int> idx(static_cast<std::size_t>(d));
    for (std::size_t flat = 0; flat < cells; ++flat) {
        std::size_t rem = flat;
        for (int i = d - 1; i >= 0; --i) {
            idx[static_cast<std::size_t>(i)] = static_cast<int>(rem % static_cast<std::size_t>(g.n));
            rem /= static_cast<std::size_t>(g.n);
        }
        for (std::size_t c = 0; c < corners; ++c) {
            std::size_t node = 0;
            for (int i = 0; i < d; ++i)
                node = node * static_cast<std::size_t>(g.n + 1) +
                       static_cast<std::size_t>(idx[static_cast<std::size_t>(i)] + ((c >> i) & 1));
            corner[c] = node;
        }
        visit(flat, std::span<const std::size_t>(corner));
    }
}

} // namespace goodfun_detail

struct SupNormEstimate {
    double value;
    bool exact; // exact maximization (univariate polynomial) vs grid maximum
};

/// ||f||_B. Exact for univariate polynomials (endpoints and critical points);
/// otherwise the grid maximum, a lower estimate.
inline SupNormEstimate sup_norm_on_ball(const ScalarField& f, const Ball& b, int grid_n = 1024) {
    if (f.is_polynomial() && f.dimension() == 1 && b.dimension() == 1) {
        const double lo = b.center[0] - b.radius, hi = b.center[0] + b.radius;
        const auto& p = f.polynomial();
        double best = std::max(std::abs(p(lo)), std::abs(p(hi)));
        for (double c : real_roots(p.derivative(0), lo, hi))
            best = std::max(best, std::abs(p(c)));
        return {best, true};
    }
    if (grid_n < 256)
        throw std::invalid_argument("sup_norm_on_ball: grid_n must be >= 256");
    const auto g = goodfun_detail::sample_grid(f, b, b.dimension() >= 3 ? std::min(grid_n, 256) : grid_n);
    double best = 0;
    for (std::size_t i = 0; i < g.node_value.size(); ++i)
        if (g.node_inside[i])
            best = std::max(best, std::abs(g.node_value[i]));
    for (std::size_t i = 0; i < g.center_value.size(); ++i)
        if (g.center_inside[i])
            best = std::max(best, std::abs(g.center_value[i]));
    return {best, false};
}

struct SublevelEstimate {
    double eps;
    double fraction;  // |{x in B : |f(x)| < eps}| / |B|, grid estimate
    double error_bar; // boundary-cell share of the ball
};

/// Sublevel fractions by cell-center counting. A cell is a boundary cell when
/// the indicator |f| < eps differs among its corners and center, or when it
/// straddles the ball's boundary; the error bar is their share.
inline std::vector<SublevelEstimate> sublevel_fractions(const ScalarField& f, const Ball& b,
                                                        std::span<const double> eps_list, int grid_n) {
    const auto g = goodfun_detail::sample_grid(f, b, grid_n);
    std::size_t inside_cells = 0, straddling = 0;
    std::vector<std::size_t> hits(eps_list.size(), 0), boundary(eps_list.size(), 0);
    goodfun_detail::for_each_cell(g, [&](std::size_t cell, std::span<const std::size_t> corners) {
        bool any_in = g.center_inside[cell] != 0, any_out = !any_in;
        for (auto c : corners) {
            any_in |= g.node_inside[c] != 0;
            any_out |= g.node_inside[c] == 0;
        }
        const bool center_in = g.center_inside[cell] != 0;
        if (center_in)
            ++inside_cells;
        if (any_in && any_out) {
            ++straddling;
        }
        if (!center_in)
            return;
        const double fc = std::abs(g.center_value[cell]);
        for (std::size_t e = 0; e < eps_list.size(); ++e) {
            const bool below = fc < eps_list[e];
            if (below)
                ++hits[e];
            for (auto c : corners)
                if ((std::abs(g.node_value[c]) < eps_list[e]) != below) {
                    ++boundary[e];
                    break;
                }
        }
    });
    if (inside_cells == 0)
        throw std::invalid_argument("grid too coarse: no cell centers inside the ball");
    std::vector<SublevelEstimate> out;
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
        const double denom = static_cast<double>(inside_cells);
        out.push_back({eps_list[e], static_cast<double>(hits[e]) / denom,
                       static_cast<double>(boundary[e] + straddling) / denom});
    }
    return out;
}

struct GoodCheckRow {
    double eps;
    double measured;
    double error_bar;
    double bound; // C (eps / ||f||)^alpha
    bool pass;    // measured - error_bar <= bound
};

struct GoodCheckReport {
    double sup_norm = 0;
    bool sup_exact = false;
    bool vacuous = false; // f vanishes on B: passes by the 1/0 = infinity convention
    std::vector<GoodCheckRow> rows;
    double worst_ratio = 0; // max measured / bound
    double worst_ratio_error = 0;
    double worst_eps = 0;
    bool passed = true;
};

inline constexpr double kGoodCheckSlack = 1e-12;

/// Checks |{x in B : |f(x)| < eps}| <= C (eps/||f||_B)^alpha |B| for every eps.
inline GoodCheckReport check_good_on_ball(const ScalarField& f, const Ball& b, double c, double alpha,
                                          std::span<const double> eps_list, int grid_n) {
    if (!(c > 0) || !(alpha > 0))
        throw std::invalid_argument("check_good_on_ball: C and alpha must be positive");
    for (double e : eps_list)
        if (!(e > 0))
            throw std::invalid_argument("check_good_on_ball: eps values must be positive");
    GoodCheckReport report;
    const auto sup = sup_norm_on_ball(f, b, std::max(grid_n, 256));
    report.sup_norm = sup.value;
    report.sup_exact = sup.exact;
    if (sup.value == 0) {
        report.vacuous = true;
        return report;
    }
    const auto est = sublevel_fractions(f, b, eps_list, grid_n);
    for (const auto& s : est) {
        const double bound = c * std::pow(s.eps / sup.value, alpha);
        const bool pass = s.fraction - s.error_bar <= bound + kGoodCheckSlack;
        report.rows.push_back({s.eps, s.fraction, s.error_bar, bound, pass});
        const double ratio = s.fraction / bound;
        if (ratio > report.worst_ratio || report.rows.size() == 1) {
            report.worst_ratio = ratio;
            report.worst_ratio_error = s.error_bar / bound;
            report.worst_eps = s.eps;
        }
        report.passed = report.passed && pass;
    }
    return report;
}

/// Smallest C for which the grid estimate on B satisfies the inequality at
/// every eps: max over eps of measured / (eps/||f||)^alpha. Zero if f vanishes.
inline double minimal_good_constant(const ScalarField& f, const Ball& b, double alpha,
                                    std::span<const double> eps_fractions, int grid_n) {
    const auto sup = sup_norm_on_ball(f, b, std::max(grid_n, 256));
    if (sup.value == 0)
        return 0;
    std::vector<double> eps;
    for (double e : eps_fractions)
        eps.push_back(e * sup.value);
    double worst = 0;
    for (const auto& s : sublevel_fractions(f, b, eps, grid_n))
        worst = std::max(worst, s.fraction / std::pow(s.eps / sup.value, alpha));
    return worst;
}

// ---------------------------------------------------------------------------
// Closure properties

struct ClosureReport {
    bool members_good = true;  // each f_i passes on every ball
    bool abs_identical = true; // f and |f| (and -f) have identical sublevel measures
    bool scaled_good = true;   // lambda f passes for each lambda (lambda = 0 vacuous)
    bool sup_good = true;      // max_i |f_i| passes
    std::vector<std::string> failures;

    bool passed() const { return members_good && abs_identical && scaled_good && sup_good; }
};

/// Checks the closure of (C, alpha)-goodness under |.|, scaling and finite
/// sups on each ball. eps_fractions are relative to each function's sup norm.
inline ClosureReport closure_tests(const std::vector<ScalarField>& family, const std::vector<Ball>& balls, double c,
                                   double alpha, std::span<const double> eps_fractions, int grid_n,
                                   std::vector<double> lambdas = {-2.5, 0.0, 0.5, 3.0}) {
    if (family.empty())
        throw std::invalid_argument("closure_tests: empty family");
    ClosureReport rep;
    auto eps_for = [&](const ScalarField& f, const Ball& b) {
        const double s = sup_norm_on_ball(f, b, std::max(grid_n, 256)).value;
        std::vector<double> eps;
        for (double e : eps_fractions)
            eps.push_back(s > 0 ? e * s : e);
        return eps;
    };
    for (std::size_t bi = 0; bi < balls.size(); ++bi) {
        const Ball& b = balls[bi];
        const std::string where = " on ball " + std::to_string(bi);
        for (std::size_t fi = 0; fi < family.size(); ++fi) {
            const auto& f = family[fi];
            const auto eps = eps_for(f, b);
            if (!check_good_on_ball(f, b, c, alpha, eps, grid_n).passed) {
                rep.members_good = false;
                rep.failures.push_back("member " + std::to_string(fi) + where);
            }
            const auto abs_f = ScalarField::black_box(f.dimension(), [f](std::span<const double> x) {
                return std::abs(f(x));
            });
            const auto neg_f = ScalarField::black_box(f.dimension(), [f](std::span<const double> x) {
                return -f(x);
            });
            const auto s0 = sublevel_fractions(f, b, eps, grid_n);
            const auto s1 = sublevel_fractions(abs_f, b, eps, grid_n);
            const auto s2 = sublevel_fractions(neg_f, b, eps, grid_n);
            for (std::size_t e = 0; e < eps.size(); ++e)
                if (s0[e].fraction != s1[e].fraction || s0[e].fraction != s2[e].fraction) {
                    rep.abs_identical = false;
                    rep.failures.push_back("|f| mismatch for member " + std::to_string(fi) + where);
                    break;
                }
            for (double lambda : lambdas) {
                const auto scaled = ScalarField::black_box(f.dimension(), [f, lambda](std::span<const double> x) {
                    return lambda * f(x);
                });
                const auto eps_s = eps_for(scaled, b);
                if (!check_good_on_ball(scaled, b, c, alpha, eps_s, grid_n).passed) {
                    rep.scaled_good = false;
                    rep.failures.push_back("scaled member " + std::to_string(fi) + where);
                }
            }
        }
        const auto sup_f = ScalarField::black_box(family.front().dimension(), [family](std::span<const double> x) {
            double m = 0;
            for (const auto& f : family)
                m = std::max(m, std::abs(f(x)));
            return m;
        });
        if (!check_good_on_ball(sup_f, b, c, alpha, eps_for(sup_f, b), grid_n).passed) {
            rep.sup_good = false;
            rep.failures.push_back("pointwise sup" + where);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Derivatives and nondegeneracy

/// All multi-indices beta in N^d with 1 <= |beta| <= l, graded.
inline std::vector<std::vector<int>> multi_indices(int d, int l) {
    std::vector<std::vector<int>> out;
    std::vector<int> beta(static_cast<std::size_t>(d), 0);
    for (int order = 1; order <= l; ++order) {
        // Compositions of `order` into d parts.
        std::function<void(int, int)> rec = [&](int pos, int left) {
            if (pos == d - 1) {
                beta[static_cast<std::size_t>(pos)] = left;
                out.push_back(beta);
                return;
            }
            for (int v = left; v >= 0; --v) {
                beta[static_cast<std::size_t>(pos)] = v;
                rec(pos + 1, left - v);
            }
        };
        rec(0, order);
    }
    return out;
}

namespace goodfun_detail {

inline double binomial(int n, int k) {
    double r = 1;
    for (int i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

// Tensor-product central difference for the mixed partial beta with step h.
inline double central_difference(const ScalarField& f, std::span<const double> x0, std::span<const int> beta,
                                 double h) {
    const int d = static_cast<int>(beta.size());
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    Point x(x0.begin(), x0.end());
    double total = 0;
    std::function<void(int, double)> rec = [&](int pos, double weight) {
        if (pos == d) {
            total += weight * f(x);
            return;
        }
        const int m = beta[static_cast<std::size_t>(pos)];
        for (int i = 0; i <= m; ++i) {
            x[static_cast<std::size_t>(pos)] = x0[static_cast<std::size_t>(pos)] + (0.5 * m - i) * h;
            rec(pos + 1, weight * ((i % 2) ? -1.0 : 1.0) * binomial(m, i));
        }
        x[static_cast<std::size_t>(pos)] = x0[static_cast<std::size_t>(pos)];
    };
    rec(0, 1.0);
    int order = 0;
    for (int b : beta)
        order += b;
    return total / std::pow(h, order);
}

} // namespace goodfun_detail

/// Partial derivative d^beta f at x0. Exact for polynomials; otherwise a
/// central difference with one Richardson step. The default step grows with
/// the order, 1e-4 (1 + |x0|) 10^{|beta| - 1}, to keep roundoff in check.
inline double partial_derivative(const ScalarField& f, std::span<const double> x0, std::span<const int> beta) {
    if (static_cast<int>(beta.size()) != f.dimension() || static_cast<int>(x0.size()) != f.dimension())
        throw std::invalid_argument("partial_derivative: dimension mismatch");
    if (f.is_polynomial())
        return f.polynomial().partial(beta)(x0);
    int order = 0;
    for (int b : beta)
        order += b;
    if (order == 0)
        return f(x0);
    double scale = 0;
    for (double v : x0)
        scale = std::max(scale, std::abs(v));
    const double base = f.fd_step() > 0 ? f.fd_step() : 1e-4 * (1 + scale);
    const double h = base * std::pow(10.0, order - 1);
    const double d1 = goodfun_detail::central_difference(f, x0, beta, h);
    const double d2 = goodfun_detail::central_difference(f, x0, beta, 0.5 * h);
    return (4 * d2 - d1) / 3;
}

inline constexpr double kRankThreshold = 1e-7;

/// Smallest l <= l_max such that {d^beta f(x0) : 1 <= |beta| <= l} spans R^n.
inline std::optional<int> nondegeneracy_order(const std::vector<ScalarField>& f, std::span<const double> x0,
                                              int l_max) {
    if (f.empty())
        throw std::invalid_argument("nondegeneracy_order: empty map");
    const int d = f.front().dimension();
    for (const auto& c : f)
        if (c.dimension() != d)
            throw std::invalid_argument("nondegeneracy_order: components disagree on dimension");
    bool all_poly = std::all_of(f.begin(), f.end(), [](const ScalarField& c) { return c.is_polynomial(); });
    if (!all_poly && l_max > 3)
        throw std::invalid_argument("nondegeneracy_order: finite differences are trusted only to order 3");
    const auto n = static_cast<Eigen::Index>(f.size());
    for (int l = 1; l <= l_max; ++l) {
        const auto betas = multi_indices(d, l);
        Eigen::MatrixXd m(n, static_cast<Eigen::Index>(betas.size()));
        for (std::size_t j = 0; j < betas.size(); ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                m(i, static_cast<Eigen::Index>(j)) =
                    partial_derivative(f[static_cast<std::size_t>(i)], x0, betas[j]);
        if (m.cols() < n)
            continue;
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
        const double cutoff = kRankThreshold * std::max(1.0, sv.size() ? sv(0) : 0.0);
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            rank += sv(i) > cutoff;
        if (rank == n)
            return l;
    }
    return std::nullopt;
}

} // namespace latflow
