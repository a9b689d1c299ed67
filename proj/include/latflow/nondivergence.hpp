#pragma once

// Quantitative non-divergence: bound formulas, the rho of a lattice or of a
// map, the closed-form coordinates of g_t u_f acting on multivectors, and
// sampled sweeps comparing sublevel measures of delta against the bounds.

#include "latflow/exterior.hpp"
#include "latflow/goodfun.hpp"
#include "latflow/lattice.hpp"
#include "latflow/marking.hpp"
#include "latflow/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace latflow {

/// k C (3^d N_d)^k (eps/rho)^alpha per unit |B|.
inline double nondivergence_rhs(int k, int d, double c, double alpha, double rho, double eps, int besicovitch) {
    if (!(eps > 0) || !(rho > 0))
        throw std::invalid_argument("nondivergence_rhs: eps and rho must be positive");
    if (eps > rho)
        throw std::invalid_argument("nondivergence_rhs: eps must not exceed rho");
    if (k >= 1 && rho > 1.0 / k + 1e-15)
        throw std::invalid_argument("nondivergence_rhs: rho must not exceed 1/k");
    return marking_bound(k, d, c, alpha, rho, eps, besicovitch);
}

/// 2 k^3 6^k (k^2+1)^{1/k^2} (eps/rho)^{1/k^2}, per unit length of (0, T).
inline double unipotent_bound(int k, double rho, double eps) {
    const double kk = static_cast<double>(k) * k;
    return 2.0 * k * k * k * std::pow(6.0, k) * std::pow(kk + 1, 1 / kk) * std::pow(eps / rho, 1 / kk);
}

/// Smallest eps with coef (eps/rho)^alpha >= target.
inline double eps_for_bound(double target, double coef, double alpha, double rho) {
    return rho * std::pow(target / coef, 1 / alpha);
}

/// Log grid on [1e-4 rho, rho] plus, when the bound there is still >= 1,
/// deeper values of eps at which the bound equals 0.5, 0.1 and 0.02.
inline std::vector<double> epsilon_grid(double rho, double coef, double alpha, int points = 12) {
    auto grid = log_grid(rho * 1e-4, rho, points);
    for (double& e : grid)
        e = std::min(e, rho);
    if (coef * std::pow(1e-4, alpha) >= 1)
        for (double target : {0.5, 0.1, 0.02})
            grid.push_back(eps_for_bound(target, coef, alpha, rho));
    std::sort(grid.begin(), grid.end(), std::greater<>());
    return grid;
}

/// rho = min(1/k, min ||g Gamma||), exact over subgroups with norm <= 1/k.
inline double compute_rho(const RealMatrix& g, const EnumerationOptions& opts = {}) {
    const int k = static_cast<int>(g.rows());
    if (k < 1 || k > 4 || g.cols() != k)
        throw std::invalid_argument("compute_rho: need a square basis with k <= 4");
    Real best = Real(1) / k;
    for (const auto& e : enumerate_primitive_subgroups_with_norms(k, best, g, opts))
        best = std::min(best, e.norm);
    return static_cast<double>(best);
}

struct Sweep {
    std::vector<MeasureRow> rows;
    HypothesisCheck hypotheses;
    double rho = 0;
    double C = 0, alpha = 0;
    std::string constant_label; // where C came from
    std::uint64_t det_failures = 0;
    double min_delta = std::numeric_limits<double>::infinity();
    Point min_delta_at;

    bool any_fail() const {
        return std::any_of(rows.begin(), rows.end(), [](const MeasureRow& r) { return r.status == RowStatus::fail; });
    }
};

namespace nondiv_detail {

struct DeltaSample {
    Point x;
    double delta = 0;
    bool unimodular = true;
};

// Sublevel rows from per-point deltas: events are points with delta < eps.
inline void fill_rows(Sweep& s, const std::vector<DeltaSample>& pts, std::span<const double> eps_grid,
                      const std::function<double(double)>& bound) {
    for (const auto& p : pts) {
        s.det_failures += !p.unimodular;
        if (p.delta < s.min_delta) {
            s.min_delta = p.delta;
            s.min_delta_at = p.x;
        }
    }
    for (double eps : eps_grid) {
        std::uint64_t events = 0;
        for (const auto& p : pts)
            events += p.delta < eps;
        s.rows.push_back(measure_row(eps, events, pts.size(), bound(eps)));
    }
}

} // namespace nondiv_detail

/// Point i of n stratified samples of a ball: one uniform point per equal
/// stratum when d = 1, plain uniform sampling otherwise.
inline Point stratified_point(const Ball& b, std::size_t i, std::size_t n, std::uint64_t seed) {
    auto rng = stream_rng(seed, i);
    if (b.dimension() != 1)
        return sample_in_ball(b, rng);
    std::uniform_real_distribution<double> u(0, 1);
    const double a = b.center[0] - b.radius;
    return {a + 2 * b.radius * (static_cast<double>(i) + u(rng)) / static_cast<double>(n)};
}

/// |{0 < x < T : delta(u_x g Z^k) < eps}| / T against the bound / T, with
/// u_x = exp(x N) and one stratified sample per stratum of (0, T).
inline Sweep unipotent_experiment(const RealMatrix& g, const RealMatrix& nilpotent, double horizon,
                                  std::vector<double> eps_grid, std::uint64_t samples, std::uint64_t seed,
                                  unsigned workers = 1) {
    const int k = static_cast<int>(g.rows());
    if (k < 2 || k > 4)
        throw std::invalid_argument("unipotent_experiment: k must lie in [2, 4]");
    if (!(horizon > 0) || samples == 0)
        throw std::invalid_argument("unipotent_experiment: need T > 0 and samples");
    Sweep s;
    s.rho = compute_rho(g);
    s.C = 2.0 * k * k * std::pow(k * k + 1.0, 1.0 / (k * k));
    s.alpha = 1.0 / (k * k);
    s.constant_label = "polynomial degree k^2";
    if (eps_grid.empty())
        eps_grid = epsilon_grid(s.rho, unipotent_bound(k, 1, 1), s.alpha);
    for (double e : eps_grid)
        if (!(e > 0) || e > s.rho * (1 + 1e-12))
            throw std::invalid_argument("unipotent_experiment: eps grid must lie in (0, rho]");
    const Ball range = Ball::interval(0, horizon);
    const auto pts = parallel_map<nondiv_detail::DeltaSample>(samples, workers, [&](std::size_t i) {
        Point x = stratified_point(range, i, samples, seed);
        const RealMatrix m = unipotent_orbit_point(nilpotent, static_cast<Real>(x[0])) * g;
        const Lattice lat(m);
        return nondiv_detail::DeltaSample{
            x, static_cast<double>(delta(lat).value),
            std::abs(std::abs(lat.determinant()) - std::abs(g.determinant())) <= 1e-9L * std::abs(g.determinant())};
    });
    nondiv_detail::fill_rows(s, pts, eps_grid, [&](double eps) { return unipotent_bound(k, s.rho, eps); });
    return s;
}

/// g_t u_y.
inline RealMatrix flowed_matrix(std::span<const Real> y, const FlowVector& t) {
    if (y.size() != t.size())
        throw std::invalid_argument("flowed_matrix: f and t must have the same length");
    return flow_matrix(t) * unipotent_shear(y);
}

/// The lattice g_t u_y Z^{n+1}, kept in factored form.
inline Lattice flowed_lattice(std::span<const Real> y, const FlowVector& t) {
    if (y.size() != t.size())
        throw std::invalid_argument("flowed_lattice: f and t must have the same length");
    return apply_flow(make_lambda_y(y), t);
}

/// Coordinates of g_t u_y w from the closed form: for 0 in I,
/// h_I = e^{sum_{i not in I} t_i} (w_I + sum_{i not in I} sign f_i w_{I+i-0}),
/// and h_I = e^{-sum_{i in I} t_i} w_I otherwise. Index 0 is bit 0.
inline MultiVector flowed_coordinates(const MultiVector& w, std::span<const Real> y, const FlowVector& t) {
    const int n = static_cast<int>(y.size());
    if (w.dimension() != n + 1 || t.size() != y.size())
        throw std::invalid_argument("flowed_coordinates: need w over n + 1 coordinates and |t| = |f| = n");
    std::vector<Real> out(w.size(), 0);
    for (Mask m = 0; m < w.size(); ++m) {
        Real tin = 0, tout = 0;
        for (int i = 1; i <= n; ++i)
            (m >> i & 1 ? tin : tout) += t[static_cast<std::size_t>(i - 1)];
        if (!(m & 1)) {
            out[m] = std::exp(-tin) * w[m];
            continue;
        }
        Real acc = w[m];
        for (int i = 1; i <= n; ++i) {
            if (m >> i & 1)
                continue;
            // source I = (m - {0}) + {i}; u e_I gains f_i e_{I - i + 0} with
            // sign (-1)^{position of i in I}.
            const Mask src = (m & ~Mask{1}) | (Mask{1} << i);
            const int pos = std::popcount(src & ((Mask{1} << i) - 1));
            acc += (pos % 2 ? -1 : 1) * y[static_cast<std::size_t>(i - 1)] * w[src];
        }
        out[m] = std::exp(tout) * acc;
    }
    return MultiVector(n + 1, std::move(out));
}

/// c_0 + sum c_i f_i, kept polynomial when every f_i is.
inline ScalarField linear_combination(std::span<const double> c, const std::vector<ScalarField>& f) {
    if (c.size() != f.size() + 1 || f.empty())
        throw std::invalid_argument("linear_combination: need n + 1 coefficients for n functions");
    const int d = f.front().dimension();
    const bool poly = std::all_of(f.begin(), f.end(), [](const ScalarField& s) { return s.is_polynomial(); });
    if (poly) {
        Polynomial p(d);
        p.add_term(std::vector<int>(static_cast<std::size_t>(d), 0), c[0]);
        for (std::size_t i = 0; i < f.size(); ++i)
            for (const auto& [e, v] : f[i].polynomial().terms())
                p.add_term(e, c[i + 1] * v);
        return ScalarField::from_polynomial(std::move(p));
    }
    std::vector<double> cc(c.begin(), c.end());
    return ScalarField::black_box(d, [cc, f](std::span<const double> x) {
        double s = cc[0];
        for (std::size_t i = 0; i < f.size(); ++i)
            s += cc[i + 1] * f[i](x);
        return s;
    });
}

struct RhoEstimate {
    double rho = 0;      // certified lower bound, capped at 1/k
    double grid_min = 0; // smallest sup found on the grid
    double slack = 0;    // Lipschitz allowance subtracted
};

/// Lower bound for min over ||c|| >= 1 of ||c_0 + sum c_i f_i||_B. The
/// minimum is attained on the sup-sphere; each face c_j = 1 is gridded, and
/// the sup over B is Lipschitz in c with constant sum_i ||f_i||_B (f_0 = 1),
/// so subtracting L h / 2 makes the grid minimum a lower bound.
inline RhoEstimate rho_for_map(const std::vector<ScalarField>& f, const Ball& b, int per_axis = 0,
                               int grid_n = 1024) {
    const int n = static_cast<int>(f.size());
    if (n < 1 || n > 3)
        throw std::invalid_argument("rho_for_map: n must lie in [1, 3]");
    if (per_axis <= 0)
        per_axis = n == 1 ? 4001 : n == 2 ? 401 : 61;
    double lip = 1;
    for (const auto& fi : f)
        lip += sup_norm_on_ball(fi, b, grid_n).value;
    const double h = 2.0 / (per_axis - 1);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> c(static_cast<std::size_t>(n + 1));
    for (int face = 0; face <= n; ++face) {
        std::vector<int> idx(static_cast<std::size_t>(n), 0);
        while (true) {
            for (int j = 0, o = 0; j <= n; ++j)
                c[static_cast<std::size_t>(j)] = j == face ? 1.0 : -1.0 + h * idx[static_cast<std::size_t>(o++)];
            best = std::min(best, sup_norm_on_ball(linear_combination(c, f), b, grid_n).value);
            int pos = 0;
            while (pos < n && ++idx[static_cast<std::size_t>(pos)] == per_axis)
                idx[static_cast<std::size_t>(pos++)] = 0;
            if (pos == n)
                break;
        }
    }
    RhoEstimate r;
    r.grid_min = best;
    r.slack = lip * h / 2;
    r.rho = std::min(1.0 / (n + 1), best - r.slack);
    if (!(r.rho > 0))
        throw std::invalid_argument("rho_for_map: 1, f_1, ..., f_n look linearly dependent on B");
    return r;
}

/// g_t u_{f(x)} sweep on B.
struct MapInstance {
    std::vector<ScalarField> f;
    Ball ball;
    FlowVector t{std::vector<Real>{0}};
    double C = 1, alpha = 1;
    int besicovitch = 2;
    std::string constant_label = "configured";

    int n() const { return static_cast<int>(f.size()); }
    int d() const { return ball.dimension(); }
    Ball enlarged_ball() const { return Ball(ball.center, ball.radius * std::pow(3.0, n() + 1), 0, ball.metric); }

    std::vector<Real> values(std::span<const double> x) const {
        std::vector<Real> y;
        for (const auto& fi : f)
            y.push_back(static_cast<Real>(fi(x)));
        return y;
    }

    RealMatrix h(std::span<const double> x) const { return flowed_matrix(values(x), t); }
    Lattice lattice(std::span<const double> x) const { return flowed_lattice(values(x), t); }

    MarkingInstance as_marking(double rho) const {
        MarkingInstance m;
        m.k = n() + 1;
        m.ball = ball;
        m.h = [self = *this](std::span<const double> x) { return self.h(x); };
        m.C = C;
        m.alpha = alpha;
        m.rho = rho;
        m.besicovitch = besicovitch;
        return m;
    }
};

/// Hypothesis (i): random c . (1, f) with ||c|| = 1 are (C, alpha)-good on B~.
inline HypothesisCheck check_linear_combinations(const MapInstance& inst, std::uint64_t seed, int count = 16,
                                                 int grid_n = 4000) {
    HypothesisCheck out;
    const Ball big = inst.enlarged_ball();
    const auto fr = log_grid(1e-4, 1, 10);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < count; ++i) {
        auto rng = stream_rng(seed ^ 0x5bd1e995ULL, static_cast<std::uint64_t>(i));
        std::vector<double> c(static_cast<std::size_t>(inst.n() + 1));
        for (auto& v : c)
            v = u(rng);
        c[static_cast<std::size_t>(i) % c.size()] = 1;
        const auto lc = linear_combination(c, inst.f);
        const double sup = sup_norm_on_ball(lc, big, 1024).value;
        std::vector<double> eps;
        for (double e : fr)
            eps.push_back(e * sup);
        ++out.subgroups_checked;
        const int grid = inst.d() == 1 ? grid_n : 200;
        if (!check_good_on_ball(lc, big, inst.C, inst.alpha, eps, grid).passed) {
            out.applicable = false;
            out.note = "linear combination not (C, alpha)-good on the enlarged ball";
            return out;
        }
    }
    return out;
}

/// |{x in B : delta(g_t u_f(x) Z^{n+1}) < eps}| / |B| against
/// (n+1) C (3^d N_d)^{n+1} (eps/rho)^alpha, rho from rho_for_map.
inline Sweep curve_experiment(const MapInstance& inst, std::vector<double> eps_grid, std::uint64_t samples,
                                  std::uint64_t seed, unsigned workers = 1, bool check_hyp = true) {
    if (inst.n() < 1 || inst.n() > 3 || inst.t.size() != inst.f.size())
        throw std::invalid_argument("curve_experiment: need 1 <= n <= 3 and |t| = n");
    if (samples == 0)
        throw std::invalid_argument("curve_experiment: need samples");
    Sweep s;
    s.rho = rho_for_map(inst.f, inst.ball).rho;
    s.C = inst.C;
    s.alpha = inst.alpha;
    s.constant_label = inst.constant_label;
    const int k = inst.n() + 1;
    const double coef = marking_bound(k, inst.d(), inst.C, inst.alpha, 1, 1, inst.besicovitch);
    if (eps_grid.empty())
        eps_grid = epsilon_grid(s.rho, coef, inst.alpha);
    if (check_hyp) {
        s.hypotheses = check_linear_combinations(inst, seed);
        if (s.hypotheses.applicable) {
            const auto m = inst.as_marking(s.rho);
            s.hypotheses = check_hypotheses(m, hypothesis_sample(m, seed, 4));
        }
    }
    const auto pts = parallel_map<nondiv_detail::DeltaSample>(samples, workers, [&](std::size_t i) {
        Point x = stratified_point(inst.ball, i, samples, seed);
        const Lattice lat = inst.lattice(x);
        return nondiv_detail::DeltaSample{x, static_cast<double>(delta(lat).value), lat.unimodular()};
    });
    nondiv_detail::fill_rows(s, pts, eps_grid, [&](double eps) {
        return eps > s.rho ? std::numeric_limits<double>::infinity() : coef * std::pow(eps / s.rho, inst.alpha);
    });
    if (!s.hypotheses.applicable)
        for (auto& r : s.rows)
            r.status = RowStatus::inapplicable;
    return s;
}

/// Integer vectors t >= 0 with 1 <= sum t_i <= total, ordered by sum then lex.
inline std::vector<std::vector<int>> flow_lattice_points(int n, int total) {
    std::vector<std::vector<int>> out;
    for (int s = 1; s <= total; ++s) {
        std::vector<int> t(static_cast<std::size_t>(n), 0);
        std::function<void(int, int)> rec = [&](int i, int left) {
            if (i == n - 1) {
                t[static_cast<std::size_t>(i)] = left;
                out.push_back(t);
                return;
            }
            for (int v = left; v >= 0; --v) {
                t[static_cast<std::size_t>(i)] = v;
                rec(i + 1, left - v);
            }
        };
        rec(0, s);
    }
    return out;
}

struct SeriesRow {
    std::vector<int> t;
    MeasureRow row;   // events: delta <= e^{-gamma t}
    double min_delta; // over the sample
};

struct SeriesReport {
    int order = 0; // nondegeneracy order l
    double C = 0, alpha = 0, rho = 0, D = 0;
    std::string constant_label;
    std::vector<SeriesRow> rows;
    std::map<int, double> level_mass; // sum of |E_t|/|B| over t with sum t_i = s
    std::vector<double> partial_sums; // running total of level_mass
    double decay_slope = 0;           // least-squares slope of log level_mass in s
    int decay_points = 0;
    std::uint64_t consistency_failures = 0;

    bool any_fail() const {
        return std::any_of(rows.begin(), rows.end(), [](const SeriesRow& r) { return r.row.status == RowStatus::fail; });
    }
};

/// Good constants for combinations of 1, f: the polynomial constant when
/// every f_i is a univariate polynomial of degree <= l, otherwise an
/// empirical one (largest measured constant over random combinations, times
/// a safety factor of 2).
inline GoodConstants combination_constants(const std::vector<ScalarField>& f, const Ball& big, int l, int d,
                                           std::uint64_t seed, std::string& label) {
    const double alpha = 1.0 / (d * l);
    const bool poly1 = d == 1 && std::all_of(f.begin(), f.end(), [&](const ScalarField& s) {
        return s.is_polynomial() && s.polynomial().degree() <= l;
    });
    if (poly1) {
        label = "polynomial degree l";
        return {good_constants_polynomial(l).C, alpha};
    }
    label = "empirical";
    double worst = 0;
    const auto fr = log_grid(1e-4, 1, 10);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 24; ++i) {
        auto rng = stream_rng(seed ^ 0x9e3779b9ULL, static_cast<std::uint64_t>(i));
        std::vector<double> c(f.size() + 1);
        for (auto& v : c)
            v = u(rng);
        worst = std::max(worst, minimal_good_constant(linear_combination(c, f), big, alpha, fr, d == 1 ? 4000 : 200));
    }
    return {std::max(1.0, 2 * worst), alpha};
}

/// Sets E_t for integer t with sum t_i <= t_max, coupled on one sample of B
/// around x0, against D (eps/rho)^{1/dl} with eps = e^{-gamma t}.
inline SeriesReport series_experiment(const std::vector<ScalarField>& f, const Point& x0, double radius,
                                             int l, double gamma, int t_max, std::uint64_t samples,
                                             std::uint64_t seed, unsigned workers = 1, int besicovitch = 2) {
    if (!(gamma > 0))
        throw std::invalid_argument("series_experiment: gamma must be positive");
    if (t_max < 1 || samples == 0)
        throw std::invalid_argument("series_experiment: need t_max >= 1 and samples");
    const int n = static_cast<int>(f.size());
    const int d = static_cast<int>(x0.size());
    const auto order = nondegeneracy_order(f, x0, l);
    if (!order)
        throw std::invalid_argument("series_experiment: f is not nondegenerate of order <= l at x0");
    SeriesReport rep;
    rep.order = *order;
    const Ball b(x0, radius);
    MapInstance inst;
    inst.f = f;
    inst.ball = b;
    const auto gc = combination_constants(f, inst.enlarged_ball(), l, d, seed, rep.constant_label);
    rep.C = gc.C;
    rep.alpha = gc.alpha;
    rep.rho = rho_for_map(f, b).rho;
    rep.D = (n + 1) * rep.C * std::pow(std::pow(3.0, d) * besicovitch, n + 1);

    // One sample of B shared by every t.
    std::vector<Point> xs;
    std::vector<std::vector<Real>> ys;
    for (std::size_t i = 0; i < samples; ++i) {
        xs.push_back(stratified_point(b, i, samples, seed));
        ys.push_back(inst.values(xs.back()));
    }
    const auto ts = flow_lattice_points(n, t_max);
    rep.rows = parallel_map<SeriesRow>(ts.size(), workers, [&](std::size_t j) {
        const FlowVector t(std::vector<Real>(ts[j].begin(), ts[j].end()));
        const double eps = std::exp(-gamma * static_cast<double>(t.total()));
        std::uint64_t events = 0;
        double mn = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < samples; ++i) {
            const double dl = static_cast<double>(delta(flowed_lattice(ys[i], t)).value);
            mn = std::min(mn, dl);
            events += dl <= eps;
        }
        const double bound = eps > rep.rho ? std::numeric_limits<double>::infinity()
                                           : rep.D * std::pow(eps / rep.rho, rep.alpha);
        return SeriesRow{ts[j], measure_row(eps, events, samples, bound), mn};
    });
    for (const auto& r : rep.rows) {
        int s = 0;
        for (int v : r.t)
            s += v;
        rep.level_mass[s] += r.row.measured;
        if (r.row.param < r.min_delta && r.row.events != 0)
            ++rep.consistency_failures;
    }
    double acc = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [s, m] : rep.level_mass) {
        acc += m;
        rep.partial_sums.push_back(acc);
        if (m > 0) {
            const double x = s, y = std::log(m);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++rep.decay_points;
        }
    }
    if (rep.decay_points >= 2) {
        const double np = rep.decay_points;
        rep.decay_slope = (np * sxy - sx * sy) / (np * sxx - sx * sx);
    }
    return rep;
}

} // namespace latflow
