#pragma once

// Scenario catalog for the batch runner. Each scenario validates its
// parameter block, runs one family of computations and emits one record
// per row.

#include "latflow/dioph.hpp"
#include "latflow/experiment.hpp"
#include "latflow/goodfun.hpp"
#include "latflow/lattice.hpp"
#include "latflow/marking.hpp"
#include "latflow/nondivergence.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace latflow {

struct ScenarioInfo {
    std::string tag;
    std::string anchor;  // the published result the scenario exercises
    std::string summary;
    std::vector<ParamSpec> params;
    std::vector<std::string> csv_columns;
    std::function<void(RunContext&)> run;
};

namespace scenario_detail {

inline json to_json(const std::vector<Real>& v) {
    json a = json::array();
    for (Real x : v)
        a.push_back(static_cast<double>(x));
    return a;
}

inline json to_json(const IntVector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(v(i));
    return a;
}

inline json to_json(const FlowVector& t) { return to_json(t.components()); }

inline json real_or_inf(double v) {
    if (std::isinf(v))
        return v > 0 ? json("inf") : json("-inf");
    return v;
}

inline std::string join_ints(const std::vector<int>& t) {
    std::string s;
    for (std::size_t i = 0; i < t.size(); ++i)
        s += (i ? "," : "") + std::to_string(t[i]);
    return s;
}

inline std::string matrix_text(const RealMatrix& m) {
    std::string s;
    char buf[40];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (r)
            s += "; ";
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%s%.21Lg", c ? " " : "", m(r, c));
            s += buf;
        }
    }
    return s;
}

/// Random real matrix with |det| = 1 from stream `index`.
inline RealMatrix random_unimodular(int k, std::uint64_t seed, std::uint64_t index) {
    auto rng = stream_rng(seed, index);
    std::uniform_real_distribution<double> u(-1, 1);
    while (true) {
        RealMatrix m(k, k);
        for (int r = 0; r < k; ++r)
            for (int c = 0; c < k; ++c)
                m(r, c) = u(rng);
        const Real det = std::abs(m.determinant());
        if (det < 1e-3L)
            continue;
        return m / std::pow(det, Real(1) / k);
    }
}

/// "identity", "shift" (ones on the superdiagonal), "random" or rows
/// separated by ';'.
inline RealMatrix parse_matrix(const std::string& text, int k, std::uint64_t seed) {
    if (text == "identity")
        return RealMatrix::Identity(k, k);
    if (text == "shift") {
        RealMatrix m = RealMatrix::Zero(k, k);
        for (int i = 0; i + 1 < k; ++i)
            m(i, i + 1) = 1;
        return m;
    }
    if (text == "random")
        return random_unimodular(k, seed, 0xb5u);
    RealMatrix m(k, k);
    std::vector<std::string> rows;
    std::string cur;
    for (char c : text) {
        if (c == ';') {
            rows.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    rows.push_back(cur);
    if (static_cast<int>(rows.size()) != k)
        throw SchemaError("matrix '" + text + "' must have " + std::to_string(k) + " rows");
    for (int r = 0; r < k; ++r) {
        std::istringstream in(rows[static_cast<std::size_t>(r)]);
        std::vector<std::string> toks;
        for (std::string t; in >> t;)
            toks.push_back(t);
        if (static_cast<int>(toks.size()) != k)
            throw SchemaError("matrix '" + text + "' must have " + std::to_string(k) + " columns");
        for (int c = 0; c < k; ++c)
            m(r, c) = std::stold(toks[static_cast<std::size_t>(c)]);
    }
    return m;
}

inline std::vector<Real> parse_targets(const std::vector<std::string>& words) {
    std::vector<Real> y;
    for (const auto& w : words) {
        try {
            y.push_back(parse_target(w).value);
        } catch (const std::invalid_argument& e) {
            throw SchemaError(e.what());
        }
    }
    if (y.empty())
        throw SchemaError("target list is empty");
    return y;
}

inline std::vector<ScalarField> veronese_curve(int n) {
    std::vector<ScalarField> f;
    for (int i = 1; i <= n; ++i) {
        std::vector<double> c(static_cast<std::size_t>(i + 1), 0);
        c.back() = 1;
        f.push_back(ScalarField::from_polynomial(Polynomial::univariate(c)));
    }
    return f;
}

inline Ball interval_param(const Params& p, const std::string& name) {
    const auto iv = p.reals(name);
    if (iv.size() != 2 || !(iv[1] > iv[0]))
        throw SchemaError("parameter '" + name + "' must be two increasing reals");
    return Ball::interval(iv[0], iv[1]);
}

inline void emit_sweep_rows(RunContext& ctx, const std::string& prefix, const std::vector<MeasureRow>& rows,
                            const std::string& eps_param) {
    for (const auto& r : rows) {
        json rec = row_json(key_real(prefix, r.param), r);
        ctx.emit(rec, json{{eps_param, json::array({r.param})}});
    }
}

inline json hypotheses_json(const HypothesisCheck& h) {
    return {{"applicable", h.applicable}, {"checked", h.subgroups_checked}, {"note", h.note}};
}

inline double median(std::vector<double> v) {
    if (v.empty())
        return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---------------------------------------------------------------------------

inline void run_delta_scan(RunContext& ctx) {
    const auto& p = ctx.params();
    const int k = static_cast<int>(p.integer("k"));
    if (k < 1 || k > 6)
        throw SchemaError("delta-scan: k must lie in [1, 6]");
    const auto count = p.integer("random");
    std::vector<RealMatrix> bases;
    if (count > 0) {
        for (std::int64_t i = 0; i < count; ++i)
            bases.push_back(random_unimodular(k, ctx.seed(), static_cast<std::uint64_t>(i)));
    } else {
        bases.push_back(parse_matrix(p.text("basis"), k, ctx.seed()));
    }
    ctx.charge(bases.size());
    std::vector<double> deltas;
    for (std::size_t i = 0; i < bases.size(); ++i) {
        ctx.check_time();
        const Lattice lat(bases[i]);
        const auto d = delta(lat);
        const double det = static_cast<double>(std::abs(lat.determinant()));
        const double mink = std::pow(det, 1.0 / k);
        const Real wn = sup_norm(lat.point(d.witness));
        const bool ok = d.value <= mink * (1 + 1e-12) && std::abs(wn - d.value) <= 1e-12L * std::max<Real>(1, d.value);
        deltas.push_back(static_cast<double>(d.value));
        ctx.emit({{"key", "lattice=" + std::to_string(i)},
                  {"delta", static_cast<double>(d.value)},
                  {"witness", to_json(d.witness)},
                  {"box_points", d.box_points},
                  {"bound", mink},
                  {"measured", static_cast<double>(d.value)},
                  {"status", ok ? "PASS" : "FAIL"}},
                 json{{"basis", matrix_text(bases[i])}, {"random", 0}});
    }
    for (double eps : p.reals("eps_grid")) {
        std::uint64_t events = 0;
        for (double d : deltas)
            events += d < eps;
        ctx.emit({{"key", key_real("eps", eps)},
                  {"param", eps},
                  {"events", events},
                  {"samples", deltas.size()},
                  {"measured", static_cast<double>(events) / static_cast<double>(deltas.size())},
                  {"status", "PASS"}});
    }
}

inline void run_good_cert(RunContext& ctx) {
    const auto& p = ctx.params();
    const auto count = p.integer("random");
    const int grid = static_cast<int>(p.integer("grid"));
    const int points = static_cast<int>(p.integer("eps_points"));
    if (points < 1)
        throw SchemaError("good-cert: eps_points must be positive");
    auto check = [&](const Polynomial& poly, const Ball& b) {
        const int deg = std::max(1, poly.degree());
        double c = p.real("C"), alpha = p.real("alpha");
        const auto gc = good_constants_polynomial(deg);
        if (c <= 0)
            c = gc.C;
        if (alpha <= 0)
            alpha = gc.alpha;
        const auto f = ScalarField::from_polynomial(poly);
        const double sup = sup_norm_on_ball(f, b, 1024).value;
        std::vector<double> eps;
        for (double fr : log_grid(1e-4, 1, points))
            eps.push_back(fr * sup);
        return std::make_tuple(check_good_on_ball(f, b, c, alpha, eps, grid), c, alpha);
    };
    if (count <= 0) {
        const auto coeffs = p.reals("coefficients");
        if (coeffs.empty())
            throw SchemaError("good-cert: give coefficients or random > 0");
        const auto poly = Polynomial::univariate(coeffs);
        const Ball b = interval_param(p, "interval");
        ctx.charge(1);
        const auto [rep, c, alpha] = check(poly, b);
        for (const auto& r : rep.rows)
            ctx.emit({{"key", key_real("eps", r.eps)},
                      {"param", r.eps},
                      {"measured", r.measured},
                      {"error_bar", r.error_bar},
                      {"bound", r.bound},
                      {"sup_norm", rep.sup_norm},
                      {"sup_exact", rep.sup_exact},
                      {"C", c},
                      {"alpha", alpha},
                      {"status", rep.vacuous ? "VACUOUS" : r.pass ? "PASS" : "FAIL"}});
        return;
    }
    const int degree = static_cast<int>(p.integer("degree"));
    if (degree < 1 || degree > 12)
        throw SchemaError("good-cert: degree must lie in [1, 12]");
    ctx.charge(static_cast<std::uint64_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        ctx.check_time();
        auto rng = stream_rng(ctx.seed(), static_cast<std::uint64_t>(i));
        std::normal_distribution<double> nd(0, 1);
        std::uniform_real_distribution<double> ud(-2, 2);
        std::vector<double> coeffs(static_cast<std::size_t>(degree + 1));
        for (auto& c : coeffs)
            c = nd(rng);
        double a = ud(rng), b = ud(rng);
        if (a > b)
            std::swap(a, b);
        if (b - a < 1e-3)
            b = a + 1e-3;
        const auto poly = Polynomial::univariate(coeffs);
        const auto [rep, c, alpha] = check(poly, Ball::interval(a, b));
        json cj = json::array();
        for (double v : coeffs)
            cj.push_back(v);
        ctx.emit({{"key", "poly=" + std::to_string(i)},
                  {"coefficients", cj},
                  {"interval", {a, b}},
                  {"measured", rep.worst_ratio},
                  {"error_bar", rep.worst_ratio_error},
                  {"bound", 1.0},
                  {"param", rep.worst_eps},
                  {"C", c},
                  {"alpha", alpha},
                  {"status", rep.vacuous ? "VACUOUS" : rep.passed ? "PASS" : "FAIL"}},
                 json{{"coefficients", cj}, {"interval", {a, b}}, {"random", 0}});
    }
}

inline json witness_json(const Witness& w) {
    return {{"p", w.p},
            {"q", w.q},
            {"y", to_json(w.y)},
            {"eps", static_cast<double>(w.eps)},
            {"r", static_cast<double>(w.r)},
            {"t", to_json(w.t)},
            {"gamma", static_cast<double>(w.gamma)},
            {"delta", static_cast<double>(w.delta)},
            {"delta_ok", w.delta_ok},
            {"ineq_a_ok", w.ineq_a_ok},
            {"ineq_b_ok", w.ineq_b_ok},
            {"identity_error", static_cast<double>(w.identity_error)},
            {"gamma_error", static_cast<double>(w.gamma_error)}};
}

inline void run_witness_demo(RunContext& ctx) {
    const auto& p = ctx.params();
    const auto y = parse_targets(p.words("y"));
    const auto q = p.integers("q");
    if (q.size() != y.size())
        throw SchemaError("witness-demo: q must have one entry per target");
    ctx.charge(1);
    const auto w = witness_to_flow(y, p.integer("p"), q);
    json rec = {{"key", "witness"}, {"witness", witness_json(w)}, {"diagnostic", w.diagnostic}};
    if (!w.accepted()) {
        rec["diagnostic"] = std::string(to_string(w.status)) + ": " + w.diagnostic;
        rec["status"] = "INAPPLICABLE";
        ctx.emit(rec);
        return;
    }
    rec["measured"] = static_cast<double>(w.delta);
    rec["bound"] = static_cast<double>(w.r);
    rec["status"] = w.all_checks_pass() ? "PASS" : "FAIL";
    ctx.emit(rec, nullptr, witness_json(w));
    const auto rw = round_flow_times(w);
    ctx.emit({{"key", "rounded"},
              {"t", to_json(rw.t)},
              {"measured", static_cast<double>(rw.delta)},
              {"factor", static_cast<double>(rw.factor)},
              {"bound", static_cast<double>(rw.allowed * w.r)},
              {"status", rw.ok ? "PASS" : "FAIL"}},
             nullptr, witness_json(w));
}

inline void run_excursion(RunContext& ctx) {
    const auto& p = ctx.params();
    const auto y = parse_targets(p.words("y"));
    const double gamma = p.real("gamma");
    const int t_max = static_cast<int>(p.integer("t_max"));
    if (!(gamma > 0))
        throw SchemaError("excursion: gamma must be positive");
    ctx.charge(1);
    const auto ex = excursion_scan(y, gamma, t_max);
    const Lattice base = make_lambda_y(y);
    EnumerationOptions wide;
    wide.bound_scale = 2;
    for (const auto& e : ex) {
        ctx.check_time();
        // independent recheck with a doubled enumeration box
        const Real d2 = delta(apply_flow(base, FlowVector(std::vector<Real>(e.t.begin(), e.t.end()))), wide).value;
        const bool ok = std::abs(d2 - e.delta) <= 1e-12L * std::max<Real>(1, e.delta) && d2 <= e.threshold * (1 + 1e-12L);
        ctx.emit({{"key", "t=" + join_ints(e.t)},
                  {"t", e.t},
                  {"measured", static_cast<double>(e.delta)},
                  {"bound", static_cast<double>(e.threshold)},
                  {"status", ok ? "PASS" : "FAIL"}});
    }
    ctx.emit({{"key", "summary"}, {"count", ex.size()}, {"status", "PASS"}});
}

inline void run_nondiv53(RunContext& ctx) {
    const auto& p = ctx.params();
    const int k = static_cast<int>(p.integer("k"));
    if (k < 2 || k > 4)
        throw SchemaError("nondiv-53: k must lie in [2, 4]");
    const RealMatrix g = parse_matrix(p.text("basis"), k, ctx.seed());
    const RealMatrix nil = parse_matrix(p.text("nilpotent"), k, ctx.seed());
    const auto samples = static_cast<std::uint64_t>(p.integer("samples"));
    ctx.charge(samples);
    const auto s = unipotent_experiment(g, nil, p.real("T"), p.reals("eps_grid"), samples, ctx.seed(), ctx.workers());
    ctx.emit({{"key", "summary"},
              {"rho", s.rho},
              {"C", s.C},
              {"alpha", s.alpha},
              {"det_failures", s.det_failures},
              {"min_delta", s.min_delta},
              {"min_delta_at", s.min_delta_at},
              {"status", s.det_failures == 0 ? "PASS" : "FAIL"}});
    emit_sweep_rows(ctx, "eps", s.rows, "eps_grid");
}

inline MapInstance veronese_instance(const Params& p, int n, const std::string& t_name) {
    MapInstance inst;
    inst.f = veronese_curve(n);
    inst.ball = interval_param(p, "interval");
    const auto tv = p.reals(t_name);
    if (static_cast<int>(tv.size()) != n)
        throw SchemaError("parameter '" + t_name + "' must have n entries");
    for (double v : tv)
        if (v < 0)
            throw SchemaError("flow times must be nonnegative");
    inst.t = FlowVector(std::vector<Real>(tv.begin(), tv.end()));
    const auto gc = good_constants_polynomial(n);
    inst.C = p.real("C") > 0 ? p.real("C") : gc.C;
    inst.alpha = p.real("alpha") > 0 ? p.real("alpha") : gc.alpha;
    inst.constant_label = p.real("C") > 0 ? "configured" : "polynomial degree n";
    inst.besicovitch = static_cast<int>(p.integer("besicovitch"));
    if (inst.besicovitch < 1)
        throw SchemaError("besicovitch must be positive");
    return inst;
}

inline void run_nondiv54(RunContext& ctx) {
    const auto& p = ctx.params();
    const int n = static_cast<int>(p.integer("n"));
    if (n < 1 || n > 3)
        throw SchemaError("nondiv-54: n must lie in [1, 3]");
    const auto inst = veronese_instance(p, n, "t");
    const auto samples = static_cast<std::uint64_t>(p.integer("samples"));
    ctx.charge(samples);
    const auto s = curve_experiment(inst, p.reals("eps_grid"), samples, ctx.seed(), ctx.workers(),
                                        p.boolean("check_hypotheses"));
    ctx.emit({{"key", "summary"},
              {"rho", s.rho},
              {"C", s.C},
              {"alpha", s.alpha},
              {"constant", s.constant_label},
              {"besicovitch", inst.besicovitch},
              {"hypotheses", hypotheses_json(s.hypotheses)},
              {"det_failures", s.det_failures},
              {"min_delta", s.min_delta},
              {"status", s.det_failures == 0 ? "PASS" : "FAIL"}});
    emit_sweep_rows(ctx, "eps", s.rows, "eps_grid");
}

inline void run_prop23(RunContext& ctx) {
    const auto& p = ctx.params();
    const int n = static_cast<int>(p.integer("n"));
    if (n < 1 || n > 3)
        throw SchemaError("prop23: n must lie in [1, 3]");
    const auto samples = static_cast<std::uint64_t>(p.integer("samples"));
    const int t_max = static_cast<int>(p.integer("t_max"));
    if (t_max < 1 || t_max > 27)
        throw SchemaError("prop23: t_max must lie in [1, 27]");
    ctx.charge(samples * flow_lattice_points(n, t_max).size());
    const auto rep = series_experiment(veronese_curve(n), Point{p.real("x0")}, p.real("radius"),
                                              static_cast<int>(p.integer("l")), p.real("gamma"), t_max, samples,
                                              ctx.seed(), ctx.workers(), static_cast<int>(p.integer("besicovitch")));
    json levels = json::array();
    for (const auto& [s, m] : rep.level_mass)
        levels.push_back({{"level", s}, {"mass", m}});
    ctx.emit({{"key", "summary"},
              {"order", rep.order},
              {"C", rep.C},
              {"alpha", rep.alpha},
              {"constant", rep.constant_label},
              {"rho", rep.rho},
              {"D", rep.D},
              {"levels", levels},
              {"partial_sums", rep.partial_sums},
              {"decay_slope", rep.decay_slope},
              {"decay_points", rep.decay_points},
              {"consistency_failures", rep.consistency_failures},
              {"status", rep.consistency_failures == 0 ? "PASS" : "FAIL"}});
    for (const auto& r : rep.rows) {
        json rec = row_json("t=" + join_ints(r.t), r.row);
        rec["t"] = r.t;
        rec["min_delta"] = r.min_delta;
        ctx.emit(rec);
    }
}

inline void run_marking41(RunContext& ctx) {
    const auto& p = ctx.params();
    const int k = static_cast<int>(p.integer("k"));
    if (k < 2 || k > 4)
        throw SchemaError("marking-41: k must lie in [2, 4]");
    const auto map = veronese_instance(p, k - 1, "t");
    double rho = p.real("rho");
    if (rho <= 0)
        rho = rho_for_map(map.f, map.ball).rho;
    if (rho > 1.0 / k)
        throw SchemaError("marking-41: rho must not exceed 1/k");
    const auto inst = map.as_marking(rho);
    auto eps_grid = p.reals("eps_grid");
    if (eps_grid.empty())
        eps_grid = epsilon_grid(rho, marking_bound(k, 1, inst.C, inst.alpha, 1, 1, inst.besicovitch), inst.alpha);
    const auto samples = static_cast<std::uint64_t>(p.integer("samples"));
    const std::string mode = p.text("mode");
    if (mode != "measure" && mode != "delta" && mode != "both")
        throw SchemaError("marking-41: mode must be measure, delta or both");
    HypothesisCheck hyp;
    if (p.boolean("check_hypotheses") && mode != "delta")
        hyp = check_hypotheses(inst, hypothesis_sample(inst, ctx.seed()));
    ctx.emit({{"key", "summary"},
              {"rho", rho},
              {"C", inst.C},
              {"alpha", inst.alpha},
              {"besicovitch", inst.besicovitch},
              {"hypotheses", hypotheses_json(hyp)},
              {"status", "PASS"}});
    for (double eps : eps_grid) {
        if (mode != "delta") {
            ctx.charge(samples);
            auto e = unmarked_measure_experiment(inst, eps, samples, ctx.seed(), ctx.workers(), false);
            if (!hyp.applicable)
                e.row.status = RowStatus::inapplicable;
            json rec = row_json(key_real("measure eps", eps), e.row);
            rec["marked"] = e.marked;
            rec["unmarked"] = e.unmarked;
            ctx.emit(rec, json{{"eps_grid", json::array({eps})}, {"mode", "measure"}});
        }
        if (mode != "measure") {
            ctx.charge(samples);
            const auto d = marked_implies_delta_check(inst, eps, samples, ctx.seed(), ctx.workers());
            const bool ok = d.violations == 0 && d.small_delta_marked == 0;
            json rec = {{"key", key_real("delta eps", eps)},
                        {"param", eps},
                        {"samples", d.samples},
                        {"marked", d.marked},
                        {"unmarked", d.unmarked},
                        {"boundary", d.boundary},
                        {"events", d.violations},
                        {"small_delta", d.small_delta},
                        {"small_delta_marked", d.small_delta_marked},
                        {"measured", static_cast<double>(d.boundary) / static_cast<double>(d.samples)},
                        {"min_marked_delta", real_or_inf(d.min_marked_delta)},
                        {"status", ok ? "PASS" : "FAIL"}};
            json point = nullptr;
            if (d.first_violation)
                point = {{"x", *d.first_violation}, {"eps", eps}};
            ctx.emit(rec, json{{"eps_grid", json::array({eps})}, {"mode", "delta"}}, point);
        }
    }
}

inline void run_exponent_scan(RunContext& ctx) {
    const auto& p = ctx.params();
    const auto bound = p.integer("Q");
    const bool mult = p.boolean("multiplicative");
    const auto points = p.integer("veronese_points");
    if (points <= 0) {
        std::vector<TargetEntry> ys;
        for (const auto& w : p.words("y")) {
            try {
                ys.push_back(parse_target(w));
            } catch (const std::invalid_argument& e) {
                throw SchemaError(e.what());
            }
        }
        const std::string form = p.text("form");
        if (form != "dual" && form != "simultaneous")
            throw SchemaError("exponent-scan: form must be dual or simultaneous");
        ctx.charge(1);
        const ScanSpec spec{form == "dual" ? TargetMatrix::dual(ys) : TargetMatrix::simultaneous(ys), bound, mult};
        const auto scan = best_exponent(spec);
        for (const auto& sh : scan.shells) {
            ctx.emit({{"key", "shell=" + std::to_string(sh.shell)},
                      {"shell", sh.shell},
                      {"lower", static_cast<double>(sh.lower)},
                      {"upper", static_cast<double>(sh.upper)},
                      {"complete", sh.complete},
                      {"found", sh.found},
                      {"exact_hit", sh.exact_hit},
                      {"measured", real_or_inf(sh.eps)},
                      {"q", sh.q},
                      {"p", sh.p},
                      {"height", static_cast<double>(sh.height)},
                      {"status", "PASS"}});
        }
        return;
    }
    const int n = static_cast<int>(p.integer("n"));
    if (n < 1 || n > 3)
        throw SchemaError("exponent-scan: n must lie in [1, 3]");
    ctx.charge(static_cast<std::uint64_t>(points));
    struct PointScan {
        double x = 0, top = 0, bottom = 0;
        int top_shell = 0, bottom_shell = 0;
    };
    const auto scans = parallel_map<PointScan>(static_cast<std::size_t>(points), ctx.workers(), [&](std::size_t i) {
        auto rng = stream_rng(ctx.seed(), i);
        std::uniform_real_distribution<double> u(-1, 1);
        PointScan ps;
        ps.x = u(rng);
        const auto y = veronese(ps.x, n);
        const auto scan = best_exponent({TargetMatrix::from_reals(y, true), bound, mult});
        bool have_bottom = false;
        for (const auto& sh : scan.shells) {
            if (!sh.found || !sh.complete || sh.exact_hit)
                continue;
            if (!have_bottom) {
                ps.bottom = sh.eps;
                ps.bottom_shell = sh.shell;
                have_bottom = true;
            }
            ps.top = sh.eps;
            ps.top_shell = sh.shell;
        }
        return ps;
    });
    std::vector<double> tops, bottoms;
    for (std::size_t i = 0; i < scans.size(); ++i) {
        const auto& s = scans[i];
        tops.push_back(s.top);
        bottoms.push_back(s.bottom);
        ctx.emit({{"key", "point=" + std::to_string(i)},
                  {"x", s.x},
                  {"bottom_shell", s.bottom_shell},
                  {"bottom", s.bottom},
                  {"top_shell", s.top_shell},
                  {"top", s.top},
                  {"measured", s.top},
                  {"status", "PASS"}});
    }
    const double mt = median(tops), mb = median(bottoms);
    ctx.emit({{"key", "summary"},
              {"median_top", mt},
              {"median_bottom", mb},
              {"measured", mt},
              {"bound", mb},
              {"status", mt < mb ? "PASS" : "FAIL"}});
}

inline void run_khintchine(RunContext& ctx) {
    const auto& p = ctx.params();
    std::vector<Real> y;
    const auto words = p.words("y");
    if (!words.empty()) {
        y = parse_targets(words);
    } else {
        const int n = static_cast<int>(p.integer("n"));
        if (n < 1 || n > 3)
            throw SchemaError("khintchine-count: n must lie in [1, 3]");
        y = veronese(p.real("veronese_x"), n);
    }
    const std::string psi_name = p.text("psi");
    std::function<Real(std::int64_t)> psi;
    if (psi_name == "zero")
        psi = [](std::int64_t) { return Real(0); };
    else if (psi_name == "huge")
        psi = [](std::int64_t h) { return static_cast<Real>(h); };
    else if (psi_name == "log2")
        psi = [](std::int64_t h) {
            const Real l = std::log(static_cast<Real>(std::max<std::int64_t>(h, 3)));
            return 1 / (static_cast<Real>(h) * l * l);
        };
    else
        throw SchemaError("khintchine-count: psi must be zero, huge or log2");
    for (auto bound : p.integers("bounds")) {
        ctx.charge(1);
        const auto c = khintchine_count(y, psi, bound);
        ctx.emit({{"key", "Q=" + std::to_string(bound)},
                  {"Q", bound},
                  {"solutions", c.solutions},
                  {"distinct_q", c.distinct_q},
                  {"measured", c.solutions},
                  {"exploratory", true},
                  {"status", "PASS"}});
    }
}

inline const std::vector<std::string> kSweepColumns = {"key",   "status", "param", "events", "samples", "boundary",
                                                       "measured", "lower", "upper", "bound"};

} // namespace scenario_detail

/// The ten scenarios, in catalog order.
inline const std::vector<ScenarioInfo>& scenario_catalog() {
    using P = ParamType;
    using namespace scenario_detail;
    static const std::vector<ScenarioInfo> catalog = {
        {"delta-scan",
         "Section 1: shortest-vector function delta",
         "delta(L) with witness for a basis or random unimodular lattices; checks delta <= det^{1/k}",
         {{"k", P::integer, "3", "lattice dimension"},
          {"basis", P::text, "identity", "identity, random, or rows separated by ';'"},
          {"random", P::integer, "0", "number of random unimodular lattices (overrides basis)"},
          {"eps_grid", P::reals, "0.05 0.1 0.25 0.5 0.9", "thresholds for the fraction with delta < eps"}},
         {"key", "status", "delta", "bound", "param", "events", "samples", "measured"},
         run_delta_scan},
        {"good-cert",
         "Proposition 3.2",
         "sublevel measures of polynomials against C (eps/sup)^alpha on intervals",
         {{"coefficients", P::reals, "", "c0 c1 ... of a univariate polynomial"},
          {"interval", P::reals, "0 1", "interval a b"},
          {"random", P::integer, "0", "number of random polynomials (overrides coefficients)"},
          {"degree", P::integer, "3", "degree of random polynomials"},
          {"C", P::real, "0", "constant; 0 selects 2k(k+1)^{1/k}"},
          {"alpha", P::real, "0", "exponent; 0 selects 1/k"},
          {"eps_points", P::integer, "12", "log-spaced eps per polynomial"},
          {"grid", P::integer, "20000", "grid cells on the interval"}},
         {"key", "status", "param", "measured", "error_bar", "bound", "C", "alpha"},
         run_good_cert},
        {"witness-demo",
         "Lemma 2.1 and Corollary 2.2",
         "turns an approximation (p, q) of y into flow times t and checks delta(g_t Lambda_y) <= r",
         {{"y", P::text, "sqrt2", "targets: decimals, a/b, sqrt2, golden, liouville4"},
          {"p", P::integer, "-17", "integer p"},
          {"q", P::integers, "12", "integer vector q"}},
         {"key", "status", "measured", "bound", "factor", "diagnostic"},
         run_witness_demo},
        {"excursion",
         "Corollary 2.2",
         "all integer t with 1 <= sum t <= t_max where delta(g_t Lambda_y) <= e^{-gamma t}",
         {{"y", P::text, "liouville4", "targets"},
          {"gamma", P::real, "0.3", "rate gamma > 0"},
          {"t_max", P::integer, "20", "largest sum of t (at most 27)"}},
         {"key", "status", "measured", "bound", "count"},
         run_excursion},
        {"nondiv-53",
         "Theorem 5.3",
         "time spent by a unipotent orbit u_x g Z^k with delta < eps on (0, T)",
         {{"k", P::integer, "2", "dimension (2..4)"},
          {"basis", P::text, "random", "identity, random, or rows separated by ';'"},
          {"nilpotent", P::text, "shift", "shift or rows separated by ';'"},
          {"T", P::real, "100", "horizon"},
          {"samples", P::integer, "20000", "stratified samples of (0, T)"},
          {"eps_grid", P::reals, "", "eps values; empty selects the log grid"}},
         kSweepColumns,
         run_nondiv53},
        {"nondiv-54",
         "Theorem 5.4",
         "measure of x with delta(g_t u_f(x) Z^{n+1}) < eps for the curve (x, ..., x^n)",
         {{"n", P::integer, "1", "curve dimension (1..3)"},
          {"interval", P::reals, "-0.5 0.5", "ball B"},
          {"t", P::reals, "3", "flow times t_1 .. t_n"},
          {"C", P::real, "0", "constant; 0 selects the polynomial constant of degree n"},
          {"alpha", P::real, "0", "exponent; 0 selects 1/n"},
          {"besicovitch", P::integer, "2", "Besicovitch constant N_d"},
          {"samples", P::integer, "20000", "stratified samples of B"},
          {"eps_grid", P::reals, "", "eps values; empty selects the log grid"},
          {"check_hypotheses", P::boolean, "true", "spot-check goodness and the rho lower bound"}},
         kSweepColumns,
         run_nondiv54},
        {"prop23",
         "Proposition 2.3",
         "sets E_t for integer t on the curve (x, ..., x^n) against D (eps/rho)^{1/dl}",
         {{"n", P::integer, "2", "curve dimension"},
          {"x0", P::real, "0", "center of B"},
          {"radius", P::real, "0.5", "radius of B"},
          {"l", P::integer, "2", "nondegeneracy order"},
          {"gamma", P::real, "0.1", "rate gamma > 0"},
          {"t_max", P::integer, "12", "largest sum of t"},
          {"samples", P::integer, "2000", "stratified samples of B"},
          {"besicovitch", P::integer, "2", "Besicovitch constant N_d"}},
         kSweepColumns,
         run_prop23},
        {"marking-41",
         "Theorem 4.1 and Theorem 5.2",
         "unmarked measure against k C (3^d N_d)^k (eps/rho)^alpha; marked points have delta >= eps",
         {{"k", P::integer, "2", "lattice dimension (curve of dimension k - 1)"},
          {"interval", P::reals, "-0.5 0.5", "ball B"},
          {"t", P::reals, "2", "flow times (k - 1 entries)"},
          {"C", P::real, "0", "constant; 0 selects the polynomial constant"},
          {"alpha", P::real, "0", "exponent; 0 selects 1/(k-1)"},
          {"rho", P::real, "0", "rho; 0 computes a certified lower bound"},
          {"besicovitch", P::integer, "2", "Besicovitch constant N_d"},
          {"samples", P::integer, "10000", "sampled points per eps"},
          {"eps_grid", P::reals, "", "eps values; empty selects the log grid"},
          {"mode", P::text, "both", "measure, delta or both"},
          {"check_hypotheses", P::boolean, "true", "spot-check goodness and sup >= rho"}},
         {"key", "status", "param", "events", "samples", "boundary", "measured", "lower", "upper", "bound", "marked",
          "unmarked"},
         run_marking41},
        {"exponent-scan",
         "Theorem A",
         "best exponent per dyadic height shell; Veronese mode compares top and bottom shells",
         {{"y", P::text, "golden", "targets"},
          {"form", P::text, "dual", "dual or simultaneous"},
          {"multiplicative", P::boolean, "false", "multiplicative heights"},
          {"Q", P::integer, "1000", "search box"},
          {"veronese_points", P::integer, "0", "random points on the curve (overrides y)"},
          {"n", P::integer, "2", "curve dimension in Veronese mode"}},
         {"key", "status", "shell", "measured", "complete", "height", "top", "bottom"},
         run_exponent_scan},
        {"khintchine-count",
         "Theorem B",
         "solutions of |q.y + p| ||q||^n <= psi(||q||^n) with ||q|| <= Q",
         {{"y", P::text, "", "targets; empty selects the curve point"},
          {"veronese_x", P::real, "0.3", "curve parameter when y is empty"},
          {"n", P::integer, "2", "curve dimension when y is empty"},
          {"psi", P::text, "log2", "zero, huge or log2 (1/(h log^2 h))"},
          {"bounds", P::integers, "10 20 50 100", "values of Q"}},
         {"key", "status", "Q", "solutions", "distinct_q"},
         run_khintchine},
    };
    return catalog;
}

inline const ScenarioInfo* find_scenario(const std::string& tag) {
    for (const auto& s : scenario_catalog())
        if (s.tag == tag)
            return &s;
    return nullptr;
}

struct RunOutcome {
    int exit_code = 0;
    std::string message;
    std::vector<json> records;
    std::string jsonl_path, csv_path;
};

/// Runs a config. Exit codes: 0 clean, 1 FAIL rows, 2 schema violation or
/// invalid parameters, 3 budget exceeded (records so far are kept and a
/// TRUNCATED record is appended). With write_files false nothing touches
/// the disk.
inline RunOutcome run_experiment(const ExperimentConfig& cfg, unsigned workers, bool write_files) {
    RunOutcome out;
    const auto* info = find_scenario(cfg.scenario);
    if (!info) {
        out.exit_code = 2;
        out.message = "unknown scenario '" + cfg.scenario + "'";
        return out;
    }
    Params params;
    try {
        params = resolve_params(info->params, cfg.params);
    } catch (const SchemaError& e) {
        out.exit_code = 2;
        out.message = e.what();
        return out;
    }
    auto sink = std::make_unique<RecordSink>();
    const std::string stem = cfg.scenario + "-" + fnv1a_hex(resolved_config_json(cfg, params).dump()).substr(0, 8);
    if (write_files) {
        std::filesystem::create_directories(cfg.out);
        out.jsonl_path = (std::filesystem::path(cfg.out) / (stem + ".jsonl")).string();
        out.csv_path = (std::filesystem::path(cfg.out) / (stem + ".csv")).string();
        sink = std::make_unique<RecordSink>(out.jsonl_path, out.csv_path, info->csv_columns);
    }
    RunContext ctx(cfg, params, *sink, workers);
    sink->header({{"schema", kRecordSchema},
                  {"schema_version", kRecordSchemaVersion},
                  {"version", LATFLOW_VERSION},
                  {"anchor", info->anchor},
                  {"config", ctx.config_json()},
                  {"config_hash", ctx.hash()}});
    const auto saved_budget = enumeration_budget_default().load();
    enumeration_budget_default() = cfg.budget.entries;
    try {
        info->run(ctx);
        out.exit_code = ctx.failures() > 0 ? 1 : 0;
    } catch (const SchemaError& e) {
        out.exit_code = 2;
        out.message = e.what();
    } catch (const BudgetExceeded& e) {
        ctx.emit({{"key", "truncated"}, {"status", "TRUNCATED"}, {"reason", e.what()}});
        out.exit_code = 3;
        out.message = std::string("budget exceeded: ") + e.what();
    } catch (const std::invalid_argument& e) {
        out.exit_code = 2;
        out.message = std::string("invalid parameters: ") + e.what();
    }
    enumeration_budget_default() = saved_budget;
    out.records = sink->records();
    return out;
}

/// Config object from the "config" member of a header or replay payload.
inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.scenario = j.at("scenario").get<std::string>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    const auto& b = j.at("budget");
    cfg.budget.samples = b.at("samples").get<std::uint64_t>();
    cfg.budget.entries = b.at("entries").get<std::int64_t>();
    cfg.budget.wall_seconds = b.at("wall_seconds").get<double>();
    for (const auto& [k, v] : j.at("params").items()) {
        if (v.is_string()) {
            cfg.params[k] = v.get<std::string>();
        } else if (v.is_array()) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i)
                s += (i ? " " : "") + v[i].dump();
            cfg.params[k] = s;
        } else {
            cfg.params[k] = v.dump();
        }
    }
    return cfg;
}

} // namespace latflow
