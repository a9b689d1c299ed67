// Acceptance suite: one PASS/FAIL line per criterion. Every check uses an
// oracle written here, independent of the library code under test.

#include "latflow/scenarios.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace latflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. delta against a brute-force box

RealMatrix random_real_unimodular(std::mt19937_64& rng, int k) {
    std::uniform_real_distribution<double> u(-1, 1);
    while (true) {
        RealMatrix g(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                g(i, j) = u(rng);
        const Real det = g.determinant();
        if (std::abs(det) < 0.1L)
            continue;
        if (det < 0)
            g.col(0) *= -1;
        return g / std::pow(std::abs(det), 1.0L / k);
    }
}

// Product of elementary integer matrices: a skewed basis of Z^k.
RealMatrix random_integer_unimodular(std::mt19937_64& rng, int k) {
    std::uniform_int_distribution<int> pick(0, k - 1), coef(-3, 3);
    IntMatrix m = IntMatrix::Identity(k, k);
    for (int step = 0; step < 3 * k; ++step) {
        const int i = pick(rng), j = pick(rng);
        if (i == j)
            continue;
        m.row(i) += coef(rng) * m.row(j);
    }
    return m.cast<Real>();
}

// Minimum of ||g m|| over 0 < ||m||_inf <= box.
Real box_minimum(const RealMatrix& g, std::int64_t box) {
    const int k = static_cast<int>(g.rows());
    Real best = std::numeric_limits<Real>::infinity();
    std::vector<std::int64_t> m(static_cast<std::size_t>(k), -box);
    while (true) {
        bool zero = true;
        RealVector v = RealVector::Zero(k);
        for (int j = 0; j < k; ++j) {
            if (m[static_cast<std::size_t>(j)] != 0)
                zero = false;
            v += static_cast<Real>(m[static_cast<std::size_t>(j)]) * g.col(j);
        }
        if (!zero)
            best = std::min(best, v.cwiseAbs().maxCoeff());
        int i = 0;
        while (i < k && m[static_cast<std::size_t>(i)] == box)
            m[static_cast<std::size_t>(i++)] = -box;
        if (i == k)
            break;
        ++m[static_cast<std::size_t>(i)];
    }
    return best;
}

// Any v = g m with ||v|| <= R has ||m|| <= ||g^-1||_{inf} R; the oracle box
// is half as large again as that.
std::int64_t certified_box(const RealMatrix& g) {
    Real radius = std::numeric_limits<Real>::infinity();
    for (Eigen::Index c = 0; c < g.cols(); ++c)
        radius = std::min(radius, g.col(c).cwiseAbs().maxCoeff());
    const RealMatrix inv = g.inverse();
    Real norm = 0;
    for (Eigen::Index i = 0; i < inv.rows(); ++i)
        norm = std::max(norm, inv.row(i).cwiseAbs().sum());
    return static_cast<std::int64_t>(std::ceil(1.5L * norm * radius)) + 1;
}

Outcome criterion_delta() {
    std::mt19937_64 rng(1001);
    int exact = 0, floats = 0, mismatches = 0, skipped = 0;
    Real worst = 0;
    const std::int64_t max_box[5] = {0, 0, 60, 16, 7};
    for (int i = 0; i < 500; ++i) {
        const int k = 2 + i % 3;
        const bool integer = i % 5 == 0;
        RealMatrix g;
        std::int64_t box = 0;
        do {
            g = integer ? random_integer_unimodular(rng, k) : random_real_unimodular(rng, k);
            box = certified_box(g);
            skipped += box > max_box[k];
        } while (box > max_box[k]);
        const Real oracle = box_minimum(g, box);
        const Real got = delta(Lattice(g, integer)).value;
        if (integer) {
            ++exact;
            mismatches += got != oracle || got != 1;
        } else {
            ++floats;
            worst = std::max(worst, std::abs(got - oracle));
            mismatches += std::abs(got - oracle) > 1e-9L;
        }
    }
    return {mismatches == 0, fmt("%d lattices (%d exact, %d float), %d mismatches, max float error %.1e, %d redraws",
                                 exact + floats, exact, floats, mismatches, static_cast<double>(worst), skipped)};
}

// ---------------------------------------------------------------------------
// 2. Witness to flow

struct Approximation {
    std::vector<Real> y;
    std::int64_t p;
    std::vector<std::int64_t> q;
};

std::vector<Approximation> convergent_witnesses(std::mt19937_64& rng, std::size_t count) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<Approximation> out;
    while (out.size() < count) {
        const Real y = u(rng);
        Real frac = y;
        std::int64_t p0 = 1, q0 = 0, p1 = 0, q1 = 1; // convergents of y in (0, 1)
        for (int step = 0; step < 40 && out.size() < count; ++step) {
            const Real inv = 1 / frac;
            const auto a = static_cast<std::int64_t>(std::floor(inv));
            frac = inv - static_cast<Real>(a);
            const std::int64_t p2 = a * p1 + p0, q2 = a * q1 + q0;
            if (q2 > 1'000'000 || frac == 0)
                break;
            if (q2 >= 2)
                out.push_back({{y}, -p2, {q2}});
            p0 = p1;
            q0 = q1;
            p1 = p2;
            q1 = q2;
        }
    }
    return out;
}

// Record breakers of |q.y + p| as ||q||_inf grows to 500.
std::vector<Approximation> best_approximations_2d(std::mt19937_64& rng, std::size_t count) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<Approximation> out;
    while (out.size() < count) {
        const Real y1 = u(rng), y2 = u(rng);
        Real record = std::numeric_limits<Real>::infinity();
        for (std::int64_t h = 1; h <= 500 && out.size() < count; ++h) {
            Real ring_best = std::numeric_limits<Real>::infinity();
            std::int64_t bq1 = 0, bq2 = 0, bp = 0;
            for (std::int64_t a = -h; a <= h; ++a)
                for (std::int64_t b = -h; b <= h; ++b) {
                    if (std::max(std::abs(a), std::abs(b)) != h || a < 0 || (a == 0 && b < 0))
                        continue;
                    const Real form = static_cast<Real>(a) * y1 + static_cast<Real>(b) * y2;
                    const Real p = -std::round(form);
                    const Real r = std::abs(form + p);
                    if (r < ring_best) {
                        ring_best = r;
                        bq1 = a;
                        bq2 = b;
                        bp = static_cast<std::int64_t>(p);
                    }
                }
            if (ring_best < record) {
                record = ring_best;
                const Real height = std::max<Real>(std::abs(bq1), 1) * std::max<Real>(std::abs(bq2), 1);
                if (h >= 2 && ring_best * height <= 1)
                    out.push_back({{y1, y2}, bp, {bq1, bq2}});
            }
        }
    }
    return out;
}

Outcome criterion_witness() {
    std::mt19937_64 rng(2002);
    auto cases = convergent_witnesses(rng, 500);
    const auto two = best_approximations_2d(rng, 500);
    cases.insert(cases.end(), two.begin(), two.end());
    int failures = 0, rejected = 0;
    Real worst_identity = 0, worst_excess = 0;
    for (const auto& c : cases) {
        const auto w = witness_to_flow(c.y, c.p, c.q);
        if (!w.accepted()) {
            ++rejected;
            continue;
        }
        const int n = static_cast<int>(c.y.size());
        // conclusion: the flowed witness vector lies in the r-ball, so delta <= r
        // q.y + p in quad precision, where the products are exact
        __float128 form = static_cast<__float128>(c.p);
        Real height = 1;
        for (int i = 0; i < n; ++i) {
            form += static_cast<__float128>(c.q[static_cast<std::size_t>(i)]) *
                    static_cast<__float128>(c.y[static_cast<std::size_t>(i)]);
            height *= std::max<Real>(std::abs(static_cast<Real>(c.q[static_cast<std::size_t>(i)])), 1);
        }
        Real norm = std::exp(w.t.total()) * std::abs(static_cast<Real>(form));
        for (int i = 0; i < n; ++i)
            norm = std::max(norm, std::exp(-w.t[static_cast<std::size_t>(i)]) *
                                      std::abs(static_cast<Real>(c.q[static_cast<std::size_t>(i)])));
        const Real identity = std::abs(height - std::pow(w.r, n) * std::exp(w.t.total())) / height;
        worst_identity = std::max(worst_identity, identity);
        worst_excess = std::max(worst_excess, w.delta - w.r);
        const bool ok = w.delta <= w.r + 1e-9L && norm <= w.r + 1e-9L && identity <= 1e-12L && w.delta_ok &&
                        w.all_checks_pass();
        failures += !ok;
    }
    const int accepted = static_cast<int>(cases.size()) - rejected;
    return {failures == 0 && accepted == 1000,
            fmt("%d witnesses (500 convergents, 500 best approximations in the plane), %d rejected, %d failures, "
                "max identity error %.1e, max delta - r %.1e",
                accepted, rejected, failures, static_cast<double>(worst_identity), static_cast<double>(worst_excess))};
}

// ---------------------------------------------------------------------------
// 3. Sublevel sets of polynomials

Outcome criterion_polynomials() {
    std::mt19937_64 rng(3003);
    std::uniform_real_distribution<double> u(-1, 1);
    constexpr int kCells = 20000;
    int checked = 0, violations = 0, library_failures = 0;
    double worst_ratio = 0;
    for (int k = 1; k <= 5; ++k) {
        const double c_const = 2.0 * k * std::pow(k + 1.0, 1.0 / k), alpha = 1.0 / k;
        for (int trial = 0; trial < 500; ++trial) {
            const double a = 3 * u(rng), len = 0.05 + 2 * (u(rng) + 1);
            const double b = a + len;
            // coefficients c_0..c_k, leading one nonzero; half built from roots in the interval
            std::vector<double> c(static_cast<std::size_t>(k) + 1, 0);
            if (trial % 2 == 0) {
                c[0] = 1;
                for (int r = 0; r < k; ++r) {
                    const double root = a + len * (u(rng) + 1) / 2;
                    for (int j = r + 1; j >= 0; --j)
                        c[static_cast<std::size_t>(j)] =
                            (j ? c[static_cast<std::size_t>(j) - 1] : 0) - root * c[static_cast<std::size_t>(j)];
                }
                const double s = u(rng);
                for (auto& v : c)
                    v *= s;
            } else {
                for (auto& v : c)
                    v = u(rng);
            }
            if (c.back() == 0)
                c.back() = 0.5;
            auto eval = [&](long double x) {
                long double acc = 0;
                for (int j = k; j >= 0; --j)
                    acc = acc * x + c[static_cast<std::size_t>(j)];
                return acc;
            };
            const double h = len / kCells;
            std::vector<long double> mid(kCells);
            long double sup = std::max(std::abs(eval(a)), std::abs(eval(b)));
            for (int i = 0; i < kCells; ++i) {
                mid[static_cast<std::size_t>(i)] = eval(a + (i + 0.5) * h);
                sup = std::max(sup, std::abs(eval(a + (i + 1) * h)));
            }
            // |f'| <= sum j |c_j| M^{j-1} on the interval; pad the grid max to a true upper bound
            const double reach = std::max(std::abs(a), std::abs(b));
            double lip = 0;
            for (int j = 1; j <= k; ++j)
                lip += j * std::abs(c[static_cast<std::size_t>(j)]) * std::pow(reach, j - 1);
            const double sup_upper = static_cast<double>(sup) + lip * h / 2;
            for (double eps : log_grid(1e-4 * static_cast<double>(sup), static_cast<double>(sup), 12)) {
                std::int64_t inside = 0;
                for (auto v : mid)
                    inside += std::abs(v) < eps;
                // {|f| < eps} has at most 2k boundary points, each spoiling one cell
                const double measured = inside * h, error_bar = 2 * k * h;
                const double bound = c_const * std::pow(eps / sup_upper, alpha) * len;
                ++checked;
                violations += measured - error_bar > bound;
                worst_ratio = std::max(worst_ratio, (measured - error_bar) / bound);
            }
            // the library's own certificate must agree
            const auto f = ScalarField::from_polynomial(Polynomial::univariate(std::span<const double>(c)));
            const double lib_sup = sup_norm_on_ball(f, Ball::interval(a, b)).value;
            const auto rep = check_good_on_ball(f, Ball::interval(a, b), c_const, alpha,
                                                log_grid(1e-4 * lib_sup, lib_sup, 12), 2000);
            library_failures += !rep.passed;
        }
    }
    return {violations == 0 && library_failures == 0,
            fmt("%d (polynomial, eps) cases over degrees 1..5, %d violations beyond error bars, "
                "%d library certificate failures, worst measured/bound %.3f",
                checked, violations, library_failures, worst_ratio)};
}

// ---------------------------------------------------------------------------
// 4. Closed-form coordinates against the exterior action

Outcome criterion_closed_form() {
    std::mt19937_64 rng(4004);
    std::uniform_real_distribution<double> u(-2, 2), ut(0, 2);
    std::uniform_int_distribution<int> un(1, 4);
    int mismatches = 0;
    double worst = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = un(rng);
        std::vector<Real> coeffs(std::size_t{1} << (n + 1));
        for (auto& v : coeffs)
            v = u(rng);
        const MultiVector w(n + 1, coeffs);
        std::vector<Real> y(static_cast<std::size_t>(n)), tv(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            y[static_cast<std::size_t>(i)] = u(rng);
            tv[static_cast<std::size_t>(i)] = ut(rng);
        }
        const FlowVector t(tv);
        const auto closed = flowed_coordinates(w, y, t);
        // matrix of g_t u_y assembled here, applied through the exterior power
        RealMatrix h = RealMatrix::Identity(n + 1, n + 1);
        Real total = 0;
        for (int i = 0; i < n; ++i)
            total += tv[static_cast<std::size_t>(i)];
        h(0, 0) = std::exp(total);
        for (int i = 0; i < n; ++i) {
            h(0, i + 1) = std::exp(total) * y[static_cast<std::size_t>(i)];
            h(i + 1, i + 1) = std::exp(-tv[static_cast<std::size_t>(i)]);
        }
        const auto direct = exterior_action(h, w);
        for (Mask m = 0; m < w.size(); ++m) {
            const double e = static_cast<double>(std::abs(closed[m] - direct[m]));
            worst = std::max(worst, e);
            mismatches += e > 1e-10;
        }
    }
    return {mismatches == 0, fmt("200 instances with n in 1..4, %d coefficient mismatches, max error %.1e",
                                 mismatches, worst)};
}

// ---------------------------------------------------------------------------
// 5. Marked points have long vectors only

Outcome criterion_marking() {
    MapInstance map;
    map.f = scenario_detail::veronese_curve(2);
    map.ball = Ball::interval(-0.5, 0.5);
    map.t = FlowVector({1.5, 1});
    const auto gc = good_constants_polynomial(2);
    map.C = gc.C;
    map.alpha = gc.alpha;
    const double rho = rho_for_map(map.f, map.ball).rho;
    const auto inst = map.as_marking(rho);
    std::mt19937_64 rng(5005);
    std::uniform_real_distribution<double> ux(-0.5, 0.5);
    std::string detail;
    bool pass = true;
    for (double fraction : {0.9, 0.5, 0.2}) {
        const double eps = fraction * rho;
        int marked = 0, boundary = 0, violations = 0;
        for (int i = 0; i < 10000; ++i) {
            const Point x{ux(rng)};
            const auto res = is_marked(inst, x, eps);
            if (res.status == MarkStatus::boundary)
                ++boundary;
            if (res.status != MarkStatus::marked)
                continue;
            ++marked;
            const RealMatrix g = inst.at(x);
            violations += box_minimum(g, certified_box(g)) < eps - 1e-9;
        }
        pass = pass && violations == 0 && boundary < 100;
        detail += fmt("%seps=%.3f: %d marked, %d violations, %d boundary", detail.empty() ? "" : "; ", eps, marked,
                      violations, boundary);
    }
    return {pass, "k=3, 10^4 points per eps; " + detail};
}

// ---------------------------------------------------------------------------
// Scenario runs

ExperimentConfig config_file(const std::string& name) {
    return load_config(std::string(LATFLOW_CONFIG_DIR) + "/" + name);
}

// ---------------------------------------------------------------------------
// 6. Inequality sweeps

Outcome criterion_sweeps() {
    const std::vector<std::pair<std::string, std::string>> runs{
        {"marking", "marking41.ini"},      {"marking", "marking41_k3.ini"},       {"general", "nondiv54.ini"},
        {"general", "nondiv54_veronese.ini"}, {"unipotent", "nondiv53.ini"},     {"unipotent", "nondiv53_k3.ini"},
        {"series", "prop23.ini"},          {"series", "prop23_line.ini"},
    };
    std::map<std::string, int> non_vacuous;
    int bad = 0, vacuous = 0, rows = 0;
    std::string problems;
    for (const auto& [family, file] : runs) {
        const auto res = run_experiment(config_file(file), resolve_workers(), false);
        if (res.exit_code != 0) {
            ++bad;
            problems += " " + file + " exit " + std::to_string(res.exit_code) + " " + res.message;
            continue;
        }
        for (const auto& r : res.records) {
            if (r.at("key") == "summary") {
                if (r.contains("hypotheses") && !r.at("hypotheses").at("applicable").get<bool>()) {
                    ++bad;
                    problems += " " + file + ": hypotheses fail";
                }
                continue;
            }
            if (!r.contains("bound"))
                continue; // marked-point checks carry no bound
            ++rows;
            const std::string status = r.at("status");
            if (status == "VACUOUS") {
                ++vacuous;
                continue;
            }
            ++non_vacuous[family];
            if (status != "PASS") {
                ++bad;
                problems += " " + file + ":" + r.at("key").get<std::string>() + "=" + status;
            }
        }
    }
    bool all_families = non_vacuous.size() == 4;
    std::string counts;
    for (const auto& [family, n] : non_vacuous)
        counts += fmt(" %s=%d", family.c_str(), n);
    return {bad == 0 && all_families,
            fmt("%d rows in %zu runs, %d vacuous, non-vacuous per family:%s%s", rows, runs.size(), vacuous,
                counts.c_str(), problems.empty() ? "" : (" | problems:" + problems).c_str())};
}

// ---------------------------------------------------------------------------
// 7. Exponents on the curve shrink; a Liouville truncation keeps a large one

Outcome criterion_extremality() {
    const auto curve = run_experiment(config_file("exponent_veronese.ini"), resolve_workers(), false);
    std::vector<double> tops, bottoms;
    for (const auto& r : curve.records)
        if (r.at("key").get<std::string>().rfind("point=", 0) == 0) {
            tops.push_back(r.at("top"));
            bottoms.push_back(r.at("bottom"));
        }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const auto n = v.size();
        return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
    };
    const bool enough = tops.size() == 50;
    const double top = enough ? median(tops) : NAN, bottom = enough ? median(bottoms) : NAN;

    const auto liouville = run_experiment(config_file("exponent_liouville.ini"), 1, false);
    double witness_eps = -1;
    for (const auto& r : liouville.records)
        if (r.contains("q") && r.at("q").size() == 1 && r.at("q")[0] == 1'000'000)
            witness_eps = r.at("measured");
    const bool pass = enough && top < bottom && witness_eps > 1;
    return {pass, fmt("%zu curve points, median top-shell exponent %.4f < median bottom-shell %.4f; "
                      "Liouville truncation exponent %.4f at q=10^6",
                      tops.size(), top, bottom, witness_eps)};
}

// ---------------------------------------------------------------------------
// 8. Byte-identical reruns

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome criterion_determinism() {
    const fs::path root = fs::temp_directory_path() / "latflow-acceptance";
    int differences = 0;
    std::string detail;
    for (const std::string file : {"delta_scan.ini", "nondiv54.ini", "marking41.ini"}) {
        std::vector<std::string> outputs;
        for (unsigned workers : {1u, 1u, 4u}) {
            auto cfg = config_file(file);
            const auto dir = root / (file + "-" + std::to_string(outputs.size()));
            fs::remove_all(dir);
            cfg.out = dir.string();
            const auto res = run_experiment(cfg, workers, true);
            outputs.push_back(slurp(res.jsonl_path) + "\n--\n" + slurp(res.csv_path));
        }
        const bool same = outputs[0] == outputs[1] && outputs[0] == outputs[2] && outputs[0].size() > 10;
        differences += !same;
        detail += fmt("%s%s %s (%zu bytes)", detail.empty() ? "" : "; ", file.c_str(), same ? "identical" : "DIFFERS",
                      outputs[0].size());
    }
    fs::remove_all(root);
    return {differences == 0, "two reruns plus a 4-worker run each: " + detail};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"delta oracle equivalence", criterion_delta},
        {"witness to flow end to end", criterion_witness},
        {"polynomial sublevel property suite", criterion_polynomials},
        {"closed-form coordinates of g_t u_f", criterion_closed_form},
        {"marked points have delta >= eps", criterion_marking},
        {"non-divergence inequality sweeps", criterion_sweeps},
        {"strong extremality demonstration", criterion_extremality},
        {"determinism", criterion_determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::printf("%s %zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
