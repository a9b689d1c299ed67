#pragma once

// Diophantine front end: products Pi and Pi_+, exponent scans for linear
// forms (dual, simultaneous and matrix, standard and multiplicative), the
// witness-to-flow correspondence, excursion scans and solution counting.

#include "latflow/lattice.hpp"
#include "latflow/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace latflow {

using Int128 = __int128;

inline Real pi(std::span<const Real> x) {
    Real p = 1;
    for (Real v : x)
        p *= std::abs(v);
    return p;
}

/// Product of |x_i|_+ = max(|x_i|, 1).
inline Real pi_plus(std::span<const Real> x) {
    Real p = 1;
    for (Real v : x)
        p *= std::max<Real>(std::abs(v), 1);
    return p;
}

inline Real pi_plus(std::span<const std::int64_t> q) {
    Real p = 1;
    for (auto v : q)
        p *= std::max<Real>(static_cast<Real>(v < 0 ? -v : v), 1);
    return p;
}

inline std::vector<Real> veronese(Real x, int n) {
    if (n < 0)
        throw std::invalid_argument("veronese: n must be nonnegative");
    std::vector<Real> out(static_cast<std::size_t>(n));
    Real p = 1;
    for (auto& v : out) {
        p *= x;
        v = p;
    }
    return out;
}

/// gamma = eps / (n + 1 + n eps).
inline Real flow_rate(Real eps, int n) { return eps / (n + 1 + n * eps); }

// ---------------------------------------------------------------------------
// Targets

/// Real number, optionally carrying an exact rational value num/den.
struct TargetEntry {
    Real value = 0;
    std::optional<std::pair<Int128, Int128>> exact; // den > 0

    static TargetEntry real(Real v) { return {v, std::nullopt}; }
    static TargetEntry rational(Int128 num, Int128 den) {
        if (den == 0)
            throw std::invalid_argument("rational target with zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        return {static_cast<Real>(num) / static_cast<Real>(den), std::make_pair(num, den)};
    }
};

namespace dioph_detail {

inline Int128 gcd128(Int128 a, Int128 b) {
    if (a < 0)
        a = -a;
    if (b < 0)
        b = -b;
    while (b != 0) {
        const Int128 r = a % b;
        a = b;
        b = r;
    }
    return a;
}

inline Int128 parse_int128(const std::string& s) {
    if (s.empty())
        throw std::invalid_argument("empty integer literal");
    std::size_t i = 0;
    bool neg = false;
    if (s[0] == '-' || s[0] == '+') {
        neg = s[0] == '-';
        i = 1;
    }
    if (i == s.size())
        throw std::invalid_argument("bad integer literal '" + s + "'");
    Int128 v = 0;
    for (; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9')
            throw std::invalid_argument("bad integer literal '" + s + "'");
        if (v > (std::numeric_limits<Int128>::max() - 9) / 10)
            throw std::invalid_argument("integer literal too large '" + s + "'");
        v = v * 10 + (s[i] - '0');
    }
    return neg ? -v : v;
}

inline Int128 pow10_128(int e) {
    Int128 v = 1;
    for (int i = 0; i < e; ++i)
        v *= 10;
    return v;
}

} // namespace dioph_detail

inline constexpr const char* kLiouville4 = "110001000000000000000001/1000000000000000000000000";

/// Parses a decimal literal, a rational "a/b", or one of the named constants
/// sqrt2, golden, liouville4 (the sum of 10^{-j!} for j <= 4, exactly).
inline TargetEntry parse_target(const std::string& text) {
    if (text == "sqrt2")
        return TargetEntry::real(std::sqrt(2.0L));
    if (text == "golden")
        return TargetEntry::real((1 + std::sqrt(5.0L)) / 2);
    if (text == "liouville4")
        return parse_target(kLiouville4);
    if (auto slash = text.find('/'); slash != std::string::npos) {
        const Int128 num = dioph_detail::parse_int128(text.substr(0, slash));
        const Int128 den = dioph_detail::parse_int128(text.substr(slash + 1));
        return TargetEntry::rational(num, den);
    }
    // Finite decimals are kept exact when they fit.
    const auto dot = text.find('.');
    const bool plain = text.find_first_not_of("+-0123456789.") == std::string::npos &&
                       text.find_first_of("0123456789") != std::string::npos;
    if (plain && text.size() < 30) {
        std::string digits = text;
        int scale = 0;
        if (dot != std::string::npos) {
            scale = static_cast<int>(text.size() - dot - 1);
            digits.erase(dot, 1);
        }
        return TargetEntry::rational(dioph_detail::parse_int128(digits), dioph_detail::pow10_128(scale));
    }
    std::size_t used = 0;
    const long double v = std::stold(text, &used);
    if (used != text.size() || !std::isfinite(static_cast<double>(v)))
        throw std::invalid_argument("bad target literal '" + text + "'");
    return TargetEntry::real(v);
}

/// m x n matrix of targets: m linear forms in q in Z^n.
struct TargetMatrix {
    int m = 0, n = 0;
    std::vector<TargetEntry> entries; // row-major

    const TargetEntry& at(int i, int j) const { return entries[static_cast<std::size_t>(i * n + j)]; }

    /// One linear form q.y + p.
    static TargetMatrix dual(std::vector<TargetEntry> y) {
        const int n = static_cast<int>(y.size());
        return {1, n, std::move(y)};
    }
    /// The forms q y_i + p_i for scalar q.
    static TargetMatrix simultaneous(std::vector<TargetEntry> y) {
        const int m = static_cast<int>(y.size());
        return {m, 1, std::move(y)};
    }
    static TargetMatrix from_reals(std::span<const Real> y, bool as_dual) {
        std::vector<TargetEntry> e;
        for (Real v : y)
            e.push_back(TargetEntry::real(v));
        return as_dual ? dual(std::move(e)) : simultaneous(std::move(e));
    }
};

// ---------------------------------------------------------------------------
// Exponent scans

struct ScanSpec {
    TargetMatrix y;
    std::int64_t bound = 0;      // search box ||q||_inf <= bound
    bool multiplicative = false; // heights Pi_+(q) and products Pi instead of norms
};

/// Best approximation found in the height shell [2^s, 2^{s+1}).
struct ShellRecord {
    int shell = 0;
    Real lower = 0, upper = 0;
    bool complete = false; // every q with height below `upper` lies in the box
    bool found = false;
    bool exact_hit = false; // some form vanishes: exponent is infinite
    double eps = -std::numeric_limits<double>::infinity();
    std::vector<std::int64_t> q;
    std::vector<std::int64_t> p;
    Real height = 0;
};

struct ExponentScan {
    ScanSpec spec;
    std::vector<ShellRecord> shells;
    std::int64_t points = 0;
};

/// Box limits per number of q-variables.
inline std::int64_t scan_bound_limit(int variables) {
    switch (variables) {
    case 1:
        return 1'000'000;
    case 2:
        return 1'000;
    case 3:
        return 100;
    default:
        return 20;
    }
}

inline constexpr Real kMaxFloatHeight = 1e12L;

namespace dioph_detail {

struct PreparedRow {
    bool exact = false;
    Int128 lcm = 1;
    std::vector<Int128> coeff; // exact row times lcm
    std::vector<Real> value;
};

inline std::vector<PreparedRow> prepare(const TargetMatrix& y) {
    std::vector<PreparedRow> rows(static_cast<std::size_t>(y.m));
    for (int i = 0; i < y.m; ++i) {
        auto& row = rows[static_cast<std::size_t>(i)];
        row.exact = true;
        for (int j = 0; j < y.n; ++j) {
            row.value.push_back(y.at(i, j).value);
            row.exact = row.exact && y.at(i, j).exact.has_value();
        }
        if (!row.exact)
            continue;
        for (int j = 0; j < y.n; ++j) {
            const Int128 den = y.at(i, j).exact->second;
            row.lcm = row.lcm / gcd128(row.lcm, den) * den;
            if (row.lcm > Int128(1) << 90)
                throw std::invalid_argument("rational targets: common denominator too large");
        }
        for (int j = 0; j < y.n; ++j) {
            const auto& [num, den] = *y.at(i, j).exact;
            row.coeff.push_back(num * (row.lcm / den));
        }
    }
    return rows;
}

// |q . row + p| for the optimal integer p; returns the residual and p.
inline std::pair<Real, std::int64_t> residual(const PreparedRow& row, std::span<const std::int64_t> q) {
    if (row.exact) {
        Int128 num = 0;
        for (std::size_t j = 0; j < q.size(); ++j)
            num += row.coeff[j] * q[j];
        // nearest multiple of lcm: num = k * lcm + rem with |rem| <= lcm / 2
        Int128 k = num / row.lcm;
        Int128 rem = num - k * row.lcm;
        if (2 * rem > row.lcm) {
            rem -= row.lcm;
            ++k;
        } else if (2 * rem < -row.lcm) {
            rem += row.lcm;
            --k;
        }
        const Real r = static_cast<Real>(rem < 0 ? -rem : rem) / static_cast<Real>(row.lcm);
        return {r, static_cast<std::int64_t>(-k)};
    }
    Real s = 0;
    for (std::size_t j = 0; j < q.size(); ++j)
        s += row.value[j] * static_cast<Real>(q[j]);
    const Real k = std::nearbyint(s);
    return {std::abs(s - k), static_cast<std::int64_t>(-k)};
}

} // namespace dioph_detail

struct ApproximationQuality {
    bool exact_hit = false;
    double eps = 0;    // exponent at equality in the defining inequality
    Real height = 0;   // ||q|| or Pi_+(q)
    std::vector<std::int64_t> p;
    std::vector<Real> residuals;
};

/// Exponent of a single q (p chosen optimally). Heights of 1 make the
/// exponent undefined; the caller must skip them.
inline ApproximationQuality approximation_quality(const TargetMatrix& y, std::span<const std::int64_t> q,
                                                  bool multiplicative) {
    const auto rows = dioph_detail::prepare(y);
    ApproximationQuality out;
    Real hmax = 0;
    for (auto v : q)
        hmax = std::max<Real>(hmax, static_cast<Real>(v < 0 ? -v : v));
    out.height = multiplicative ? pi_plus(q) : hmax;
    Real log_prod = 0;
    for (const auto& row : rows) {
        const auto [r, p] = dioph_detail::residual(row, q);
        out.p.push_back(p);
        out.residuals.push_back(r);
        if (r == 0)
            out.exact_hit = true;
        else
            log_prod += std::log(r);
    }
    if (out.exact_hit) {
        out.eps = std::numeric_limits<double>::infinity();
        return out;
    }
    const Real logh = std::log(out.height);
    if (multiplicative) {
        // Pi(res) * H <= H^{-eps}
        out.eps = static_cast<double>(-(log_prod + logh) / logh);
    } else {
        // ||res||^m ||q||^n <= ||q||^{-n eps}
        Real rmax = 0;
        for (Real r : out.residuals)
            rmax = std::max(rmax, r);
        out.eps = static_cast<double>(-(y.m * std::log(rmax) + y.n * logh) / (y.n * logh));
    }
    return out;
}

/// Exhaustive scan of q in the box (up to sign), keeping the largest exponent
/// per dyadic height shell; ties go to the lexicographically smallest q.
inline ExponentScan best_exponent(const ScanSpec& spec) {
    const int n = spec.y.n, m = spec.y.m;
    if (n < 1 || m < 1 || static_cast<int>(spec.y.entries.size()) != m * n)
        throw std::invalid_argument("best_exponent: malformed target matrix");
    if (spec.bound < 2)
        throw std::invalid_argument("best_exponent: search bound must be at least 2");
    if (spec.bound > scan_bound_limit(n))
        throw BudgetExceeded("best_exponent: bound " + std::to_string(spec.bound) + " exceeds the limit " +
                             std::to_string(scan_bound_limit(n)) + " for " + std::to_string(n) + " variables");
    const auto rows = dioph_detail::prepare(spec.y);
    const bool all_exact = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.exact; });
    const Real max_height = spec.multiplicative ? std::pow(static_cast<Real>(spec.bound), n)
                                                : static_cast<Real>(spec.bound);
    if (!all_exact && max_height > kMaxFloatHeight)
        throw std::invalid_argument("best_exponent: heights beyond 1e12 are dominated by float error");

    ExponentScan scan;
    scan.spec = spec;
    const int top = static_cast<int>(std::floor(std::log2(static_cast<double>(max_height)))) + 1;
    for (int s = 1; s <= top; ++s) {
        ShellRecord rec;
        rec.shell = s;
        rec.lower = std::ldexp(1.0L, s);
        rec.upper = std::ldexp(1.0L, s + 1);
        rec.complete = rec.upper - 1 <= static_cast<Real>(spec.bound);
        scan.shells.push_back(rec);
    }

    std::vector<std::int64_t> q(static_cast<std::size_t>(n), -spec.bound);
    std::vector<std::int64_t> p(static_cast<std::size_t>(m));
    std::vector<Real> res(static_cast<std::size_t>(m));
    while (true) {
        // sign normalization: first nonzero coordinate positive
        std::size_t lead = 0;
        while (lead < q.size() && q[lead] == 0)
            ++lead;
        if (lead < q.size() && q[lead] > 0) {
            Real height = 1, hmax = 0;
            for (auto v : q) {
                const Real a = static_cast<Real>(v < 0 ? -v : v);
                hmax = std::max(hmax, a);
                if (spec.multiplicative)
                    height *= std::max<Real>(a, 1);
            }
            if (!spec.multiplicative)
                height = hmax;
            if (height >= 2) {
                ++scan.points;
                bool hit = false;
                Real log_prod = 0, rmax = 0;
                for (int i = 0; i < m; ++i) {
                    const auto [r, pi_] = dioph_detail::residual(rows[static_cast<std::size_t>(i)], q);
                    p[static_cast<std::size_t>(i)] = pi_;
                    res[static_cast<std::size_t>(i)] = r;
                    if (r == 0)
                        hit = true;
                    else
                        log_prod += std::log(static_cast<double>(r));
                    rmax = std::max(rmax, r);
                }
                double eps;
                const double logh = std::log(static_cast<double>(height));
                if (hit)
                    eps = std::numeric_limits<double>::infinity();
                else if (spec.multiplicative)
                    eps = -(static_cast<double>(log_prod) + logh) / logh;
                else
                    eps = -(m * std::log(static_cast<double>(rmax)) + n * logh) / (n * logh);
                const int s = static_cast<int>(std::floor(std::log2(static_cast<double>(height))));
                auto& rec = scan.shells[static_cast<std::size_t>(s - 1)];
                if (!rec.found || eps > rec.eps) {
                    rec.found = true;
                    rec.eps = eps;
                    rec.exact_hit = hit;
                    rec.q = q;
                    rec.p = p;
                    rec.height = height;
                }
            }
        }
        // odometer, last coordinate fastest
        int pos = n - 1;
        while (pos >= 0 && q[static_cast<std::size_t>(pos)] == spec.bound) {
            q[static_cast<std::size_t>(pos)] = -spec.bound;
            --pos;
        }
        if (pos < 0)
            break;
        ++q[static_cast<std::size_t>(pos)];
    }
    return scan;
}

// ---------------------------------------------------------------------------
// Witness to flow

enum class WitnessStatus { accepted, negative_exponent, exact_hit, trivial_height };

inline const char* to_string(WitnessStatus s) {
    switch (s) {
    case WitnessStatus::accepted:
        return "accepted";
    case WitnessStatus::negative_exponent:
        return "rejected: negative exponent";
    case WitnessStatus::exact_hit:
        return "rejected: exact hit";
    case WitnessStatus::trivial_height:
        return "rejected: Pi_+(q) = 1";
    }
    return "?";
}

struct Witness {
    WitnessStatus status = WitnessStatus::accepted;
    std::string diagnostic;
    std::vector<Real> y;
    std::int64_t p = 0;
    std::vector<std::int64_t> q;
    Real eps = 0;
    Real r = 0;
    FlowVector t;
    Real gamma = 0;
    // checks
    Real delta = 0;             // delta(g_t Lambda_y)
    bool delta_ok = false;      // delta <= r + 1e-9
    bool ineq_a_ok = false;     // e^t |q.y + p| <= r
    bool ineq_b_ok = false;     // e^{-t_i} |q_i| <= r
    Real identity_error = 0;    // |Pi_+(q) - r^n e^t| / Pi_+(q)
    Real gamma_error = 0;       // |r - e^{-gamma t}|

    bool accepted() const { return status == WitnessStatus::accepted; }
    bool all_checks_pass() const {
        return accepted() && delta_ok && ineq_a_ok && ineq_b_ok && identity_error <= 1e-12L && gamma_error <= 1e-12L;
    }
};

inline constexpr Real kWitnessTolerance = 1e-9L;

/// Turns an approximation (p, q) of y into the flow time t with
/// delta(g_t Lambda_y) <= r and checks every step of the chain.
inline Witness witness_to_flow(std::span<const Real> y, std::int64_t p, std::span<const std::int64_t> q) {
    const int n = static_cast<int>(y.size());
    if (n < 1 || static_cast<int>(q.size()) != n)
        throw std::invalid_argument("witness_to_flow: y and q must have the same positive length");
    if (std::all_of(q.begin(), q.end(), [](auto v) { return v == 0; }))
        throw std::invalid_argument("witness_to_flow: q must be nonzero");
    Witness w;
    w.y.assign(y.begin(), y.end());
    w.p = p;
    w.q.assign(q.begin(), q.end());

    // q.y + p is the first coordinate of the point (p, q) of Lambda_y, which
    // the lattice evaluates without cancellation error.
    IntVector m(n + 1);
    m(0) = p;
    for (int i = 0; i < n; ++i)
        m(i + 1) = q[static_cast<std::size_t>(i)];
    const Real resid = std::abs(make_lambda_y(y).point(m)(0));
    const Real height = pi_plus(q);
    if (resid == 0) {
        w.status = WitnessStatus::exact_hit;
        w.diagnostic = "q.y + p = 0: the exponent is infinite and log r undefined";
        return w;
    }
    if (height == 1) {
        w.status = WitnessStatus::trivial_height;
        w.diagnostic = "Pi_+(q) = 1: the exponent is undefined";
        return w;
    }
    w.eps = -std::log(resid * height) / std::log(height);
    if (w.eps < 0) {
        w.status = WitnessStatus::negative_exponent;
        w.diagnostic = "|q.y + p| Pi_+(q) = " + std::to_string(static_cast<double>(resid * height)) +
                       " > 1: not an approximation of quality 1 (eps = " + std::to_string(static_cast<double>(w.eps)) +
                       ")";
        return w;
    }
    w.r = std::pow(height, -w.eps / (n + 1));
    std::vector<Real> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto qi = q[static_cast<std::size_t>(i)];
        const Real qplus = std::max<Real>(static_cast<Real>(qi < 0 ? -qi : qi), 1);
        t[static_cast<std::size_t>(i)] = std::max<Real>(0, std::log(qplus / w.r));
    }
    w.t = FlowVector(t);
    w.gamma = flow_rate(w.eps, n);

    const Real total = w.t.total();
    w.ineq_a_ok = std::exp(total) * resid <= w.r * (1 + kWitnessTolerance);
    w.ineq_b_ok = true;
    for (int i = 0; i < n; ++i) {
        const auto qi = q[static_cast<std::size_t>(i)];
        w.ineq_b_ok = w.ineq_b_ok &&
                      std::exp(-t[static_cast<std::size_t>(i)]) * static_cast<Real>(qi < 0 ? -qi : qi) <=
                          w.r * (1 + kWitnessTolerance);
    }
    w.identity_error = std::abs(height - std::pow(w.r, n) * std::exp(total)) / height;
    w.gamma_error = std::abs(w.r - std::exp(-w.gamma * total));
    w.delta = delta(apply_flow(make_lambda_y(y), w.t)).value;
    w.delta_ok = w.delta <= w.r + kWitnessTolerance;
    return w;
}

struct RoundedWitness {
    FlowVector t;          // componentwise floor
    Real delta = 0;        // delta(g_[t] Lambda_y)
    Real factor = 0;       // delta / r
    Real allowed = 0;      // e^n
    bool ok = false;
};

/// Floors the flow times; the distortion is at most ||g_{t - [t]}|| <= e^n.
inline RoundedWitness round_flow_times(const Witness& w) {
    if (!w.accepted())
        throw std::invalid_argument("round_flow_times: witness was rejected");
    RoundedWitness out;
    out.t = w.t.floor();
    out.delta = delta(apply_flow(make_lambda_y(w.y), out.t)).value;
    out.factor = out.delta / w.r;
    out.allowed = std::exp(static_cast<Real>(w.y.size()));
    out.ok = out.delta <= out.allowed * w.r * (1 + kWitnessTolerance);
    return out;
}

// ---------------------------------------------------------------------------
// Excursions and counting

struct Excursion {
    std::vector<int> t;
    Real delta;
    Real threshold; // e^{-gamma t}
};

/// Integer t >= 0 with 1 <= sum t_i <= t_max and delta(g_t Lambda_y) <= e^{-gamma t}.
/// (t = 0 always qualifies since delta of a unimodular lattice is at most 1.)
/// t_max is limited to 27 so that e^t stays below the float-height limit.
inline std::vector<Excursion> excursion_scan(std::span<const Real> y, Real gamma, int t_max) {
    if (!(gamma > 0))
        throw std::invalid_argument("excursion_scan: gamma must be positive");
    if (t_max < 0)
        throw std::invalid_argument("excursion_scan: t_max must be nonnegative");
    if (std::exp(static_cast<Real>(t_max)) > kMaxFloatHeight)
        throw std::invalid_argument("excursion_scan: e^t_max beyond 1e12 is dominated by float error in y");
    const int n = static_cast<int>(y.size());
    const Lattice base = make_lambda_y(y);
    std::vector<Excursion> out;
    std::vector<int> t(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int pos, int left) {
        if (pos == n) {
            const int total = t_max - left;
            if (total == 0)
                return;
            std::vector<Real> tr(t.begin(), t.end());
            const Real d = delta(apply_flow(base, FlowVector(tr))).value;
            const Real thr = std::exp(-gamma * total);
            if (d <= thr * (1 + 1e-12L))
                out.push_back({t, d, thr});
            return;
        }
        for (int v = 0; v <= left; ++v) {
            t[static_cast<std::size_t>(pos)] = v;
            rec(pos + 1, left - v);
        }
        t[static_cast<std::size_t>(pos)] = 0;
    };
    rec(0, t_max);
    std::sort(out.begin(), out.end(), [](const Excursion& a, const Excursion& b) { return a.t < b.t; });
    return out;
}

struct KhintchineCount {
    std::int64_t solutions = 0;  // pairs (q, p)
    std::int64_t distinct_q = 0; // q with at least one p
};

/// Solutions (q, p), 0 < ||q||_inf <= Q, of |q.y + p| ||q||^n <= psi(||q||^n).
inline KhintchineCount khintchine_count(std::span<const Real> y, const std::function<Real(std::int64_t)>& psi,
                                        std::int64_t bound) {
    const int n = static_cast<int>(y.size());
    if (n < 1)
        throw std::invalid_argument("khintchine_count: empty target");
    if (bound < 1 || bound > scan_bound_limit(n))
        throw BudgetExceeded("khintchine_count: bound outside the supported range for " + std::to_string(n) +
                             " variables");
    KhintchineCount out;
    std::vector<std::int64_t> q(static_cast<std::size_t>(n), -bound);
    while (true) {
        std::int64_t norm = 0;
        for (auto v : q)
            norm = std::max<std::int64_t>(norm, v < 0 ? -v : v);
        if (norm > 0) {
            std::int64_t hn = 1;
            for (int i = 0; i < n; ++i)
                hn *= norm;
            const Real allowed = psi(hn) / static_cast<Real>(hn);
            if (allowed >= 0) {
                Real s = 0;
                for (int i = 0; i < n; ++i)
                    s += static_cast<Real>(q[static_cast<std::size_t>(i)]) * y[static_cast<std::size_t>(i)];
                // integers p with |s + p| <= allowed
                const Real lo = std::ceil(-s - allowed), hi = std::floor(-s + allowed);
                if (hi >= lo) {
                    out.solutions += static_cast<std::int64_t>(hi - lo) + 1;
                    ++out.distinct_q;
                }
            }
        }
        int pos = n - 1;
        while (pos >= 0 && q[static_cast<std::size_t>(pos)] == bound) {
            q[static_cast<std::size_t>(pos)] = -bound;
            --pos;
        }
        if (pos < 0)
            break;
        ++q[static_cast<std::size_t>(pos)];
    }
    return out;
}

/// Table form: psi_table[h - 1] = psi(h) for h = 1 .. Q^n.
inline KhintchineCount khintchine_count(std::span<const Real> y, std::span<const Real> psi_table,
                                        std::int64_t bound) {
    std::int64_t need = 1;
    for (std::size_t i = 0; i < y.size(); ++i)
        need *= bound;
    if (static_cast<std::int64_t>(psi_table.size()) < need)
        throw std::invalid_argument("khintchine_count: psi table does not cover the range 1..Q^n");
    return khintchine_count(y, [psi_table](std::int64_t h) { return psi_table[static_cast<std::size_t>(h - 1)]; },
                            bound);
}

} // namespace latflow
