#pragma once

// Marked points on the poset of primitive subgroups: the finite set H(x),
// the decision procedure for (eps, S, phi)-marked points, and the sampled
// checks of the unmarked-measure bound and of "marked implies delta >= eps".

#include "latflow/goodfun.hpp"
#include "latflow/lattice.hpp"
#include "latflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace latflow {

/// Data of a triple (S, phi, B) with S = primitive subgroups of Z^k and
/// psi_Gamma(x) = ||h(x) Gamma||.
struct MarkingInstance {
    using MatrixMap = std::function<RealMatrix(std::span<const double>)>;

    int k = 2;
    Ball ball;        // B
    MatrixMap h;      // x -> k x k real matrix
    double C = 1;
    double alpha = 1;
    double rho = 0.5;
    int besicovitch = 2; // N_d; only N_1 = 2 is known exactly

    int d() const { return ball.dimension(); }

    /// B~: same center, radius 3^k r.
    Ball enlarged_ball() const { return Ball(ball.center, ball.radius * std::pow(3.0, k), 0, ball.metric); }

    void validate() const {
        if (k < 0 || k > 5)
            throw std::invalid_argument("marking instance: k must lie in [0, 5]");
        if (!h && k > 0)
            throw std::invalid_argument("marking instance: missing matrix map");
        if (!(C > 0) || !(alpha > 0) || !(rho > 0))
            throw std::invalid_argument("marking instance: C, alpha and rho must be positive");
        if (k > 0 && rho > 1.0 / k + 1e-15)
            throw std::invalid_argument("marking instance: rho must not exceed 1/k");
        if (besicovitch < 1)
            throw std::invalid_argument("marking instance: N_d must be positive");
    }

    RealMatrix at(std::span<const double> x) const {
        if (k == 0)
            return RealMatrix(0, 0);
        RealMatrix m = h(x);
        if (m.rows() != k || m.cols() != k)
            throw std::invalid_argument("marking instance: h(x) must be k x k");
        return m;
    }
};

/// k C (3^d N_d)^k (eps/rho)^alpha, per unit |B|.
inline double marking_bound(int k, int d, double c, double alpha, double rho, double eps, int besicovitch) {
    return k * c * std::pow(std::pow(3.0, d) * besicovitch, k) * std::pow(eps / rho, alpha);
}

/// H(x) = { Gamma : psi_Gamma(x) < rho }, with the psi values.
inline std::vector<EnumeratedSubgroup> h_set(const MarkingInstance& inst, std::span<const double> x,
                                             const EnumerationOptions& opts = {}) {
    if (inst.k == 0)
        return {};
    auto all = enumerate_primitive_subgroups_with_norms(inst.k, inst.rho, inst.at(x), opts);
    std::vector<EnumeratedSubgroup> out;
    for (auto& e : all)
        if (e.norm < inst.rho)
            out.push_back(std::move(e));
    return out;
}

enum class MarkStatus { marked, unmarked, boundary };

inline const char* to_string(MarkStatus s) {
    switch (s) {
    case MarkStatus::marked:
        return "marked";
    case MarkStatus::unmarked:
        return "unmarked";
    case MarkStatus::boundary:
        return "boundary";
    }
    return "?";
}

using Chain = std::vector<PrimitiveSubgroup>;

struct MarkResult {
    MarkStatus status = MarkStatus::unmarked;
    Chain chain;                              // witness when marked
    std::vector<EnumeratedSubgroup> nearby;   // every Gamma with psi <= rho (+ slack)
};

inline constexpr double kMarkBoundaryTolerance = 1e-9;

namespace marking_detail {

// Elements of `h` outside `chain` comparable with every element of `chain`.
inline bool violates(const std::vector<const EnumeratedSubgroup*>& h, const std::vector<std::size_t>& chain_idx,
                     const std::vector<EnumeratedSubgroup>& cand) {
    for (const auto* s : h) {
        bool in_chain = false, comparable = true;
        for (auto i : chain_idx) {
            if (cand[i].subgroup == s->subgroup) {
                in_chain = true;
                break;
            }
            if (!cand[i].subgroup.comparable_with(s->subgroup)) {
                comparable = false;
                break;
            }
        }
        if (!in_chain && comparable)
            return true;
    }
    return false;
}

} // namespace marking_detail

/// Decides whether x is (eps, S, phi)-marked.
///
/// The outsider condition quantifies over all primitive subgroups, but a
/// subgroup violating it has psi < rho and so lies in the finite set H(x); the check against H(x)
/// is therefore exact. Extending a chain can only shrink its set of
/// comparable outsiders, so it suffices to test chains built greedily to
/// maximality; all chains are enumerated depth-first.
inline MarkResult is_marked(const MarkingInstance& inst, std::span<const double> x, double eps,
                            const EnumerationOptions& opts = {}) {
    if (!(eps > 0) || eps > inst.rho)
        throw std::invalid_argument("is_marked: need 0 < eps <= rho");
    MarkResult res;
    if (inst.k == 0) {
        res.status = MarkStatus::marked;
        return res;
    }
    const double cap = inst.rho * (1 + kMarkBoundaryTolerance) + kMarkBoundaryTolerance;
    res.nearby = enumerate_primitive_subgroups_with_norms(inst.k, cap, inst.at(x), opts);
    for (const auto& e : res.nearby) {
        const double psi = static_cast<double>(e.norm);
        if (std::abs(psi - eps) <= kMarkBoundaryTolerance || std::abs(psi - inst.rho) <= kMarkBoundaryTolerance) {
            res.status = MarkStatus::boundary;
            return res;
        }
    }
    std::vector<const EnumeratedSubgroup*> h;
    std::vector<EnumeratedSubgroup> cand;
    for (const auto& e : res.nearby) {
        if (e.norm < inst.rho)
            h.push_back(&e);
        if (e.norm >= eps && e.norm <= inst.rho)
            cand.push_back(e);
    }
    if (h.empty()) {
        res.status = MarkStatus::marked;
        return res;
    }
    // Candidates sorted by rank so that chains grow upward.
    std::stable_sort(cand.begin(), cand.end(),
                     [](const EnumeratedSubgroup& a, const EnumeratedSubgroup& b) { return a.subgroup < b.subgroup; });

    std::vector<std::size_t> chain;
    std::function<bool(std::size_t)> dfs = [&](std::size_t start) -> bool {
        for (std::size_t i = start; i < cand.size(); ++i) {
            if (!chain.empty()) {
                const auto& top = cand[chain.back()].subgroup;
                if (cand[i].subgroup.rank() <= top.rank() || !top.is_subgroup_of(cand[i].subgroup))
                    continue;
            }
            chain.push_back(i);
            if (dfs(i + 1))
                return true;
            chain.pop_back();
        }
        return !marking_detail::violates(h, chain, cand);
    };
    if (dfs(0)) {
        res.status = MarkStatus::marked;
        for (auto i : chain)
            res.chain.push_back(cand[i].subgroup);
    } else {
        res.status = MarkStatus::unmarked;
    }
    return res;
}

/// Independent re-check of the norm window and the outsider condition for a
/// chain against h_set output.
inline bool verify_chain(const MarkingInstance& inst, std::span<const double> x, double eps, const Chain& chain) {
    if (static_cast<int>(chain.size()) > inst.k)
        return false;
    for (std::size_t i = 1; i < chain.size(); ++i)
        if (!(chain[i - 1].is_subgroup_of(chain[i]) && chain[i - 1].rank() < chain[i].rank()))
            return false;
    const RealMatrix hx = inst.at(x);
    for (const auto& g : chain) {
        const double psi = static_cast<double>(g.norm_under(hx));
        if (psi < eps || psi > inst.rho)
            return false;
    }
    for (const auto& s : h_set(inst, x)) {
        if (std::find(chain.begin(), chain.end(), s.subgroup) != chain.end())
            continue;
        const bool comparable_all = std::all_of(chain.begin(), chain.end(), [&](const PrimitiveSubgroup& g) {
            return g.comparable_with(s.subgroup);
        });
        if (comparable_all)
            return false;
    }
    return true;
}

inline Point sample_in_ball(const Ball& b, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    Point x(b.center.size());
    while (true) {
        double r2 = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double v = u(rng);
            x[i] = v;
            r2 += v * v;
        }
        if (b.metric == BallMetric::sup || x.size() == 1 || r2 < 1)
            break;
    }
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = b.center[i] + b.radius * x[i];
    return x;
}

struct HypothesisCheck {
    bool applicable = true;
    int subgroups_checked = 0;
    std::string note;
};

/// Spot-checks goodness of psi_Gamma on the enlarged ball and
/// ||psi_Gamma||_B >= rho on the given subgroups.
inline HypothesisCheck check_hypotheses(const MarkingInstance& inst, const std::vector<PrimitiveSubgroup>& sample,
                                        int grid_n = 2000) {
    HypothesisCheck out;
    const Ball big = inst.enlarged_ball();
    const auto fr = log_grid(1e-4, 1, 10);
    for (const auto& g : sample) {
        const auto psi = ScalarField::black_box(inst.d(), [&inst, g](std::span<const double> x) {
            return static_cast<double>(g.norm_under(inst.at(x)));
        });
        const int grid = inst.d() == 1 ? grid_n : 200;
        const double sup_big = sup_norm_on_ball(psi, big, std::max(grid, 256)).value;
        std::vector<double> eps;
        for (double f : fr)
            eps.push_back(f * sup_big);
        ++out.subgroups_checked;
        if (!check_good_on_ball(psi, big, inst.C, inst.alpha, eps, grid).passed) {
            out.applicable = false;
            out.note = "psi not (C, alpha)-good on the enlarged ball for " + g.to_string();
            return out;
        }
        const double sup_b = sup_norm_on_ball(psi, inst.ball, std::max(grid, 256)).value;
        if (sup_b < inst.rho * (1 - 1e-9)) {
            out.applicable = false;
            out.note = "sup over B of psi below rho for " + g.to_string();
            return out;
        }
    }
    return out;
}

struct UnmarkedExperiment {
    MeasureRow row;
    HypothesisCheck hypotheses;
    std::uint64_t marked = 0, unmarked = 0, boundary = 0;
};

/// Subgroups for hypothesis spot checks: coordinate subgroups plus the
/// H(x)-members seen at a few sampled points.
inline std::vector<PrimitiveSubgroup> hypothesis_sample(const MarkingInstance& inst, std::uint64_t seed,
                                                        int points = 8) {
    std::set<PrimitiveSubgroup> s;
    for (int j = 1; j < inst.k; ++j) {
        IntMatrix rows = IntMatrix::Zero(j, inst.k);
        for (int i = 0; i < j; ++i)
            rows(i, i) = 1;
        s.insert(PrimitiveSubgroup::from_basis(rows));
    }
    for (int i = 0; i < points && inst.k > 0; ++i) {
        auto rng = stream_rng(seed ^ 0xa5a5a5a5ULL, static_cast<std::uint64_t>(i));
        for (auto& e : h_set(inst, sample_in_ball(inst.ball, rng)))
            s.insert(e.subgroup);
    }
    std::vector<PrimitiveSubgroup> out(s.begin(), s.end());
    if (out.size() > 12)
        out.erase(out.begin() + 12, out.end());
    return out;
}

/// Monte-Carlo estimate of |B \ marked| / |B| with a 99% Clopper-Pearson
/// interval, compared to k C (3^d N_d)^k (eps/rho)^alpha. Boundary points
/// count as unmarked.
inline UnmarkedExperiment unmarked_measure_experiment(const MarkingInstance& inst, double eps, std::uint64_t samples,
                                                      std::uint64_t seed, unsigned workers = 1,
                                                      bool check_hyp = true) {
    inst.validate();
    if (samples == 0)
        throw std::invalid_argument("unmarked_measure_experiment: need samples");
    UnmarkedExperiment out;
    if (check_hyp && inst.k > 0)
        out.hypotheses = check_hypotheses(inst, hypothesis_sample(inst, seed));
    const auto status = parallel_map<MarkStatus>(samples, workers, [&](std::size_t i) {
        auto rng = stream_rng(seed, i);
        return is_marked(inst, sample_in_ball(inst.ball, rng), eps).status;
    });
    for (auto s : status) {
        out.marked += s == MarkStatus::marked;
        out.unmarked += s == MarkStatus::unmarked;
        out.boundary += s == MarkStatus::boundary;
    }
    const double bound = marking_bound(inst.k, inst.d(), inst.C, inst.alpha, inst.rho, eps, inst.besicovitch);
    out.row = measure_row(eps, out.unmarked + out.boundary, samples, bound);
    out.row.boundary = out.boundary;
    if (!out.hypotheses.applicable)
        out.row.status = RowStatus::inapplicable;
    return out;
}

struct DeltaCheckReport {
    std::uint64_t samples = 0;
    std::uint64_t marked = 0, unmarked = 0, boundary = 0;
    std::uint64_t violations = 0;            // marked with delta < eps - 1e-9
    std::uint64_t small_delta = 0;           // points with delta < eps
    std::uint64_t small_delta_marked = 0;    // contrapositive failures
    std::optional<Point> first_violation;
    double min_marked_delta = std::numeric_limits<double>::infinity();
};

/// Every sampled point classified marked must have delta(h(x) Z^k) >= eps.
inline DeltaCheckReport marked_implies_delta_check(const MarkingInstance& inst, double eps, std::uint64_t samples,
                                                   std::uint64_t seed, unsigned workers = 1) {
    inst.validate();
    struct Item {
        Point x;
        MarkStatus status;
        double delta;
    };
    const auto items = parallel_map<Item>(samples, workers, [&](std::size_t i) {
        auto rng = stream_rng(seed, i);
        Point x = sample_in_ball(inst.ball, rng);
        const auto st = is_marked(inst, x, eps).status;
        const double d = inst.k == 0 ? std::numeric_limits<double>::infinity()
                                     : static_cast<double>(delta(Lattice(inst.at(x))).value);
        return Item{std::move(x), st, d};
    });
    DeltaCheckReport rep;
    rep.samples = samples;
    for (const auto& it : items) {
        rep.marked += it.status == MarkStatus::marked;
        rep.unmarked += it.status == MarkStatus::unmarked;
        rep.boundary += it.status == MarkStatus::boundary;
        if (it.status == MarkStatus::marked) {
            rep.min_marked_delta = std::min(rep.min_marked_delta, it.delta);
            if (it.delta < eps - 1e-9) {
                ++rep.violations;
                if (!rep.first_violation)
                    rep.first_violation = it.x;
            }
        }
        if (it.delta < eps) {
            ++rep.small_delta;
            rep.small_delta_marked += it.status == MarkStatus::marked;
        }
    }
    return rep;
}

} // namespace latflow
