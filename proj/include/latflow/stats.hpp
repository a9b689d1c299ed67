#pragma once

// Seeded randomness, binomial confidence intervals and a deterministic
// parallel map.

#include <boost/math/distributions/beta.hpp>

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace latflow {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream for item `index` of a run seeded with `seed`; the value
/// drawn for an item never depends on how work is split across threads.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

struct Interval {
    double lower;
    double upper;
};

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion.
inline Interval clopper_pearson(std::uint64_t successes, std::uint64_t trials, double confidence = 0.99) {
    if (trials == 0)
        throw std::invalid_argument("clopper_pearson: no trials");
    if (successes > trials)
        throw std::invalid_argument("clopper_pearson: successes exceed trials");
    if (!(confidence > 0 && confidence < 1))
        throw std::invalid_argument("clopper_pearson: confidence must lie in (0, 1)");
    const double a = (1 - confidence) / 2;
    const double x = static_cast<double>(successes), n = static_cast<double>(trials);
    const double lo = successes == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<>(x, n - x + 1), a);
    const double hi =
        successes == trials ? 1.0 : boost::math::quantile(boost::math::beta_distribution<>(x + 1, n - x), 1 - a);
    return {lo, hi};
}

enum class RowStatus { pass, fail, vacuous, boundary, no_events, inapplicable };

inline const char* to_string(RowStatus s) {
    switch (s) {
    case RowStatus::pass:
        return "PASS";
    case RowStatus::fail:
        return "FAIL";
    case RowStatus::vacuous:
        return "VACUOUS";
    case RowStatus::boundary:
        return "BOUNDARY";
    case RowStatus::no_events:
        return "NO-EVENTS";
    case RowStatus::inapplicable:
        return "INAPPLICABLE";
    }
    return "?";
}

/// One measured proportion compared against an upper bound.
struct MeasureRow {
    double param = 0; // eps or t
    std::uint64_t events = 0;
    std::uint64_t samples = 0;
    std::uint64_t boundary = 0; // points counted as events because of boundary ambiguity
    double measured = 0;
    double lower = 0, upper = 0; // confidence interval
    double bound = 0;
    RowStatus status = RowStatus::pass;
};

/// VACUOUS if the bound is at least 1; PASS if the upper confidence limit is
/// within the bound; NO-EVENTS if nothing was observed but the sample is too
/// small to resolve the bound; FAIL otherwise.
inline RowStatus classify_bound(std::uint64_t events, double upper, double bound) {
    if (bound >= 1)
        return RowStatus::vacuous;
    if (upper <= bound)
        return RowStatus::pass;
    if (events == 0)
        return RowStatus::no_events;
    return RowStatus::fail;
}

inline MeasureRow measure_row(double param, std::uint64_t events, std::uint64_t samples, double bound,
                              double confidence = 0.99) {
    MeasureRow row;
    row.param = param;
    row.events = events;
    row.samples = samples;
    row.measured = static_cast<double>(events) / static_cast<double>(samples);
    const auto ci = clopper_pearson(events, samples, confidence);
    row.lower = ci.lower;
    row.upper = ci.upper;
    row.bound = bound;
    row.status = classify_bound(events, ci.upper, bound);
    return row;
}

/// Worker count: explicit value if positive, else LATFLOW_WORKERS, else the
/// hardware concurrency.
inline unsigned resolve_workers(int requested = 0) {
    if (requested > 0)
        return static_cast<unsigned>(requested);
    if (const char* env = std::getenv("LATFLOW_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0)
            return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// out[i] = fn(i) for i < count, computed on `workers` threads. Results are
/// stored by index, so the output is independent of scheduling. The first
/// exception thrown by any item is rethrown.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, unsigned workers, Fn&& fn) {
    std::vector<T> out(count);
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i)
            out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count)
                return;
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next = count;
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w)
        threads.emplace_back(work);
    for (auto& t : threads)
        t.join();
    if (error)
        std::rethrow_exception(error);
    return out;
}

} // namespace latflow
