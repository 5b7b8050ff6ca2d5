#pragma once

#include "bnpmix/core.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace bnpmix {

/// The diagnostic is undefined for the given input (e.g. zero variance).
struct UndefinedDiagnosticError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

struct Moments {
    double mean = 0.0;
    double var = 0.0;  ///< denominator n - 1
};

inline Moments moments(std::span<const double> x) {
    Moments m;
    for (double v : x) m.mean += v;
    m.mean /= static_cast<double>(x.size());
    for (double v : x) m.var += (v - m.mean) * (v - m.mean);
    m.var /= static_cast<double>(x.size()) - 1.0;
    return m;
}

}  // namespace detail

/// Difference of window means in standard-error units, with plain sample variances.
inline double geweke_z(std::span<const double> trace, double first = 0.1, double last = 0.5) {
    if (trace.size() < 20) throw ValidationError("Geweke diagnostic needs at least 20 values");
    if (!(first > 0.0 && last > 0.0 && first + last <= 1.0)) throw ValidationError("invalid Geweke window fractions");
    const auto n = trace.size();
    const auto na = static_cast<std::size_t>(std::floor(first * static_cast<double>(n)));
    const auto nb = static_cast<std::size_t>(std::floor(last * static_cast<double>(n)));
    if (na < 2 || nb < 2) throw ValidationError("Geweke windows are too short");
    const auto a = detail::moments(trace.subspan(0, na));
    const auto b = detail::moments(trace.subspan(n - nb, nb));
    const double se2 = a.var / static_cast<double>(na) + b.var / static_cast<double>(nb);
    if (!(se2 > 0.0)) throw UndefinedDiagnosticError("Geweke diagnostic undefined: both windows are constant");
    return (a.mean - b.mean) / std::sqrt(se2);
}

/// Potential scale reduction sqrt(((n-1)/n W + B/n) / W).
inline double gelman_rubin(std::span<const std::vector<double>> chains) {
    if (chains.size() < 2) throw ValidationError("Gelman-Rubin needs at least two chains");
    const std::size_t n = chains.front().size();
    if (n < 10) throw ValidationError("Gelman-Rubin needs at least 10 values per chain");
    for (const auto& c : chains) {
        if (c.size() != n) throw ValidationError("Gelman-Rubin chains must have equal length");
    }
    const double m = static_cast<double>(chains.size());
    const double nd = static_cast<double>(n);
    std::vector<double> means;
    double w = 0.0;
    for (const auto& c : chains) {
        const auto mo = detail::moments(c);
        means.push_back(mo.mean);
        w += mo.var;
    }
    w /= m;
    if (!(w > 0.0)) throw UndefinedDiagnosticError("Gelman-Rubin undefined: zero within-chain variance");
    double grand = 0.0;
    for (double v : means) grand += v;
    grand /= m;
    double b = 0.0;
    for (double v : means) b += (v - grand) * (v - grand);
    b *= nd / (m - 1.0);
    return std::sqrt(((nd - 1.0) / nd * w + b / nd) / w);
}

/// Per-chain scalar functionals of a trace.
struct TraceFunctionals {
    std::vector<double> t;
    std::vector<double> log_post;
    std::vector<double> alpha;  ///< empty when alpha is not sampled
};

inline TraceFunctionals functionals(const SampleTrace& trace) {
    TraceFunctionals f;
    for (const auto& r : trace.records()) {
        f.t.push_back(static_cast<double>(r.t()));
        f.log_post.push_back(r.log_post);
        if (r.alpha) f.alpha.push_back(*r.alpha);
    }
    if (f.alpha.size() != f.t.size()) f.alpha.clear();
    return f;
}

}  // namespace bnpmix
