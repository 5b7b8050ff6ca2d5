#pragma once

#include "bnpmix/core.hpp"
#include "bnpmix/rng.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace bnpmix {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

// ---------------------------------------------------------------------------
// Prior on the number of components K >= 1
// ---------------------------------------------------------------------------

struct GeometricK {
    double p = 0.1;  ///< pmf p (1 - p)^(k - 1) on {1, 2, ...}
};
struct PointMassK {
    int k0 = 1;
};
struct PoissonShiftedK {
    double lambda = 1.0;  ///< K - 1 ~ Poisson(lambda)
};

class KPrior {
public:
    using Variant = std::variant<GeometricK, PointMassK, PoissonShiftedK>;

    KPrior() : v_(GeometricK{}) {}
    explicit KPrior(Variant v) : v_(v) { validate(); }

    static KPrior geometric(double p) { return KPrior(GeometricK{p}); }
    static KPrior point_mass(int k0) { return KPrior(PointMassK{k0}); }
    static KPrior poisson_shifted(double lambda) { return KPrior(PoissonShiftedK{lambda}); }

    [[nodiscard]] const Variant& variant() const noexcept { return v_; }

    [[nodiscard]] double log_pmf(long k) const {
        if (k < 1) return kNegInf;
        return std::visit(
            [k](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, GeometricK>) {
                    return std::log(d.p) + static_cast<double>(k - 1) * std::log1p(-d.p);
                } else if constexpr (std::is_same_v<T, PointMassK>) {
                    return k == d.k0 ? 0.0 : kNegInf;
                } else {
                    const double j = static_cast<double>(k - 1);
                    return -d.lambda + j * std::log(d.lambda) - std::lgamma(j + 1.0);
                }
            },
            v_);
    }

    /// Largest k with positive mass, if the support is finite.
    [[nodiscard]] std::optional<long> support_max() const {
        if (const auto* pm = std::get_if<PointMassK>(&v_)) return pm->k0;
        return std::nullopt;
    }

    /// Upper bound on log p(k'+1)/p(k') valid for every k' >= k, non-increasing in k.
    [[nodiscard]] double log_ratio_bound(long k) const {
        return std::visit(
            [k](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, GeometricK>) {
                    return std::log1p(-d.p);
                } else if constexpr (std::is_same_v<T, PointMassK>) {
                    return kNegInf;
                } else {
                    return std::log(d.lambda) - std::log(static_cast<double>(std::max<long>(k, 1)));
                }
            },
            v_);
    }

    [[nodiscard]] std::string describe() const {
        return std::visit(
            [](const auto& d) -> std::string {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, GeometricK>) return "geometric:" + std::to_string(d.p);
                else if constexpr (std::is_same_v<T, PointMassK>) return "point:" + std::to_string(d.k0);
                else return "poisson:" + std::to_string(d.lambda);
            },
            v_);
    }

private:
    void validate() const {
        std::visit(
            [](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, GeometricK>) {
                    if (!(d.p > 0.0 && d.p <= 1.0)) throw ValidationError("geometric K prior needs p in (0, 1]");
                } else if constexpr (std::is_same_v<T, PointMassK>) {
                    if (d.k0 < 1) throw ValidationError("point-mass K prior needs K0 >= 1");
                } else {
                    if (!(d.lambda > 0.0) || !std::isfinite(d.lambda))
                        throw ValidationError("shifted Poisson K prior needs lambda > 0");
                }
            },
            v_);
    }

    Variant v_;
};

struct DpPrior {
    double alpha = 1.0;
    std::optional<double> alpha_rate;  ///< Exponential(rate) hyperprior when set

    void validate() const {
        if (!(alpha > 0.0)) throw ValidationError("DP concentration alpha must be positive");
        if (alpha_rate && !(*alpha_rate > 0.0)) throw ValidationError("alpha prior rate must be positive");
    }
};

struct MfmPrior {
    double gamma = 1.0;
    KPrior k_prior = KPrior::geometric(0.1);

    void validate() const {
        if (!(gamma > 0.0)) throw ValidationError("MFM Dirichlet parameter gamma must be positive");
    }
};

// ---------------------------------------------------------------------------
// MFM coefficients V_n(t)
// ---------------------------------------------------------------------------

/// log of the k-th summand of V_n(t):
/// log[k!/(k-t)!] + log Gamma(gamma k) - log Gamma(gamma k + n) + log p_K(k).
inline double vn_log_term(std::size_t n, double gamma, const KPrior& k_prior, int t, long k) {
    const double lp = k_prior.log_pmf(k);
    if (lp == kNegInf || k < t) return kNegInf;
    const double kd = static_cast<double>(k);
    return std::lgamma(kd + 1.0) - std::lgamma(kd - t + 1.0) + std::lgamma(gamma * kd) -
           std::lgamma(gamma * kd + static_cast<double>(n)) + lp;
}

struct VnTable {
    std::size_t n = 0;
    double gamma = 1.0;
    KPrior k_prior;
    double tail_tol = 1e-12;
    std::vector<double> log_values;   ///< log V_n(t) at index t - 1
    std::vector<long> terms_used;     ///< summands evaluated per t
    std::vector<double> tail_bound;   ///< bound on omitted mass relative to the partial sum

    [[nodiscard]] int t_max() const noexcept { return static_cast<int>(log_values.size()); }

    [[nodiscard]] double log_v(int t) const {
        if (t < 1 || t > t_max()) throw ValidationError("V_n(t) requested outside the computed table");
        return log_values[static_cast<std::size_t>(t - 1)];
    }
};

namespace detail {

struct VnEntry {
    double log_value;
    long terms;
    double tail;
};

inline VnEntry vn_series(std::size_t n, double gamma, const KPrior& k_prior, int t, double tail_tol,
                         long min_terms) {
    constexpr long kMaxTerms = 50'000'000;
    const auto kmax = k_prior.support_max();
    if (kmax && *kmax < t) return {kNegInf, 0, 0.0};

    double acc_max = kNegInf;  // running log-sum as (max, scaled sum)
    double acc_sum = 0.0;
    const double log_tol = std::log(tail_tol);
    long terms = 0;
    double tail = 0.0;
    for (long k = t;; ++k) {
        const double term = vn_log_term(n, gamma, k_prior, t, k);
        ++terms;
        if (term != kNegInf) {
            if (term > acc_max) {
                acc_sum = acc_sum * std::exp(acc_max - term) + 1.0;
                acc_max = term;
            } else {
                acc_sum += std::exp(term - acc_max);
            }
        }
        if (kmax && k >= *kmax) {
            tail = 0.0;
            break;
        }
        // term(k'+1)/term(k') <= (k'+1)/(k'+1-t) * p_K ratio bound; the Gamma factor is <= 1
        const double log_r = std::log(static_cast<double>(k + 1)) - std::log(static_cast<double>(k + 1 - t)) +
                             k_prior.log_ratio_bound(k);
        if (terms >= min_terms && log_r < 0.0 && term != kNegInf) {
            const double log_tail = term + log_r - std::log1p(-std::exp(log_r));
            const double rel = log_tail - (acc_max + std::log(acc_sum));
            if (rel < log_tol) {
                tail = std::exp(rel);
                break;
            }
        }
        if (terms > kMaxTerms) {
            throw ValidationError("V_n(t) series did not converge; K prior is not normalisable in practice");
        }
    }
    return {acc_max + std::log(acc_sum), terms, tail};
}

}  // namespace detail

/// log V_n(t) for t = 1..t_max, each series truncated once the bounded tail
/// falls below tail_tol relative to the partial sum. min_terms forces at least
/// that many summands per entry.
inline VnTable compute_vn_table(std::size_t n, double gamma, const KPrior& k_prior, int t_max,
                                double tail_tol = 1e-12, long min_terms = 0) {
    if (n < 1) throw ValidationError("V_n(t) needs n >= 1");
    if (t_max < 1 || static_cast<std::size_t>(t_max) > n) throw ValidationError("V_n(t) needs 1 <= t_max <= n");
    if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
    if (!(tail_tol > 0.0)) throw ValidationError("tail tolerance must be positive");
    VnTable tab;
    tab.n = n;
    tab.gamma = gamma;
    tab.k_prior = k_prior;
    tab.tail_tol = tail_tol;
    for (int t = 1; t <= t_max; ++t) {
        const auto e = detail::vn_series(n, gamma, k_prior, t, tail_tol, min_terms);
        tab.log_values.push_back(e.log_value);
        tab.terms_used.push_back(e.terms);
        tab.tail_bound.push_back(e.tail);
    }
    return tab;
}

/// Owning V-table that grows on demand. One instance per chain.
class VnCache {
public:
    VnCache() = default;
    VnCache(std::size_t n, double gamma, KPrior k_prior, int initial_t_max)
        : table_(compute_vn_table(n, gamma, k_prior, std::clamp<int>(initial_t_max, 1, static_cast<int>(n)))) {}

    double log_v(int t) {
        if (t > table_.t_max()) extend(t);
        return table_.log_v(t);
    }

    [[nodiscard]] const VnTable& table() const noexcept { return table_; }

private:
    void extend(int t) {
        if (static_cast<std::size_t>(t) > table_.n) throw ValidationError("occupied clusters cannot exceed n");
        const int target = std::min<int>(static_cast<int>(table_.n), std::max(t, 2 * table_.t_max()));
        for (int s = table_.t_max() + 1; s <= target; ++s) {
            const auto e = detail::vn_series(table_.n, table_.gamma, table_.k_prior, s, table_.tail_tol, 0);
            table_.log_values.push_back(e.log_value);
            table_.terms_used.push_back(e.terms);
            table_.tail_bound.push_back(e.tail);
        }
    }

    VnTable table_;
};

// ---------------------------------------------------------------------------
// Urn conditionals and the allocation prior
// ---------------------------------------------------------------------------

/// Unnormalised log-weights of the sequential allocation of one more observation.
struct UrnWeights {
    std::vector<int> labels;          ///< occupied cluster ids after exclusion
    std::vector<double> log_weights;  ///< aligned with labels
    double new_cluster = kNegInf;

    /// Normalised probabilities, existing clusters first then the new cluster.
    [[nodiscard]] std::vector<double> probabilities() const {
        double lse = new_cluster;
        for (double w : log_weights) lse = log_add_exp(lse, w);
        std::vector<double> out;
        out.reserve(log_weights.size() + 1);
        for (double w : log_weights) out.push_back(std::exp(w - lse));
        out.push_back(std::exp(new_cluster - lse));
        return out;
    }
};

namespace detail {

inline std::vector<int> counts_after_exclusion(const Partition& part, std::optional<std::size_t> exclude) {
    std::vector<int> counts = part.sizes();
    if (exclude) {
        if (*exclude >= part.n()) throw ValidationError("excluded observation index out of range");
        --counts[static_cast<std::size_t>(part[*exclude] - 1)];
    }
    return counts;
}

}  // namespace detail

inline UrnWeights dp_urn_logweights(const Partition& part, std::optional<std::size_t> exclude, double alpha) {
    if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
    const auto counts = detail::counts_after_exclusion(part, exclude);
    UrnWeights w;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) continue;
        w.labels.push_back(static_cast<int>(k + 1));
        w.log_weights.push_back(std::log(static_cast<double>(counts[k])));
    }
    w.new_cluster = std::log(alpha);
    return w;
}

inline UrnWeights mfm_urn_logweights(const Partition& part, std::optional<std::size_t> exclude, double gamma,
                                     const VnTable& vn) {
    if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
    const auto counts = detail::counts_after_exclusion(part, exclude);
    const std::size_t allocated = part.n() - (exclude ? 1 : 0);
    if (allocated + 1 > vn.n) throw ValidationError("V-table sample size is smaller than the partition");
    UrnWeights w;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) continue;
        w.labels.push_back(static_cast<int>(k + 1));
        w.log_weights.push_back(std::log(static_cast<double>(counts[k]) + gamma));
    }
    const int t = static_cast<int>(w.labels.size());
    const double next = vn.log_v(t + 1);
    w.new_cluster = next == kNegInf ? kNegInf : std::log(gamma) + next - (t == 0 ? 0.0 : vn.log_v(t));
    return w;
}

/// Closed-form DP partition prior from cluster sizes.
inline double dp_log_prior_sizes(std::span<const int> sizes, std::size_t n, double alpha) {
    double lp = static_cast<double>(sizes.size()) * std::log(alpha) + std::lgamma(alpha) -
                std::lgamma(alpha + static_cast<double>(n));
    for (int s : sizes) lp += std::lgamma(static_cast<double>(s));
    return lp;
}

/// Closed-form MFM partition prior from cluster sizes; log V_n(t) supplied.
inline double mfm_log_prior_sizes(std::span<const int> sizes, double gamma, double log_vn_t) {
    double lp = log_vn_t;
    const double lg = std::lgamma(gamma);
    for (int s : sizes) lp += std::lgamma(static_cast<double>(s) + gamma) - lg;
    return lp;
}

inline double allocation_log_prior(const Partition& part, const DpPrior& prior) {
    return dp_log_prior_sizes(part.sizes(), part.n(), prior.alpha);
}

inline double allocation_log_prior(const Partition& part, const MfmPrior& prior, const VnTable& vn) {
    if (vn.n != part.n()) throw ValidationError("V-table sample size does not match the partition");
    return mfm_log_prior_sizes(part.sizes(), prior.gamma, vn.log_v(part.t()));
}

// ---------------------------------------------------------------------------
// Posterior on K given T, DP expectations, alpha updates
// ---------------------------------------------------------------------------

struct KPosterior {
    std::vector<long> k;
    std::vector<double> prob;

    [[nodiscard]] long mode() const {
        return k[static_cast<std::size_t>(std::max_element(prob.begin(), prob.end()) - prob.begin())];
    }
};

/// p(K = k | T = t), truncated once cumulative mass reaches 1 - 1e-10.
inline KPosterior k_posterior_given_t(int t, const VnTable& vn) {
    if (t < 1) throw ValidationError("k_posterior_given_t needs t >= 1");
    const double log_norm = vn.log_v(t);
    if (log_norm == kNegInf) throw ValidationError("T = t has zero prior mass under this K prior");
    const auto kmax = vn.k_prior.support_max();
    KPosterior out;
    double cum = 0.0;
    for (long k = t; cum < 1.0 - 1e-10; ++k) {
        const double lp = vn_log_term(vn.n, vn.gamma, vn.k_prior, t, k) - log_norm;
        const double p = std::exp(lp);
        if (p > 0.0) {
            out.k.push_back(k);
            out.prob.push_back(p);
            cum += p;
        }
        if (kmax && k >= *kmax) break;
        if (k - t > 50'000'000) break;
    }
    return out;
}

inline double dp_expected_components(std::size_t n, double alpha) {
    if (n < 1 || !(alpha > 0.0)) throw ValidationError("dp_expected_components needs n >= 1, alpha > 0");
    double s = 0.0;
    for (std::size_t i = 1; i <= n; ++i) s += alpha / (alpha + static_cast<double>(i) - 1.0);
    return s;
}

/// log p(alpha | T) up to a constant; rate selects an Exponential(rate) prior.
inline double alpha_log_conditional(double alpha, int t, std::size_t n, std::optional<double> rate) {
    if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
    double lp = static_cast<double>(t) * std::log(alpha) + std::lgamma(alpha) -
                std::lgamma(alpha + static_cast<double>(n));
    if (rate) lp += std::log(*rate) - *rate * alpha;
    return lp;
}

inline constexpr double kAlphaProposalSd = 0.5;

/// Log acceptance ratio of a log-scale random-walk move alpha -> proposal.
inline double alpha_mh_log_ratio(double alpha, double proposal, int t, std::size_t n, std::optional<double> rate) {
    return alpha_log_conditional(proposal, t, n, rate) - alpha_log_conditional(alpha, t, n, rate) +
           std::log(proposal) - std::log(alpha);
}

/// One random-walk Metropolis step on log alpha.
inline double alpha_update(double alpha, int t, std::size_t n, std::optional<double> rate, RngStream& rng) {
    const double proposal = alpha * std::exp(kAlphaProposalSd * rng.normal());
    const double log_a = alpha_mh_log_ratio(alpha, proposal, t, n, rate);
    if (log_a >= 0.0 || std::log(rng.uniform()) < log_a) return proposal;
    return alpha;
}

}  // namespace bnpmix
