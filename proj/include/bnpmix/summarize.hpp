#pragma once

#include "bnpmix/core.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bnpmix {

// ---------------------------------------------------------------------------
// Posterior similarity matrix
// ---------------------------------------------------------------------------

class Psm {
public:
    Psm() = default;

    explicit Psm(Eigen::MatrixXd p) : p_(std::move(p)) {
        if (p_.rows() != p_.cols() || p_.rows() < 1) throw ValidationError("PSM must be a non-empty square matrix");
        for (Eigen::Index i = 0; i < p_.rows(); ++i) {
            if (p_(i, i) != 1.0) throw ValidationError("PSM diagonal must be exactly 1");
            for (Eigen::Index j = 0; j < i; ++j) {
                const double v = p_(i, j);
                if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("PSM entries must lie in [0, 1]");
                if (std::abs(v - p_(j, i)) > 1e-15) throw ValidationError("PSM must be symmetric");
            }
        }
    }

    [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(p_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return p_; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
        return p_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

private:
    Eigen::MatrixXd p_;
};

/// Distinct set partitions of the retained samples with their multiplicities,
/// in order of first occurrence (chain order, then iteration order).
struct UniqueSamples {
    std::vector<Partition> partitions;  ///< canonical first-appearance labels
    std::vector<long> counts;
    long total = 0;
};

inline UniqueSamples unique_samples(std::span<const SampleTrace> traces) {
    UniqueSamples out;
    std::map<std::vector<int>, std::size_t> index;
    std::optional<std::size_t> n;
    for (const auto& tr : traces) {
        for (const auto& r : tr.records()) {
            if (n && r.partition.n() != *n) throw ValidationError("traces disagree on the number of observations");
            n = r.partition.n();
            Partition canon = relabel_contiguous(r.partition.labels());
            auto [it, inserted] = index.try_emplace(canon.labels(), out.partitions.size());
            if (inserted) {
                out.partitions.push_back(std::move(canon));
                out.counts.push_back(0);
            }
            ++out.counts[it->second];
            ++out.total;
        }
    }
    return out;
}

inline Psm compute_psm(const UniqueSamples& us) {
    if (us.total == 0) throw ValidationError("PSM needs at least one sample");
    const auto n = static_cast<Eigen::Index>(us.partitions.front().n());
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t u = 0; u < us.partitions.size(); ++u) {
        const double w = static_cast<double>(us.counts[u]);
        for (const auto& mem : us.partitions[u].members()) {
            for (std::size_t a = 0; a < mem.size(); ++a) {
                const auto ia = static_cast<Eigen::Index>(mem[a]);
                for (std::size_t b = 0; b < a; ++b) acc(ia, static_cast<Eigen::Index>(mem[b])) += w;
            }
        }
    }
    const double m = static_cast<double>(us.total);
    Eigen::MatrixXd p(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        p(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            // members() lists indices ascending, so only the lower triangle is filled
            const double v = acc(i, j) / m;
            p(i, j) = v;
            p(j, i) = v;
        }
    }
    return Psm(std::move(p));
}

inline Psm compute_psm(std::span<const SampleTrace> traces) { return compute_psm(unique_samples(traces)); }

// ---------------------------------------------------------------------------
// Pair counting and comparison indices
// ---------------------------------------------------------------------------

struct ContingencyTable {
    std::vector<std::vector<long>> counts;  ///< rows: clusters of z, columns: clusters of z_hat
    std::vector<long> row_sums;
    std::vector<long> col_sums;
    long n = 0;
};

inline ContingencyTable contingency(std::span<const int> z, std::span<const int> zhat) {
    if (z.size() != zhat.size()) throw ValidationError("partitions differ in length");
    ContingencyTable t;
    const int r = z.empty() ? 0 : *std::max_element(z.begin(), z.end());
    const int c = zhat.empty() ? 0 : *std::max_element(zhat.begin(), zhat.end());
    t.counts.assign(static_cast<std::size_t>(r), std::vector<long>(static_cast<std::size_t>(c), 0));
    t.row_sums.assign(static_cast<std::size_t>(r), 0);
    t.col_sums.assign(static_cast<std::size_t>(c), 0);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] < 1 || zhat[i] < 1) throw ValidationError("labels must be positive");
        const auto a = static_cast<std::size_t>(z[i] - 1);
        const auto b = static_cast<std::size_t>(zhat[i] - 1);
        ++t.counts[a][b];
        ++t.row_sums[a];
        ++t.col_sums[b];
    }
    t.n = static_cast<long>(z.size());
    return t;
}

inline ContingencyTable contingency(const Partition& z, const Partition& zhat) {
    return contingency(z.labels(), zhat.labels());
}

namespace detail {

inline long choose2(long m) { return m * (m - 1) / 2; }

struct PairCounts {
    long together_both = 0;  ///< pairs co-clustered in both
    long together_z = 0;     ///< pairs co-clustered in z
    long together_zhat = 0;  ///< pairs co-clustered in z_hat
    long total = 0;
};

inline PairCounts pair_counts(const ContingencyTable& t) {
    PairCounts pc;
    for (const auto& row : t.counts) {
        for (long v : row) pc.together_both += choose2(v);
    }
    for (long v : t.row_sums) pc.together_z += choose2(v);
    for (long v : t.col_sums) pc.together_zhat += choose2(v);
    pc.total = choose2(t.n);
    return pc;
}

}  // namespace detail

inline double rand_index(const Partition& z, const Partition& zhat) {
    if (z.n() < 2) throw ValidationError("the Rand index needs N >= 2");
    const auto pc = detail::pair_counts(contingency(z, zhat));
    const long agree = pc.total - pc.together_z - pc.together_zhat + 2 * pc.together_both;
    return static_cast<double>(agree) / static_cast<double>(pc.total);
}

inline double adjusted_rand_index(const Partition& z, const Partition& zhat) {
    if (z.n() < 2) throw ValidationError("the adjusted Rand index needs N >= 2");
    const auto pc = detail::pair_counts(contingency(z, zhat));
    const double expected =
        static_cast<double>(pc.together_z) * static_cast<double>(pc.together_zhat) / static_cast<double>(pc.total);
    const double max_index = 0.5 * static_cast<double>(pc.together_z + pc.together_zhat);
    if (max_index == expected) return 1.0;
    return (static_cast<double>(pc.together_both) - expected) / (max_index - expected);
}

struct BinderConfig {
    double l1 = 1.0;  ///< cost of separating a co-clustered pair
    double l2 = 1.0;  ///< cost of joining a separated pair

    void validate() const {
        if (!(l1 > 0.0 && l2 > 0.0)) throw ValidationError("Binder penalties must be positive");
    }
};

/// Binder loss of z_hat against a reference partition z.
inline double binder_loss(const Partition& z, const Partition& zhat, const BinderConfig& cfg = {}) {
    const auto pc = detail::pair_counts(contingency(z, zhat));
    return cfg.l1 * static_cast<double>(pc.together_z - pc.together_both) +
           cfg.l2 * static_cast<double>(pc.together_zhat - pc.together_both);
}

/// Variation of information in bits.
inline double vi_distance(const Partition& z, const Partition& zhat) {
    const auto t = contingency(z, zhat);
    const double n = static_cast<double>(t.n);
    auto h = [n](long c) { return c == 0 ? 0.0 : -(static_cast<double>(c) / n) * std::log2(static_cast<double>(c) / n); };
    double hz = 0.0, hzh = 0.0, hj = 0.0;
    for (long v : t.row_sums) hz += h(v);
    for (long v : t.col_sums) hzh += h(v);
    // cell order is transposed when the arguments swap, so sum in sorted order
    std::vector<long> cells;
    for (const auto& row : t.counts) {
        for (long v : row) {
            if (v > 0) cells.push_back(v);
        }
    }
    std::sort(cells.begin(), cells.end());
    for (long v : cells) hj += h(v);
    return std::max(0.0, 2.0 * hj - (hz + hzh));
}

// ---------------------------------------------------------------------------
// PSM-based expected losses
// ---------------------------------------------------------------------------

namespace detail {

/// Sums over pairs i < j sharing a cluster of z_hat, and per-row within-cluster PSM sums.
struct WithinSums {
    double psm_pairs = 0.0;       ///< sum_{i<j, same} P_ij
    long pairs = 0;               ///< number of same-cluster pairs
    std::vector<double> row_sum;  ///< sum_j 1(same) P_ij, including j = i
};

inline WithinSums within_sums(const Partition& zhat, const Psm& psm) {
    if (zhat.n() != psm.n()) throw ValidationError("partition length does not match the PSM");
    WithinSums w;
    w.row_sum.assign(zhat.n(), 0.0);
    const auto& p = psm.matrix();
    for (const auto& mem : zhat.members()) {
        w.pairs += choose2(static_cast<long>(mem.size()));
        for (std::size_t a = 0; a < mem.size(); ++a) {
            const auto ia = static_cast<Eigen::Index>(mem[a]);
            double s = 0.0;
            for (std::size_t b = 0; b < mem.size(); ++b) s += p(ia, static_cast<Eigen::Index>(mem[b]));
            w.row_sum[mem[a]] = s;
            w.psm_pairs += 0.5 * (s - 1.0);
        }
    }
    return w;
}

inline double psm_upper_sum(const Psm& psm) {
    const auto& p = psm.matrix();
    return 0.5 * (p.sum() - static_cast<double>(p.rows()));
}

}  // namespace detail

inline double binder_expected_loss(const Partition& zhat, const Psm& psm, const BinderConfig& cfg = {}) {
    cfg.validate();
    const auto w = detail::within_sums(zhat, psm);
    return cfg.l1 * (detail::psm_upper_sum(psm) - w.psm_pairs) + cfg.l2 * (static_cast<double>(w.pairs) - w.psm_pairs);
}

struct PearScore {
    double score = 0.0;
    bool degenerate = false;
};

/// Approximate posterior expected adjusted Rand index (higher is better).
inline PearScore pear_score(const Partition& zhat, const Psm& psm) {
    const auto w = detail::within_sums(zhat, psm);
    const double sum_i = static_cast<double>(w.pairs);
    const double sum_p = detail::psm_upper_sum(psm);
    const double total = static_cast<double>(detail::choose2(static_cast<long>(psm.n())));
    if (total == 0.0) return {0.0, true};
    const double expected = sum_i * sum_p / total;
    const double denom = 0.5 * (sum_i + sum_p) - expected;
    if (!(std::abs(denom) > 1e-12 * std::max(1.0, total))) return {0.0, true};
    return {(w.psm_pairs - expected) / denom, false};
}

/// sum_k n_k log2 n_k - 2 sum_i log2(sum_j 1(same) P_ij); z_hat-independent terms dropped.
inline double vi_lb_expected(const Partition& zhat, const Psm& psm) {
    const auto w = detail::within_sums(zhat, psm);
    double out = 0.0;
    for (int s : zhat.sizes()) out += static_cast<double>(s) * std::log2(static_cast<double>(s));
    for (double r : w.row_sum) out -= 2.0 * std::log2(r);
    return out;
}

/// Exact posterior expected VI by averaging over the distinct samples.
inline double vi_expected_exact(const Partition& zhat, const UniqueSamples& us) {
    double acc = 0.0;
    for (std::size_t u = 0; u < us.partitions.size(); ++u) {
        acc += static_cast<double>(us.counts[u]) * vi_distance(us.partitions[u], zhat);
    }
    return acc / static_cast<double>(us.total);
}

// ---------------------------------------------------------------------------
// Summary clusterings
// ---------------------------------------------------------------------------

struct SummaryResult {
    Partition partition;
    int num_clusters = 0;
    std::string method;
    double value = 0.0;  ///< expected loss, PEAR score, or log-posterior for MAP
    std::size_t candidates = 0;
    bool degenerate = false;
};

/// Retained sample with the largest log-posterior; ties go to the earliest (chain, iteration).
inline SummaryResult map_sample(std::span<const SampleTrace> traces) {
    const TraceRecord* best = nullptr;
    std::size_t count = 0;
    for (const auto& tr : traces) {
        for (const auto& r : tr.records()) {
            ++count;
            if (best == nullptr || r.log_post > best->log_post) best = &r;
        }
    }
    if (best == nullptr) throw ValidationError("MAP needs at least one sample");
    SummaryResult res;
    res.partition = relabel_contiguous(best->partition.labels());
    res.num_clusters = res.partition.t();
    res.method = "map";
    res.value = best->log_post;
    res.candidates = count;
    return res;
}

enum class Linkage { average, complete };

struct Merge {
    std::size_t a = 0, b = 0;  ///< representative observations of the merged clusters
    double height = 0.0;
};

namespace detail {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace detail

/// Agglomerative clustering on D = 1 - P by the nearest-neighbour chain with
/// Lance-Williams updates on a stored matrix. Merges are returned sorted by
/// height (stable), which for these reducible linkages is a valid merge order.
inline std::vector<Merge> hclust_merges(const Psm& psm, Linkage linkage) {
    const std::size_t n = psm.n();
    Eigen::MatrixXd d = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) - psm.matrix();
    std::vector<double> size(n, 1.0);
    std::vector<bool> active(n, true);
    std::vector<Merge> merges;
    merges.reserve(n > 0 ? n - 1 : 0);
    std::vector<std::size_t> chain;
    auto dist = [&](std::size_t a, std::size_t b) {
        return d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    };
    std::size_t remaining = n;
    while (remaining > 1) {
        if (chain.empty()) {
            for (std::size_t i = 0; i < n; ++i) {
                if (active[i]) {
                    chain.push_back(i);
                    break;
                }
            }
        }
        const std::size_t a = chain.back();
        const std::optional<std::size_t> prev =
            chain.size() >= 2 ? std::optional<std::size_t>(chain[chain.size() - 2]) : std::nullopt;
        // nearest active neighbour; prefer the previous chain element on ties, then the lowest index
        std::size_t best = n;
        double best_d = std::numeric_limits<double>::infinity();
        if (prev) {
            best = *prev;
            best_d = dist(a, *prev);
        }
        for (std::size_t c = 0; c < n; ++c) {
            if (!active[c] || c == a) continue;
            const double v = dist(a, c);
            if (v < best_d) {
                best_d = v;
                best = c;
            }
        }
        if (prev && best == *prev) {
            chain.pop_back();
            chain.pop_back();
            const std::size_t keep = std::min(a, best);
            const std::size_t drop = std::max(a, best);
            merges.push_back({keep, drop, best_d});
            for (std::size_t c = 0; c < n; ++c) {
                if (!active[c] || c == keep || c == drop) continue;
                const double dk = dist(keep, c);
                const double dd = dist(drop, c);
                const double v = linkage == Linkage::complete
                                     ? std::max(dk, dd)
                                     : (size[keep] * dk + size[drop] * dd) / (size[keep] + size[drop]);
                d(static_cast<Eigen::Index>(keep), static_cast<Eigen::Index>(c)) = v;
                d(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(keep)) = v;
            }
            size[keep] += size[drop];
            active[drop] = false;
            --remaining;
        } else {
            chain.push_back(best);
        }
    }
    std::stable_sort(merges.begin(), merges.end(), [](const Merge& x, const Merge& y) { return x.height < y.height; });
    return merges;
}

/// Applies the first `count` merges and returns first-appearance labels.
inline Partition apply_merges(std::size_t n, std::span<const Merge> merges, std::size_t count) {
    detail::UnionFind uf(n);
    for (std::size_t m = 0; m < count && m < merges.size(); ++m) uf.unite(merges[m].a, merges[m].b);
    std::vector<int> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = static_cast<int>(uf.find(i)) + 1;
    return relabel_contiguous(raw);
}

inline Partition cut_tree(std::size_t n, std::span<const Merge> merges, std::size_t k) {
    if (k < 1 || k > n) throw ValidationError("cut size must lie in 1..N");
    return apply_merges(n, merges, n - k);
}

inline std::size_t default_k_max(std::size_t n) { return std::max<std::size_t>(1, n / 8); }

/// One candidate per k = 1..k_max from the dendrogram on 1 - P.
inline std::vector<Partition> hclust_candidates(const Psm& psm, Linkage linkage, std::size_t k_max) {
    if (k_max < 1) throw ValidationError("k_max must be at least 1");
    const auto merges = hclust_merges(psm, linkage);
    std::vector<Partition> out;
    for (std::size_t k = 1; k <= std::min(k_max, psm.n()); ++k) out.push_back(cut_tree(psm.n(), merges, k));
    return out;
}

/// Complete-linkage tree cut where clusters are merged while their linkage distance is below 1 - epsilon.
inline SummaryResult medvedovic(const Psm& psm, double epsilon = 0.01) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
    const auto merges = hclust_merges(psm, Linkage::complete);
    std::size_t count = 0;
    while (count < merges.size() && merges[count].height < 1.0 - epsilon) ++count;
    SummaryResult res;
    res.partition = apply_merges(psm.n(), merges, count);
    res.num_clusters = res.partition.t();
    res.method = "medvedovic";
    res.value = 1.0 - epsilon;
    res.candidates = 1;
    return res;
}

struct PamResult {
    Partition partition;
    std::vector<std::size_t> medoids;
    double cost = 0.0;
    double build_cost = 0.0;
};

/// k-medoids on D = 1 - P: greedy BUILD, then best-improvement swaps until no
/// swap lowers the total cost. Ties go to the lowest index.
inline PamResult pam(const Psm& psm, std::size_t k) {
    const std::size_t n = psm.n();
    if (k < 1 || k > n) throw ValidationError("PAM needs 1 <= k <= N");
    const Eigen::MatrixXd d =
        Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) - psm.matrix();
    auto dist = [&](std::size_t a, std::size_t b) { return d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)); };
    std::vector<std::size_t> medoids;
    std::vector<bool> is_medoid(n, false);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());

    // BUILD
    for (std::size_t m = 0; m < k; ++m) {
        std::size_t best = n;
        double best_gain = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            if (is_medoid[c]) continue;
            double gain = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double cur = m == 0 ? 0.0 : nearest[j];
                gain += m == 0 ? -dist(c, j) : std::max(0.0, cur - dist(c, j));
            }
            if (gain > best_gain) {
                best_gain = gain;
                best = c;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = true;
        for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], dist(best, j));
    }

    auto assign = [&](std::vector<std::size_t>& first, std::vector<double>& d1, std::vector<double>& d2) {
        for (std::size_t j = 0; j < n; ++j) {
            d1[j] = d2[j] = std::numeric_limits<double>::infinity();
            first[j] = 0;
            for (std::size_t m = 0; m < medoids.size(); ++m) {
                const double v = dist(medoids[m], j);
                if (v < d1[j]) {
                    d2[j] = d1[j];
                    d1[j] = v;
                    first[j] = m;
                } else if (v < d2[j]) {
                    d2[j] = v;
                }
            }
        }
    };
    std::vector<std::size_t> first(n);
    std::vector<double> d1(n), d2(n);
    assign(first, d1, d2);
    const double build_cost = std::accumulate(d1.begin(), d1.end(), 0.0);

    // SWAP: all k removal deltas for one candidate in a single pass over the data
    std::vector<double> delta(k);
    for (int guard = 0; guard < 10000; ++guard) {
        double best_delta = 0.0;
        std::size_t best_m = k, best_c = n;
        for (std::size_t c = 0; c < n; ++c) {
            if (is_medoid[c]) continue;
            std::fill(delta.begin(), delta.end(), 0.0);
            double shared = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double dc = dist(c, j);
                // kept nearest medoid: min(0, dc - d1); removed nearest medoid: min(dc, d2) - d1
                const double keep = std::min(0.0, dc - d1[j]);
                shared += keep;
                delta[first[j]] += std::min(dc, d2[j]) - d1[j] - keep;
            }
            for (std::size_t m = 0; m < k; ++m) {
                const double total = delta[m] + shared;
                if (total < best_delta - 1e-12) {
                    best_delta = total;
                    best_m = m;
                    best_c = c;
                }
            }
        }
        if (best_c == n) break;
        is_medoid[medoids[best_m]] = false;
        medoids[best_m] = best_c;
        is_medoid[best_c] = true;
        assign(first, d1, d2);
    }

    PamResult res;
    res.medoids = medoids;
    res.cost = std::accumulate(d1.begin(), d1.end(), 0.0);
    res.build_cost = build_cost;
    std::vector<int> raw(n);
    for (std::size_t j = 0; j < n; ++j) raw[j] = static_cast<int>(first[j]) + 1;
    // a medoid always heads its own cluster, even when another medoid is equally close
    for (std::size_t m = 0; m < k; ++m) raw[medoids[m]] = static_cast<int>(m) + 1;
    res.partition = relabel_contiguous(raw);
    return res;
}

inline std::vector<Partition> pam_candidates(const Psm& psm, std::size_t k_max) {
    if (k_max < 1) throw ValidationError("k_max must be at least 1");
    std::vector<Partition> out;
    for (std::size_t k = 1; k <= std::min(k_max, psm.n()); ++k) out.push_back(pam(psm, k).partition);
    return out;
}

// ---------------------------------------------------------------------------
// Loss optimisation over candidate sets
// ---------------------------------------------------------------------------

enum class Loss { binder, pear, vilb, vi };
enum class Strategy { hclust_average, hclust_complete, pam, samples };

inline std::string_view to_string(Loss l) {
    switch (l) {
        case Loss::binder: return "binder";
        case Loss::pear: return "pear";
        case Loss::vilb: return "vilb";
        case Loss::vi: return "vi";
    }
    return "?";
}

inline std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::hclust_average: return "average";
        case Strategy::hclust_complete: return "complete";
        case Strategy::pam: return "pam";
        case Strategy::samples: return "samples";
    }
    return "?";
}

inline Loss parse_loss(std::string_view s) {
    if (s == "binder") return Loss::binder;
    if (s == "pear") return Loss::pear;
    if (s == "vilb") return Loss::vilb;
    if (s == "vi") return Loss::vi;
    throw ValidationError("unknown loss '" + std::string(s) + "'");
}

inline Strategy parse_strategy(std::string_view s) {
    if (s == "average") return Strategy::hclust_average;
    if (s == "complete") return Strategy::hclust_complete;
    if (s == "pam") return Strategy::pam;
    if (s == "samples") return Strategy::samples;
    throw ValidationError("unknown optimisation strategy '" + std::string(s) + "'");
}

struct SummaryOptions {
    BinderConfig binder;
    std::optional<std::size_t> k_max;  ///< default floor(N / 8)
    double medvedovic_epsilon = 0.01;
};

/// Picks the candidate minimising the expected loss (maximising PEAR). Values
/// within 1e-9 relative count as ties: fewer clusters win, then the earlier candidate.
inline SummaryResult select_candidate(std::span<const Partition> candidates, const Psm& psm, Loss loss,
                                      const UniqueSamples* samples, const BinderConfig& binder = {}) {
    if (candidates.empty()) throw ValidationError("empty candidate set");
    if (loss == Loss::vi && samples == nullptr) throw ValidationError("exact VI loss needs the samples");
    std::optional<std::size_t> best;
    double best_v = 0.0;
    bool best_deg = false;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const Partition& z = candidates[c];
        double v = 0.0;
        bool deg = false;
        switch (loss) {
            case Loss::binder: v = binder_expected_loss(z, psm, binder); break;
            case Loss::pear: {
                const auto ps = pear_score(z, psm);
                v = -ps.score;
                deg = ps.degenerate;
                break;
            }
            case Loss::vilb: v = vi_lb_expected(z, psm); break;
            case Loss::vi: v = vi_expected_exact(z, *samples); break;
        }
        if (!best) {
            best = c;
            best_v = v;
            best_deg = deg;
            continue;
        }
        const double tol = 1e-9 * std::max(1.0, std::abs(best_v));
        const bool better = v < best_v - tol ||
                            (std::abs(v - best_v) <= tol && z.t() < candidates[*best].t());
        if (better) {
            best = c;
            best_v = v;
            best_deg = deg;
        }
    }
    SummaryResult res;
    res.partition = relabel_contiguous(candidates[*best].labels());
    res.num_clusters = res.partition.t();
    res.method = std::string(to_string(loss));
    res.value = loss == Loss::pear ? -best_v : best_v;
    res.candidates = candidates.size();
    res.degenerate = best_deg;
    return res;
}

inline std::vector<Partition> candidate_set(const UniqueSamples& samples, const Psm& psm, Strategy strategy,
                                            const SummaryOptions& opt = {}) {
    const std::size_t k_max = opt.k_max.value_or(default_k_max(psm.n()));
    switch (strategy) {
        case Strategy::hclust_average: return hclust_candidates(psm, Linkage::average, k_max);
        case Strategy::hclust_complete: return hclust_candidates(psm, Linkage::complete, k_max);
        case Strategy::pam: return pam_candidates(psm, k_max);
        case Strategy::samples: return samples.partitions;
    }
    throw ValidationError("unknown optimisation strategy");
}

inline SummaryResult optimize_summary(const UniqueSamples& samples, const Psm& psm, Loss loss, Strategy strategy,
                                      const SummaryOptions& opt = {}) {
    if (loss == Loss::vi && strategy != Strategy::samples) {
        throw ValidationError("exact VI loss is only available with the samples strategy");
    }
    const auto cands = candidate_set(samples, psm, strategy, opt);
    SummaryResult res = select_candidate(cands, psm, loss, &samples, opt.binder);
    res.method += "+";
    res.method += to_string(strategy);
    return res;
}

inline SummaryResult optimize_summary(std::span<const SampleTrace> traces, const Psm& psm, Loss loss,
                                      Strategy strategy, const SummaryOptions& opt = {}) {
    return optimize_summary(unique_samples(traces), psm, loss, strategy, opt);
}

/// Parses "loss+strategy", "medvedovic" or "map".
struct MethodId {
    enum class Kind { optimised, medvedovic, map } kind = Kind::optimised;
    Loss loss = Loss::vilb;
    Strategy strategy = Strategy::hclust_complete;

    [[nodiscard]] std::string name() const {
        if (kind == Kind::medvedovic) return "medvedovic";
        if (kind == Kind::map) return "map";
        return std::string(to_string(loss)) + "+" + std::string(to_string(strategy));
    }
};

inline MethodId parse_method(std::string_view s) {
    MethodId m;
    if (s == "medvedovic") {
        m.kind = MethodId::Kind::medvedovic;
        return m;
    }
    if (s == "map") {
        m.kind = MethodId::Kind::map;
        return m;
    }
    const auto plus = s.find('+');
    if (plus == std::string_view::npos) throw ValidationError("method '" + std::string(s) + "' is not loss+strategy");
    m.loss = parse_loss(s.substr(0, plus));
    m.strategy = parse_strategy(s.substr(plus + 1));
    if (m.loss == Loss::vi && m.strategy != Strategy::samples) {
        throw ValidationError("exact VI loss is only available with the samples strategy");
    }
    return m;
}

/// binder, pear and vilb crossed with average, complete, pam and samples, then medvedovic and map.
inline std::vector<MethodId> full_method_grid(bool include_pam = true) {
    std::vector<MethodId> out;
    for (Loss l : {Loss::binder, Loss::pear, Loss::vilb}) {
        for (Strategy s : {Strategy::hclust_average, Strategy::hclust_complete, Strategy::pam, Strategy::samples}) {
            if (s == Strategy::pam && !include_pam) continue;
            MethodId m;
            m.loss = l;
            m.strategy = s;
            out.push_back(m);
        }
    }
    out.push_back(MethodId{MethodId::Kind::medvedovic});
    out.push_back(MethodId{MethodId::Kind::map});
    return out;
}

inline SummaryResult run_method(const MethodId& m, std::span<const SampleTrace> traces, const UniqueSamples& samples,
                                const Psm& psm, const SummaryOptions& opt = {}) {
    switch (m.kind) {
        case MethodId::Kind::medvedovic: return medvedovic(psm, opt.medvedovic_epsilon);
        case MethodId::Kind::map: return map_sample(traces);
        case MethodId::Kind::optimised: break;
    }
    return optimize_summary(samples, psm, m.loss, m.strategy, opt);
}

/// PSM, unique samples and candidate sets computed once and shared across methods.
class Summarizer {
public:
    Summarizer(std::vector<SampleTrace> traces, SummaryOptions opt = {})
        : traces_(std::move(traces)), opt_(opt), samples_(unique_samples(traces_)), psm_(compute_psm(samples_)) {}

    [[nodiscard]] const Psm& psm() const noexcept { return psm_; }
    [[nodiscard]] const UniqueSamples& samples() const noexcept { return samples_; }
    [[nodiscard]] std::span<const SampleTrace> traces() const noexcept { return traces_; }

    SummaryResult run(const MethodId& m) {
        switch (m.kind) {
            case MethodId::Kind::medvedovic: return medvedovic(psm_, opt_.medvedovic_epsilon);
            case MethodId::Kind::map: return map_sample(traces_);
            case MethodId::Kind::optimised: break;
        }
        if (m.loss == Loss::vi && m.strategy != Strategy::samples) {
            throw ValidationError("exact VI loss is only available with the samples strategy");
        }
        auto it = candidates_.find(m.strategy);
        if (it == candidates_.end()) {
            it = candidates_.emplace(m.strategy, candidate_set(samples_, psm_, m.strategy, opt_)).first;
        }
        SummaryResult res = select_candidate(it->second, psm_, m.loss, &samples_, opt_.binder);
        res.method = m.name();
        return res;
    }

private:
    std::vector<SampleTrace> traces_;
    SummaryOptions opt_;
    UniqueSamples samples_;
    Psm psm_;
    std::map<Strategy, std::vector<Partition>> candidates_;
};

}  // namespace bnpmix
