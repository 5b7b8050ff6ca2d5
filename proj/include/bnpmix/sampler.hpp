#pragma once

#include "bnpmix/components.hpp"
#include "bnpmix/core.hpp"
#include "bnpmix/priors.hpp"
#include "bnpmix/rng.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace bnpmix {

struct SplitMergeConfig {
    int n_split = 5;
    int n_merge = 5;
    int param_refresh_per_iter = 1;
    int alloc_scans_per_iter = 1;  ///< allocation scans over non-singleton observations per iteration
    long iters = 2000;
    long burnin = 100;
    long thin = 2;
    int chains = 4;
    std::uint64_t seed = 1;
    bool audit = false;  ///< compare the cached log-posterior with a full recomputation after every move

    void validate() const {
        if (n_split < 0 || n_merge < 0 || param_refresh_per_iter < 0 || alloc_scans_per_iter < 0) {
            throw ValidationError("sweep counts must be non-negative");
        }
        if (iters < 1) throw ValidationError("iters must be at least 1");
        if (burnin < 0 || burnin >= iters) throw ValidationError("burnin must satisfy 0 <= burnin < iters");
        if (thin < 1) throw ValidationError("thin must be at least 1");
        if (chains < 1) throw ValidationError("chains must be at least 1");
    }

    [[nodiscard]] bool keeps(long iter) const { return iter > burnin && (iter - burnin) % thin == 0; }

    [[nodiscard]] long retained_per_chain() const { return (iters - burnin) / thin; }
};

enum class PriorKind { dpm, dpm_hyper, mfm };

inline std::string_view to_string(PriorKind k) {
    switch (k) {
        case PriorKind::dpm: return "dpm";
        case PriorKind::dpm_hyper: return "dpm-hyper";
        case PriorKind::mfm: return "mfm";
    }
    return "?";
}

/// Allocation prior of a fit: DP (fixed or Exponential-hyperprior alpha) or MFM.
struct PriorSpec {
    std::variant<DpPrior, MfmPrior> prior = MfmPrior{};

    static PriorSpec dpm(double alpha) { return PriorSpec{DpPrior{alpha, std::nullopt}}; }
    static PriorSpec dpm_hyper(double rate = 1.0) { return PriorSpec{DpPrior{1.0, rate}}; }
    static PriorSpec mfm(double gamma = 1.0, KPrior k_prior = KPrior::geometric(0.1)) {
        return PriorSpec{MfmPrior{gamma, std::move(k_prior)}};
    }

    [[nodiscard]] bool is_mfm() const noexcept { return std::holds_alternative<MfmPrior>(prior); }
    [[nodiscard]] const DpPrior& dp_prior() const { return std::get<DpPrior>(prior); }
    [[nodiscard]] const MfmPrior& mfm_prior() const { return std::get<MfmPrior>(prior); }

    [[nodiscard]] PriorKind kind() const {
        if (is_mfm()) return PriorKind::mfm;
        return dp_prior().alpha_rate ? PriorKind::dpm_hyper : PriorKind::dpm;
    }

    void validate() const {
        std::visit([](const auto& p) { p.validate(); }, prior);
    }
};

/// Per-chain model context: data in column layout, component model, and
/// the allocation prior with its lazily grown V-table.
class SamplerContext {
public:
    SamplerContext(const Dataset& data, ComponentModel model, PriorSpec prior)
        : xt_(data.values().transpose()), model_(std::move(model)), prior_(std::move(prior)) {
        prior_.validate();
        if (static_cast<std::size_t>(model_.dim()) != data.dim()) {
            throw ValidationError("component model dimension does not match the data");
        }
        if (prior_.is_mfm()) {
            const auto& m = prior_.mfm_prior();
            vn_.emplace(n(), m.gamma, m.k_prior, initial_t_max(n(), m.k_prior));
        }
    }

    [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(xt_.cols()); }
    [[nodiscard]] const Eigen::MatrixXd& xt() const noexcept { return xt_; }
    [[nodiscard]] const ComponentModel& model() const noexcept { return model_; }
    [[nodiscard]] const PriorSpec& prior() const noexcept { return prior_; }

    [[nodiscard]] auto x(std::size_t i) const { return xt_.col(static_cast<Eigen::Index>(i)); }

    [[nodiscard]] double loglik(std::size_t i, const ClusterParams& th) const { return th.loglik(x(i)); }

    [[nodiscard]] SuffStats stats(std::span<const std::size_t> members) const {
        return SuffStats::of_columns(xt_, members);
    }

    /// 0 for DP, gamma for MFM.
    [[nodiscard]] double count_offset() const { return prior_.is_mfm() ? prior_.mfm_prior().gamma : 0.0; }

    double allocation_log_prior(std::span<const int> sizes, std::optional<double> alpha) {
        if (prior_.is_mfm()) {
            return mfm_log_prior_sizes(sizes, prior_.mfm_prior().gamma, vn_->log_v(static_cast<int>(sizes.size())));
        }
        return dp_log_prior_sizes(sizes, n(), alpha.value_or(prior_.dp_prior().alpha));
    }

    /// Exponential log-density of alpha under the hyperprior, 0 otherwise.
    [[nodiscard]] double alpha_log_prior(std::optional<double> alpha) const {
        if (prior_.is_mfm() || !prior_.dp_prior().alpha_rate || !alpha) return 0.0;
        const double rate = *prior_.dp_prior().alpha_rate;
        return std::log(rate) - rate * *alpha;
    }

    [[nodiscard]] const VnCache* vn() const { return vn_ ? &*vn_ : nullptr; }

    /// min(N, 3 * median of p_K + 50).
    static int initial_t_max(std::size_t n, const KPrior& kp) {
        double cum = 0.0;
        long k = 1;
        for (; k < 100000; ++k) {
            cum += std::exp(kp.log_pmf(k));
            if (cum >= 0.5) break;
        }
        return static_cast<int>(std::min<long>(static_cast<long>(n), 3 * k + 50));
    }

private:
    Eigen::MatrixXd xt_;
    ComponentModel model_;
    PriorSpec prior_;
    std::optional<VnCache> vn_;
};

struct ChainState {
    Partition partition;
    std::vector<ClusterParams> params;
    std::optional<double> alpha;
    double log_post = 0.0;
};

/// Unnormalised log p(z | alpha) + log p(alpha) + sum_k log p(theta_k) + sum_i log f(x_i | theta_{z_i}).
inline double log_posterior(SamplerContext& ctx, const ChainState& s) {
    double lp = ctx.allocation_log_prior(s.partition.sizes(), s.alpha) + ctx.alpha_log_prior(s.alpha);
    for (const auto& th : s.params) lp += prior_logdensity(ctx.model(), th);
    for (std::size_t i = 0; i < s.partition.n(); ++i) {
        lp += ctx.loglik(i, s.params[static_cast<std::size_t>(s.partition[i] - 1)]);
    }
    return lp;
}

/// One cluster holding everything, parameters from the prior, alpha from its hyperprior.
inline ChainState initial_state(SamplerContext& ctx, RngStream& rng) {
    ChainState s;
    s.partition = Partition(std::vector<int>(ctx.n(), 1));
    s.params.push_back(sample_prior(ctx.model(), rng));
    if (!ctx.prior().is_mfm()) {
        const auto& dp = ctx.prior().dp_prior();
        s.alpha = dp.alpha_rate ? rng.exponential(*dp.alpha_rate) : dp.alpha;
    }
    s.log_post = log_posterior(ctx, s);
    return s;
}

// ---------------------------------------------------------------------------
// Split-merge move
// ---------------------------------------------------------------------------

/// Uniform unordered pair of distinct indices, returned with first < second.
inline std::pair<std::size_t, std::size_t> choose_pair(std::size_t n, RngStream& rng) {
    if (n < 2) throw ValidationError("choose_pair needs n >= 2");
    const std::size_t a = rng.index(n);
    std::size_t b = rng.index(n - 1);
    if (b >= a) ++b;
    return {std::min(a, b), std::max(a, b)};
}

struct SplitMergeScratch {
    std::size_t i = 0, j = 0;
    int ci = 0, cj = 0;
    std::vector<std::size_t> s;        ///< ascending
    std::vector<std::size_t> s_tilde;  ///< s without i and j, ascending

    // split launch: side 0 joins i, side 1 joins j
    std::vector<std::uint8_t> split_sides;
    std::optional<ClusterParams> split_a, split_b;
    std::optional<ClusterParams> merge_theta;

    [[nodiscard]] bool same_cluster() const noexcept { return ci == cj; }

    [[nodiscard]] std::vector<std::size_t> side_members(std::span<const std::uint8_t> sides, std::uint8_t which) const {
        std::vector<std::size_t> out;
        out.push_back(which == 0 ? i : j);
        for (std::size_t k = 0; k < s_tilde.size(); ++k) {
            if (sides[k] == which) out.push_back(s_tilde[k]);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    [[nodiscard]] std::vector<std::uint8_t> original_sides(const Partition& z) const {
        std::vector<std::uint8_t> out(s_tilde.size());
        for (std::size_t k = 0; k < s_tilde.size(); ++k) out[k] = z[s_tilde[k]] == ci ? 0 : 1;
        return out;
    }
};

/// Orients the pair so that z_i <= z_j and collects S and S-tilde.
inline SplitMergeScratch make_scratch(const ChainState& state, std::pair<std::size_t, std::size_t> pair) {
    SplitMergeScratch sc;
    const auto& z = state.partition;
    sc.i = pair.first;
    sc.j = pair.second;
    if (z[sc.i] > z[sc.j]) std::swap(sc.i, sc.j);
    sc.ci = z[sc.i];
    sc.cj = z[sc.j];
    for (std::size_t l = 0; l < z.n(); ++l) {
        if (z[l] == sc.ci || z[l] == sc.cj) {
            sc.s.push_back(l);
            if (l != sc.i && l != sc.j) sc.s_tilde.push_back(l);
        }
    }
    return sc;
}

inline void build_merge_launch(const SamplerContext& ctx, SplitMergeScratch& sc, int n_merge, RngStream& rng) {
    const SuffStats st = ctx.stats(sc.s);
    ClusterParams th = sample_prior(ctx.model(), rng);
    for (int r = 0; r < n_merge; ++r) th = gibbs_update(ctx.model(), th, st, rng).params;
    sc.merge_theta = std::move(th);
}

/// Sequential two-way reallocation of S-tilde in ascending order. With
/// `target` set, the allocation is forced and only its density is returned.
inline double restricted_gibbs_scan(const SamplerContext& ctx, const SplitMergeScratch& sc,
                                    std::vector<std::uint8_t>& sides, const ClusterParams& theta_a,
                                    const ClusterParams& theta_b, RngStream* rng,
                                    std::span<const std::uint8_t> target = {}) {
    const double off = ctx.count_offset();
    double n_b = 1.0;
    for (auto v : sides) n_b += v;
    double n_a = static_cast<double>(sc.s.size()) - n_b;
    double logq = 0.0;
    for (std::size_t k = 0; k < sc.s_tilde.size(); ++k) {
        const std::size_t l = sc.s_tilde[k];
        if (sides[k] == 0) n_a -= 1.0;
        else n_b -= 1.0;
        const double wa = std::log(n_a + off) + ctx.loglik(l, theta_a);
        const double wb = std::log(n_b + off) + ctx.loglik(l, theta_b);
        const double lse = log_add_exp(wa, wb);
        if (!std::isfinite(lse)) throw NumericDegeneracyError("restricted Gibbs weights are both zero");
        std::uint8_t pick;
        if (!target.empty()) {
            pick = target[k];
        } else {
            pick = std::log(rng->uniform()) < wa - lse ? 0 : 1;
        }
        logq += (pick == 0 ? wa : wb) - lse;
        sides[k] = pick;
        if (pick == 0) n_a += 1.0;
        else n_b += 1.0;
    }
    return logq;
}

inline void build_split_launch(const SamplerContext& ctx, SplitMergeScratch& sc, int n_split, RngStream& rng) {
    sc.split_sides.assign(sc.s_tilde.size(), 0);
    for (auto& v : sc.split_sides) v = rng.bernoulli(0.5) ? 0 : 1;
    ClusterParams a = sample_prior(ctx.model(), rng);
    ClusterParams b = sample_prior(ctx.model(), rng);
    for (int r = 0; r < n_split; ++r) {
        restricted_gibbs_scan(ctx, sc, sc.split_sides, a, b, &rng);
        a = gibbs_update(ctx.model(), a, ctx.stats(sc.side_members(sc.split_sides, 0)), rng).params;
        b = gibbs_update(ctx.model(), b, ctx.stats(sc.side_members(sc.split_sides, 1)), rng).params;
    }
    sc.split_a = std::move(a);
    sc.split_b = std::move(b);
}

struct Proposal {
    bool split = false;
    std::vector<std::uint8_t> sides;  ///< split only
    ClusterParams a;                  ///< merged cluster, or the i side of a split
    std::optional<ClusterParams> b;   ///< j side of a split
    double forward_log_q = 0.0;
};

inline Proposal propose_merge(const SamplerContext& ctx, const SplitMergeScratch& sc, RngStream& rng) {
    if (sc.same_cluster()) throw ValidationError("propose_merge needs z_i != z_j");
    auto g = gibbs_update(ctx.model(), *sc.merge_theta, ctx.stats(sc.s), rng, SweepMode::proposal);
    Proposal p;
    p.split = false;
    p.a = std::move(g.params);
    p.forward_log_q = g.log_density;
    return p;
}

inline Proposal propose_split(const SamplerContext& ctx, const SplitMergeScratch& sc, RngStream& rng) {
    if (!sc.same_cluster()) throw ValidationError("propose_split needs z_i == z_j");
    Proposal p;
    p.split = true;
    p.sides = sc.split_sides;
    const double scan = restricted_gibbs_scan(ctx, sc, p.sides, *sc.split_a, *sc.split_b, &rng);
    auto ga = gibbs_update(ctx.model(), *sc.split_a, ctx.stats(sc.side_members(p.sides, 0)), rng, SweepMode::proposal);
    auto gb = gibbs_update(ctx.model(), *sc.split_b, ctx.stats(sc.side_members(p.sides, 1)), rng, SweepMode::proposal);
    p.a = std::move(ga.params);
    p.b = std::move(gb.params);
    p.forward_log_q = scan + ga.log_density + gb.log_density;
    return p;
}

/// Density of the reverse move from the proposal back to the current state.
inline double reverse_log_q(const SamplerContext& ctx, const ChainState& state, const SplitMergeScratch& sc,
                            const Proposal& p) {
    const auto ci = static_cast<std::size_t>(sc.ci - 1);
    if (p.split) {
        return transition_logdensity(ctx.model(), *sc.merge_theta, state.params[ci], ctx.stats(sc.s), SweepMode::proposal);
    }
    const auto cj = static_cast<std::size_t>(sc.cj - 1);
    const auto original = sc.original_sides(state.partition);
    auto sides = sc.split_sides;
    double lq = restricted_gibbs_scan(ctx, sc, sides, *sc.split_a, *sc.split_b, nullptr, original);
    lq += transition_logdensity(ctx.model(), *sc.split_a, state.params[ci], ctx.stats(sc.side_members(original, 0)),
                                SweepMode::proposal);
    lq += transition_logdensity(ctx.model(), *sc.split_b, state.params[cj], ctx.stats(sc.side_members(original, 1)),
                                SweepMode::proposal);
    return lq;
}

/// log posterior(proposal) - log posterior(state), evaluated over S and the affected clusters only.
inline double proposal_log_post_delta(SamplerContext& ctx, const ChainState& state, const SplitMergeScratch& sc,
                                      const Proposal& p) {
    const auto& model = ctx.model();
    const auto ci = static_cast<std::size_t>(sc.ci - 1);
    std::vector<int> sizes = state.partition.sizes();
    const double old_alloc = ctx.allocation_log_prior(sizes, state.alpha);
    double delta = 0.0;
    if (p.split) {
        const auto ma = sc.side_members(p.sides, 0);
        const auto mb = sc.side_members(p.sides, 1);
        sizes[ci] = static_cast<int>(ma.size());
        sizes.push_back(static_cast<int>(mb.size()));
        delta += prior_logdensity(model, p.a) + prior_logdensity(model, *p.b) -
                 prior_logdensity(model, state.params[ci]);
        for (std::size_t l : ma) delta += ctx.loglik(l, p.a);
        for (std::size_t l : mb) delta += ctx.loglik(l, *p.b);
        for (std::size_t l : sc.s) delta -= ctx.loglik(l, state.params[ci]);
    } else {
        const auto cj = static_cast<std::size_t>(sc.cj - 1);
        sizes[ci] += sizes[cj];
        sizes.erase(sizes.begin() + static_cast<std::ptrdiff_t>(cj));
        delta += prior_logdensity(model, p.a) - prior_logdensity(model, state.params[ci]) -
                 prior_logdensity(model, state.params[cj]);
        for (std::size_t l : sc.s) {
            delta += ctx.loglik(l, p.a) -
                     ctx.loglik(l, state.params[static_cast<std::size_t>(state.partition[l] - 1)]);
        }
    }
    return delta + ctx.allocation_log_prior(sizes, state.alpha) - old_alloc;
}

/// Applies an accepted proposal. Split: the j side becomes cluster T + 1.
/// Merge: cluster z_j is removed and higher labels shift down by one.
inline void apply_proposal(ChainState& state, const SplitMergeScratch& sc, Proposal p, double delta) {
    std::vector<int> labels = state.partition.labels();
    const auto ci = static_cast<std::size_t>(sc.ci - 1);
    if (p.split) {
        const int fresh = state.partition.t() + 1;
        labels[sc.j] = fresh;
        for (std::size_t k = 0; k < sc.s_tilde.size(); ++k) {
            if (p.sides[k] == 1) labels[sc.s_tilde[k]] = fresh;
        }
        state.params[ci] = std::move(p.a);
        state.params.push_back(std::move(*p.b));
    } else {
        for (auto& l : labels) {
            if (l == sc.cj) l = sc.ci;
            else if (l > sc.cj) --l;
        }
        state.params[ci] = std::move(p.a);
        state.params.erase(state.params.begin() + (sc.cj - 1));
    }
    state.partition = Partition(std::move(labels));
    state.log_post += delta;
}

struct MoveStats {
    long split_proposed = 0;
    long split_accepted = 0;
    long merge_proposed = 0;
    long merge_accepted = 0;
    long atom_rejects = 0;       ///< final launch sweep stayed put in a nested Metropolis step
    long nonfinite_rejects = 0;  ///< NaN or +inf acceptance ratio

    MoveStats& operator+=(const MoveStats& o) {
        split_proposed += o.split_proposed;
        split_accepted += o.split_accepted;
        merge_proposed += o.merge_proposed;
        merge_accepted += o.merge_accepted;
        atom_rejects += o.atom_rejects;
        nonfinite_rejects += o.nonfinite_rejects;
        return *this;
    }

    [[nodiscard]] double split_rate() const {
        return split_proposed == 0 ? 0.0 : static_cast<double>(split_accepted) / static_cast<double>(split_proposed);
    }

    [[nodiscard]] double merge_rate() const {
        return merge_proposed == 0 ? 0.0 : static_cast<double>(merge_accepted) / static_cast<double>(merge_proposed);
    }

    [[nodiscard]] double acceptance_rate() const {
        const long prop = split_proposed + merge_proposed;
        return prop == 0 ? 0.0 : static_cast<double>(split_accepted + merge_accepted) / static_cast<double>(prop);
    }
};

/// Metropolis-Hastings decision on a proposal; the state is left untouched on rejection.
inline bool accept(SamplerContext& ctx, ChainState& state, const SplitMergeScratch& sc, Proposal p,
                   double reverse_q, MoveStats& stats, RngStream& rng) {
    if (p.forward_log_q == kNegInf) {
        ++stats.atom_rejects;
        return false;
    }
    const double delta = proposal_log_post_delta(ctx, state, sc, p);
    const double log_a = reverse_q - p.forward_log_q + delta;
    if (std::isnan(log_a) || log_a == std::numeric_limits<double>::infinity()) {
        ++stats.nonfinite_rejects;
        return false;
    }
    if (log_a < 0.0 && !(std::log(rng.uniform()) < log_a)) return false;
    if (p.split) ++stats.split_accepted;
    else ++stats.merge_accepted;
    apply_proposal(state, sc, std::move(p), delta);
    return true;
}

/// Steps 1-8: one split or merge proposal and its accept/reject decision.
inline bool split_merge_move(SamplerContext& ctx, ChainState& state, const SplitMergeConfig& cfg, MoveStats& stats,
                             RngStream& rng) {
    if (ctx.n() < 2) return false;
    auto sc = make_scratch(state, choose_pair(ctx.n(), rng));
    build_merge_launch(ctx, sc, cfg.n_merge, rng);
    build_split_launch(ctx, sc, cfg.n_split, rng);
    Proposal p;
    if (sc.same_cluster()) {
        ++stats.split_proposed;
        p = propose_split(ctx, sc, rng);
    } else {
        ++stats.merge_proposed;
        p = propose_merge(ctx, sc, rng);
    }
    const double rev = p.forward_log_q == kNegInf ? 0.0 : reverse_log_q(ctx, state, sc, p);
    return accept(ctx, state, sc, std::move(p), rev, stats, rng);
}

/// One conditional parameter sweep over every occupied cluster.
inline void refresh_params(const SamplerContext& ctx, ChainState& state, RngStream& rng) {
    const auto members = state.partition.members();
    for (std::size_t k = 0; k < members.size(); ++k) {
        state.params[k] = gibbs_update(ctx.model(), state.params[k], ctx.stats(members[k]), rng).params;
    }
}

/// One Gibbs pass over the observations whose cluster has other members; each is
/// reallocated among the occupied clusters given the parameters, so T is unchanged.
inline void allocation_scan(const SamplerContext& ctx, ChainState& state, RngStream& rng) {
    std::vector<int> z = state.partition.labels();
    std::vector<int> sizes = state.partition.sizes();
    const std::size_t t = sizes.size();
    if (t < 2) return;
    const double offset = ctx.count_offset();
    std::vector<double> logw(t);
    for (std::size_t l = 0; l < z.size(); ++l) {
        const auto own = static_cast<std::size_t>(z[l] - 1);
        if (sizes[own] < 2) continue;
        --sizes[own];
        double top = kNegInf;
        for (std::size_t k = 0; k < t; ++k) {
            logw[k] = std::log(static_cast<double>(sizes[k]) + offset) + ctx.loglik(l, state.params[k]);
            top = std::max(top, logw[k]);
        }
        double total = 0.0;
        for (auto& w : logw) total += (w = std::exp(w - top));
        double u = rng.uniform() * total;
        std::size_t pick = t - 1;
        for (std::size_t k = 0; k < t; ++k) {
            if ((u -= logw[k]) < 0.0) {
                pick = k;
                break;
            }
        }
        z[l] = static_cast<int>(pick) + 1;
        ++sizes[pick];
    }
    state.partition = Partition(std::move(z));
}

/// Absolute gap between the cached and the recomputed log-posterior.
inline double audit_log_posterior(SamplerContext& ctx, const ChainState& state) {
    return std::abs(log_posterior(ctx, state) - state.log_post);
}

/// Split-merge move, allocation scans, parameter refresh, then the alpha update when alpha is random.
inline void sweep(SamplerContext& ctx, ChainState& state, const SplitMergeConfig& cfg, MoveStats& stats,
                  RngStream& rng) {
    split_merge_move(ctx, state, cfg, stats, rng);
    if (cfg.audit) {
        const double gap = audit_log_posterior(ctx, state);
        if (!(gap <= 1e-8 * std::max(1.0, std::abs(state.log_post)))) {
            throw NumericDegeneracyError("cached log-posterior drifted from recomputation by " + std::to_string(gap));
        }
    }
    for (int r = 0; r < cfg.alloc_scans_per_iter; ++r) allocation_scan(ctx, state, rng);
    for (int r = 0; r < cfg.param_refresh_per_iter; ++r) refresh_params(ctx, state, rng);
    if (state.alpha && ctx.prior().dp_prior().alpha_rate) {
        state.alpha = alpha_update(*state.alpha, state.partition.t(), ctx.n(), ctx.prior().dp_prior().alpha_rate, rng);
    }
    state.log_post = log_posterior(ctx, state);
}

// ---------------------------------------------------------------------------
// Chain driver
// ---------------------------------------------------------------------------

struct ChainResult {
    SampleTrace trace;
    MoveStats stats;
    bool ok = true;
    std::string error;
};

struct RunResult {
    std::vector<ChainResult> chains;

    [[nodiscard]] std::vector<SampleTrace> traces() const {
        std::vector<SampleTrace> out;
        for (const auto& c : chains) {
            if (c.ok) out.push_back(c.trace);
        }
        return out;
    }

    [[nodiscard]] bool all_ok() const {
        return std::all_of(chains.begin(), chains.end(), [](const ChainResult& c) { return c.ok; });
    }

    [[nodiscard]] MoveStats total_stats() const {
        MoveStats s;
        for (const auto& c : chains) s += c.stats;
        return s;
    }
};

/// Runs one chain with stream id `chain_index`; the trace carries chain id chain_index + 1.
inline ChainResult run_chain(const Dataset& data, const ComponentModel& model, const PriorSpec& prior,
                             const SplitMergeConfig& cfg, int chain_index) {
    ChainResult res;
    res.trace = SampleTrace(chain_index + 1);
    try {
        SamplerContext ctx(data, model, prior);
        RngStream rng(cfg.seed, static_cast<std::uint64_t>(chain_index));
        ChainState state = initial_state(ctx, rng);
        for (long it = 1; it <= cfg.iters; ++it) {
            sweep(ctx, state, cfg, res.stats, rng);
            if (cfg.keeps(it)) res.trace.push({it, state.partition, state.log_post, state.alpha});
        }
    } catch (const NumericDegeneracyError& e) {
        res.ok = false;
        res.error = e.what();
    }
    return res;
}

/// Independent chains run concurrently; a numeric failure stops only its own chain.
inline RunResult run(const Dataset& data, ModelKind kind, const PriorSpec& prior, const SplitMergeConfig& cfg) {
    cfg.validate();
    prior.validate();
    const ComponentModel model = ComponentModel::for_dataset(kind, data);
    std::vector<std::future<ChainResult>> futures;
    futures.reserve(static_cast<std::size_t>(cfg.chains));
    for (int c = 0; c < cfg.chains; ++c) {
        futures.push_back(std::async(std::launch::async, [&, c] { return run_chain(data, model, prior, cfg, c); }));
    }
    RunResult out;
    for (auto& f : futures) out.chains.push_back(f.get());
    return out;
}

// ---------------------------------------------------------------------------
// Posterior on the number of components
// ---------------------------------------------------------------------------

/// Posterior over K (MFM, mixing p(K | T) over the sampled T) or over T (DP).
struct KDistribution {
    std::map<long, double> prob;

    /// Smallest k attaining the maximal probability.
    [[nodiscard]] long mode() const {
        if (prob.empty()) throw ValidationError("empty K distribution");
        long best = prob.begin()->first;
        double bp = -1.0;
        for (const auto& [k, p] : prob) {
            if (p > bp) {
                bp = p;
                best = k;
            }
        }
        return best;
    }
};

inline KDistribution posterior_k(std::span<const SampleTrace> traces, const PriorSpec& prior, std::size_t n) {
    std::map<int, long> t_counts;
    long total = 0;
    for (const auto& tr : traces) {
        for (const auto& r : tr.records()) {
            ++t_counts[r.t()];
            ++total;
        }
    }
    if (total == 0) throw ValidationError("no samples to summarise");
    KDistribution out;
    if (!prior.is_mfm()) {
        for (const auto& [t, c] : t_counts) out.prob[t] = static_cast<double>(c) / static_cast<double>(total);
        return out;
    }
    const auto& m = prior.mfm_prior();
    const VnTable vn = compute_vn_table(n, m.gamma, m.k_prior, t_counts.rbegin()->first);
    for (const auto& [t, c] : t_counts) {
        const KPosterior kp = k_posterior_given_t(t, vn);
        const double w = static_cast<double>(c) / static_cast<double>(total);
        for (std::size_t q = 0; q < kp.k.size(); ++q) out.prob[kp.k[q]] += w * kp.prob[q];
    }
    return out;
}

}  // namespace bnpmix
