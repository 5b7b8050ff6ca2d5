#pragma once

#include "bnpmix/core.hpp"
#include "bnpmix/linalg.hpp"
#include "bnpmix/rng.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

namespace bnpmix {

inline constexpr double kNegInfDensity = -std::numeric_limits<double>::infinity();

enum class ModelKind { full, hier, diag };

inline std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::full: return "mvn-full";
        case ModelKind::hier: return "mvn-full-hier";
        case ModelKind::diag: return "mvn-diag";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "mvn-full") return ModelKind::full;
    if (s == "mvn-full-hier") return ModelKind::hier;
    if (s == "mvn-diag") return ModelKind::diag;
    throw ValidationError("unknown model '" + std::string(s) + "' (expected mvn-full, mvn-full-hier or mvn-diag)");
}

/// Per-cluster hyper-state of the hierarchical full-covariance model.
struct HyperState {
    Eigen::VectorXd m;
    Eigen::MatrixXd c;
    double nu = 0.0;
    Eigen::MatrixXd w;
};

/// Parameters of one Gaussian cluster. Cached factors stay in sync because
/// the fields can only be set through the factory functions.
class ClusterParams {
public:
    ClusterParams() = default;

    static ClusterParams full(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
        ClusterParams p;
        p.kind_ = ModelKind::full;
        p.mean_ = std::move(mean);
        p.cov_factor_ = factor_spd(cov);
        p.cov_ = std::move(cov);
        return p;
    }

    static ClusterParams hier(Eigen::VectorXd mean, Eigen::MatrixXd cov, HyperState hyper) {
        ClusterParams p = full(std::move(mean), std::move(cov));
        p.kind_ = ModelKind::hier;
        p.hyper_ = std::move(hyper);
        return p;
    }

    static ClusterParams diag(Eigen::VectorXd mean, Eigen::VectorXd precision) {
        if (!(precision.array() > 0.0).all()) throw NumericDegeneracyError("diagonal precisions must be positive");
        ClusterParams p;
        p.kind_ = ModelKind::diag;
        p.mean_ = std::move(mean);
        p.precision_ = std::move(precision);
        p.diag_norm_ = 0.5 * (p.precision_.array().log().sum() - static_cast<double>(p.mean_.size()) * kLog2Pi);
        return p;
    }

    [[nodiscard]] ModelKind kind() const noexcept { return kind_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return mean_.size(); }
    [[nodiscard]] const Eigen::VectorXd& mean() const noexcept { return mean_; }
    [[nodiscard]] const Eigen::MatrixXd& cov() const noexcept { return cov_; }
    [[nodiscard]] const SpdFactor& cov_factor() const noexcept { return cov_factor_; }
    [[nodiscard]] const Eigen::VectorXd& precision() const noexcept { return precision_; }
    [[nodiscard]] const HyperState& hyper() const { return *hyper_; }

    /// Gaussian log-density of one observation.
    [[nodiscard]] double loglik(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        if (x.size() != mean_.size()) throw ValidationError("observation dimension does not match the cluster");
        if (kind_ == ModelKind::diag) {
            return diag_norm_ - 0.5 * (precision_.array() * (x - mean_).array().square()).sum();
        }
        return mvn_logpdf(x, mean_, cov_factor_);
    }

    friend bool operator==(const ClusterParams& a, const ClusterParams& b) {
        if (a.kind_ != b.kind_ || a.mean_ != b.mean_) return false;
        if (a.kind_ == ModelKind::diag) return a.precision_ == b.precision_;
        if (a.cov_ != b.cov_) return false;
        if (a.kind_ == ModelKind::hier) {
            return a.hyper_->m == b.hyper_->m && a.hyper_->c == b.hyper_->c && a.hyper_->nu == b.hyper_->nu &&
                   a.hyper_->w == b.hyper_->w;
        }
        return true;
    }

private:
    ModelKind kind_ = ModelKind::full;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    SpdFactor cov_factor_;
    Eigen::VectorXd precision_;
    double diag_norm_ = 0.0;
    std::optional<HyperState> hyper_;
};

/// Count, sum and raw second moment of a member set.
struct SuffStats {
    std::size_t n = 0;
    Eigen::VectorXd sum;
    Eigen::MatrixXd outer;

    explicit SuffStats(Eigen::Index p = 0) : sum(Eigen::VectorXd::Zero(p)), outer(Eigen::MatrixXd::Zero(p, p)) {}

    void add(const Eigen::Ref<const Eigen::VectorXd>& x) {
        ++n;
        sum += x;
        outer.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }

    /// Members given as 0-based row indices of the dataset.
    static SuffStats of(const Dataset& data, std::span<const std::size_t> members) {
        SuffStats s(static_cast<Eigen::Index>(data.dim()));
        for (std::size_t i : members) s.add(data.row(i).transpose());
        s.finish();
        return s;
    }

    /// Members given as columns of a p x N matrix.
    static SuffStats of_columns(const Eigen::MatrixXd& xt, std::span<const std::size_t> members) {
        SuffStats s(xt.rows());
        for (std::size_t i : members) s.add(xt.col(static_cast<Eigen::Index>(i)));
        s.finish();
        return s;
    }

    void finish() { outer.triangularView<Eigen::StrictlyUpper>() = outer.transpose(); }

    /// sum_i (x_i - mu)(x_i - mu)^T
    [[nodiscard]] Eigen::MatrixXd scatter_about(const Eigen::VectorXd& mu) const {
        Eigen::MatrixXd s = outer - mu * sum.transpose() - sum * mu.transpose() + static_cast<double>(n) * mu * mu.transpose();
        return 0.5 * (s + s.transpose());
    }
};

// ---------------------------------------------------------------------------
// Model definitions
// ---------------------------------------------------------------------------

/// Empirical-Bayes hyperparameters shared by the full-covariance models.
struct EmpiricalPrior {
    Eigen::VectorXd mu_hat;
    Eigen::MatrixXd c_hat;
    SpdFactor c_hat_factor;
    Eigen::MatrixXd c_hat_inv;

    EmpiricalPrior() = default;
    EmpiricalPrior(Eigen::VectorXd mu, Eigen::MatrixXd c)
        : mu_hat(std::move(mu)), c_hat(std::move(c)), c_hat_factor(factor_spd(c_hat)), c_hat_inv(c_hat_factor.inverse()) {}

    /// Sample mean and covariance with denominator N.
    static EmpiricalPrior from_dataset(const Dataset& data) {
        const Eigen::VectorXd mu = data.values().colwise().mean().transpose();
        const Eigen::MatrixXd centered = data.values().rowwise() - mu.transpose();
        Eigen::MatrixXd c = centered.transpose() * centered / static_cast<double>(data.n());
        return EmpiricalPrior(mu, 0.5 * (c + c.transpose()));
    }

    [[nodiscard]] int p() const noexcept { return static_cast<int>(mu_hat.size()); }
};

/// mean ~ N(mu_hat, C_hat), covariance ~ IW(p, C_hat).
struct FullCovModel {
    EmpiricalPrior prior;
};

/// Per-cluster hyper-state (m, C, nu, W) under
/// m ~ N(mu_hat, C_hat), C ~ IW(p, C_hat), nu - p + 1 ~ Gamma(2, rate 2), W ~ IW(p, C_hat);
/// mean ~ N(m, C), covariance ~ IW(nu, W).
struct HierFullCovModel {
    EmpiricalPrior prior;
    double nu_step_sd = 0.5;  ///< random-walk sd on log(nu - p + 1)
};

/// Per dimension: precision ~ Gamma(1, 1), mean | precision ~ N(0, 1/precision).
struct DiagModel {
    int p = 1;
};

class ComponentModel {
public:
    using Variant = std::variant<FullCovModel, HierFullCovModel, DiagModel>;

    ComponentModel() : v_(DiagModel{}) {}
    explicit ComponentModel(Variant v) : v_(std::move(v)) {}

    static ComponentModel for_dataset(ModelKind kind, const Dataset& data) {
        switch (kind) {
            case ModelKind::full: return ComponentModel(FullCovModel{EmpiricalPrior::from_dataset(data)});
            case ModelKind::hier: return ComponentModel(HierFullCovModel{EmpiricalPrior::from_dataset(data), 0.5});
            case ModelKind::diag:
                if (!data.standardized()) throw ValidationError("the diagonal model requires standardized data");
                return ComponentModel(DiagModel{static_cast<int>(data.dim())});
        }
        throw ValidationError("unknown model kind");
    }

    [[nodiscard]] ModelKind kind() const noexcept {
        return std::visit(
            [](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, FullCovModel>) return ModelKind::full;
                else if constexpr (std::is_same_v<T, HierFullCovModel>) return ModelKind::hier;
                else return ModelKind::diag;
            },
            v_);
    }

    [[nodiscard]] int dim() const noexcept {
        return std::visit(
            [](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, DiagModel>) return m.p;
                else return m.prior.p();
            },
            v_);
    }

    [[nodiscard]] const Variant& variant() const noexcept { return v_; }

private:
    Variant v_;
};

/// mcmc: nested Metropolis steps accept or reject, so the sweep leaves the
/// conditional posterior invariant. proposal: nested blocks take their raw
/// proposal draw, giving an atom-free density for split-merge proposals.
/// The two modes coincide for models without nested Metropolis blocks.
enum class SweepMode { mcmc, proposal };

struct GibbsResult {
    ClusterParams params;
    double log_density = 0.0;  ///< -inf when an inner Metropolis step stayed put
};

// ---------------------------------------------------------------------------
// Full conditionals
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kNuShape = 2.0;
inline constexpr double kNuRate = 2.0;

inline MvnPrecision mean_conditional(const Eigen::MatrixXd& prior_prec, const Eigen::VectorXd& prior_mean,
                                     const SpdFactor& cov, const SuffStats& st) {
    Eigen::MatrixXd q = prior_prec;
    Eigen::VectorXd b = prior_prec * prior_mean;
    if (st.n > 0) {
        const Eigen::MatrixXd cov_inv = cov.inverse();
        q += static_cast<double>(st.n) * cov_inv;
        b += cov_inv * st.sum;
    }
    return MvnPrecision::from_canonical(0.5 * (q + q.transpose()), b);
}

inline InverseWishart scale_conditional(double df, const Eigen::MatrixXd& scale, const Eigen::VectorXd& mu,
                                        const SuffStats& st) {
    Eigen::MatrixXd s = scale;
    if (st.n > 0) s += st.scatter_about(mu);
    return InverseWishart{df + static_cast<double>(st.n), factor_spd(s)};
}

inline InverseWishart hyper_prior_iw(const EmpiricalPrior& pr) { return InverseWishart{static_cast<double>(pr.p()), pr.c_hat_factor}; }

/// log p(nu | Sigma, W) up to a constant.
inline double nu_log_target(double nu, int p, const SpdFactor& sigma, const SpdFactor& w) {
    return InverseWishart{nu, w}.logpdf(sigma) + gamma_logpdf(nu - p + 1.0, kNuShape, kNuRate);
}

struct DiagBlock {
    double shape, rate;  // precision | mean
};

inline double diag_precision_rate(double mu, double n, double sum, double sumsq) {
    return 1.0 + 0.5 * (mu * mu + sumsq - 2.0 * mu * sum + n * mu * mu);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Prior draws and densities
// ---------------------------------------------------------------------------

inline ClusterParams sample_prior(const ComponentModel& model, RngStream& rng) {
    return std::visit(
        [&rng](const auto& m) -> ClusterParams {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, FullCovModel>) {
                Eigen::VectorXd mu = mvn_sample(m.prior.mu_hat, m.prior.c_hat_factor, rng);
                return ClusterParams::full(std::move(mu), detail::hyper_prior_iw(m.prior).sample(rng));
            } else if constexpr (std::is_same_v<T, HierFullCovModel>) {
                const int p = m.prior.p();
                HyperState h;
                h.m = mvn_sample(m.prior.mu_hat, m.prior.c_hat_factor, rng);
                h.c = detail::hyper_prior_iw(m.prior).sample(rng);
                h.nu = p - 1.0 + rng.gamma(detail::kNuShape, detail::kNuRate);
                h.w = detail::hyper_prior_iw(m.prior).sample(rng);
                Eigen::VectorXd mu = mvn_sample(h.m, factor_spd(h.c), rng);
                Eigen::MatrixXd sigma = InverseWishart{h.nu, factor_spd(h.w)}.sample(rng);
                return ClusterParams::hier(std::move(mu), std::move(sigma), std::move(h));
            } else {
                Eigen::VectorXd mu(m.p), lam(m.p);
                for (int d = 0; d < m.p; ++d) {
                    lam[d] = rng.gamma(1.0, 1.0);
                    mu[d] = rng.normal() / std::sqrt(lam[d]);
                }
                return ClusterParams::diag(std::move(mu), std::move(lam));
            }
        },
        model.variant());
}

inline double prior_logdensity(const ComponentModel& model, const ClusterParams& th) {
    return std::visit(
        [&th](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, FullCovModel>) {
                return mvn_logpdf(th.mean(), m.prior.mu_hat, m.prior.c_hat_factor) +
                       detail::hyper_prior_iw(m.prior).logpdf(th.cov_factor());
            } else if constexpr (std::is_same_v<T, HierFullCovModel>) {
                const auto& h = th.hyper();
                const int p = m.prior.p();
                const auto iw0 = detail::hyper_prior_iw(m.prior);
                const SpdFactor cf = factor_spd(h.c);
                const SpdFactor wf = factor_spd(h.w);
                return mvn_logpdf(h.m, m.prior.mu_hat, m.prior.c_hat_factor) + iw0.logpdf(cf) +
                       gamma_logpdf(h.nu - p + 1.0, detail::kNuShape, detail::kNuRate) + iw0.logpdf(wf) +
                       mvn_logpdf(th.mean(), h.m, cf) + InverseWishart{h.nu, wf}.logpdf(th.cov_factor());
            } else {
                double lp = 0.0;
                for (int d = 0; d < m.p; ++d) {
                    const double lam = th.precision()[d];
                    lp += gamma_logpdf(lam, 1.0, 1.0) + normal_logpdf(th.mean()[d], 0.0, lam);
                }
                return lp;
            }
        },
        model.variant());
}

// ---------------------------------------------------------------------------
// Parameter sweeps
// ---------------------------------------------------------------------------

/// One sweep of conditional updates for a cluster with the given members:
/// mean block, then covariance block, then hyper-blocks (m, C, nu, W).
/// Diagonal model: precision | mean, then mean | precision, per dimension.
/// An empty member set yields a direct prior draw.
inline GibbsResult gibbs_update(const ComponentModel& model, const ClusterParams& from, const SuffStats& st,
                                RngStream& rng, SweepMode mode = SweepMode::mcmc) {
    if (st.n == 0) {
        ClusterParams th = sample_prior(model, rng);
        const double lp = prior_logdensity(model, th);
        return {std::move(th), lp};
    }
    return std::visit(
        [&](const auto& m) -> GibbsResult {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, FullCovModel>) {
                const auto& pr = m.prior;
                const auto mc = detail::mean_conditional(pr.c_hat_inv, pr.mu_hat, from.cov_factor(), st);
                Eigen::VectorXd mu = mc.sample(rng);
                double ld = mc.logpdf(mu);
                const auto sc = detail::scale_conditional(pr.p(), pr.c_hat, mu, st);
                Eigen::MatrixXd sigma = sc.sample(rng);
                ClusterParams th = ClusterParams::full(std::move(mu), std::move(sigma));
                ld += sc.logpdf(th.cov_factor());
                return {std::move(th), ld};
            } else if constexpr (std::is_same_v<T, HierFullCovModel>) {
                const auto& pr = m.prior;
                const int p = pr.p();
                const auto& h0 = from.hyper();
                const SpdFactor c0 = factor_spd(h0.c);
                const auto mc = detail::mean_conditional(c0.inverse(), h0.m, from.cov_factor(), st);
                Eigen::VectorXd mu = mc.sample(rng);
                double ld = mc.logpdf(mu);

                const auto sc = detail::scale_conditional(h0.nu, h0.w, mu, st);
                Eigen::MatrixXd sigma = sc.sample(rng);
                const SpdFactor sigma_f = factor_spd(sigma);
                ld += sc.logpdf(sigma_f);

                HyperState h;
                const auto m_cond = MvnPrecision::from_canonical(pr.c_hat_inv + c0.inverse(),
                                                                 pr.c_hat_inv * pr.mu_hat + c0.inverse() * mu);
                h.m = m_cond.sample(rng);
                ld += m_cond.logpdf(h.m);

                const Eigen::VectorXd dm = mu - h.m;
                const InverseWishart c_cond{p + 1.0, factor_spd(pr.c_hat + dm * dm.transpose())};
                h.c = c_cond.sample(rng);
                ld += c_cond.logpdf(h.c);

                // nu: random walk on u = log(nu - p + 1)
                const SpdFactor w0 = factor_spd(h0.w);
                const double u0 = std::log(h0.nu - p + 1.0);
                const double u1 = u0 + m.nu_step_sd * rng.normal();
                const double nu1 = p - 1.0 + std::exp(u1);
                const double log_a_nu =
                    mode == SweepMode::proposal
                        ? 0.0
                        : std::min(0.0, detail::nu_log_target(nu1, p, sigma_f, w0) -
                                            detail::nu_log_target(h0.nu, p, sigma_f, w0) + u1 - u0);
                if (mode == SweepMode::proposal || std::log(rng.uniform()) < log_a_nu) {
                    h.nu = nu1;
                    ld += normal_logpdf(u1, u0, 1.0 / (m.nu_step_sd * m.nu_step_sd)) - u1 + log_a_nu;
                } else {
                    h.nu = h0.nu;
                    ld = kNegInfDensity;
                }

                // W: independence proposal from the likelihood-conjugate Wishart part
                const Wishart w_prop{h.nu + p + 1.0, sigma_f};
                const auto iw0 = detail::hyper_prior_iw(pr);
                Eigen::MatrixXd w1 = w_prop.sample(rng);
                const SpdFactor w1f = factor_spd(w1);
                const double log_a_w =
                    mode == SweepMode::proposal ? 0.0 : std::min(0.0, iw0.logpdf(w1f) - iw0.logpdf(w0));
                if (mode == SweepMode::proposal || std::log(rng.uniform()) < log_a_w) {
                    h.w = std::move(w1);
                    ld += w_prop.logpdf(w1f) + log_a_w;
                } else {
                    h.w = h0.w;
                    ld = kNegInfDensity;
                }
                ClusterParams th = ClusterParams::hier(std::move(mu), std::move(sigma), std::move(h));
                return {std::move(th), ld};
            } else {
                const double n = static_cast<double>(st.n);
                Eigen::VectorXd mu(m.p), lam(m.p);
                double ld = 0.0;
                for (int d = 0; d < m.p; ++d) {
                    const double sum = st.sum[d];
                    const double sumsq = st.outer(d, d);
                    const double shape = 1.0 + 0.5 * (n + 1.0);
                    const double rate = detail::diag_precision_rate(from.mean()[d], n, sum, sumsq);
                    lam[d] = rng.gamma(shape, rate);
                    ld += gamma_logpdf(lam[d], shape, rate);
                    const double prec = lam[d] * (n + 1.0);
                    const double mean = sum / (n + 1.0);
                    mu[d] = mean + rng.normal() / std::sqrt(prec);
                    ld += normal_logpdf(mu[d], mean, prec);
                }
                return {ClusterParams::diag(std::move(mu), std::move(lam)), ld};
            }
        },
        model.variant());
}

/// Log-density that one gibbs_update sweep in `mode` from `from` lands on `to`.
/// In mcmc mode the hierarchical model counts only the moved branch of the
/// nested Metropolis steps; staying put has no density and gives -inf.
inline double transition_logdensity(const ComponentModel& model, const ClusterParams& from, const ClusterParams& to,
                                    const SuffStats& st, SweepMode mode = SweepMode::mcmc) {
    if (from.kind() != to.kind() || from.dim() != to.dim()) {
        throw ValidationError("transition between incompatible cluster parameters");
    }
    if (st.n == 0) return prior_logdensity(model, to);
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, FullCovModel>) {
                const auto& pr = m.prior;
                const auto mc = detail::mean_conditional(pr.c_hat_inv, pr.mu_hat, from.cov_factor(), st);
                const auto sc = detail::scale_conditional(pr.p(), pr.c_hat, to.mean(), st);
                return mc.logpdf(to.mean()) + sc.logpdf(to.cov_factor());
            } else if constexpr (std::is_same_v<T, HierFullCovModel>) {
                const auto& pr = m.prior;
                const int p = pr.p();
                const auto& h0 = from.hyper();
                const auto& h1 = to.hyper();
                if (mode == SweepMode::mcmc && (h1.nu == h0.nu || h1.w == h0.w)) return kNegInfDensity;
                const SpdFactor c0 = factor_spd(h0.c);
                const auto mc = detail::mean_conditional(c0.inverse(), h0.m, from.cov_factor(), st);
                double ld = mc.logpdf(to.mean());
                ld += detail::scale_conditional(h0.nu, h0.w, to.mean(), st).logpdf(to.cov_factor());
                const auto m_cond = MvnPrecision::from_canonical(pr.c_hat_inv + c0.inverse(),
                                                                 pr.c_hat_inv * pr.mu_hat + c0.inverse() * to.mean());
                ld += m_cond.logpdf(h1.m);
                const Eigen::VectorXd dm = to.mean() - h1.m;
                ld += InverseWishart{p + 1.0, factor_spd(pr.c_hat + dm * dm.transpose())}.logpdf(h1.c);

                const SpdFactor w0 = factor_spd(h0.w);
                const double u0 = std::log(h0.nu - p + 1.0);
                const double u1 = std::log(h1.nu - p + 1.0);
                const double log_a_nu =
                    mode == SweepMode::proposal
                        ? 0.0
                        : std::min(0.0, detail::nu_log_target(h1.nu, p, to.cov_factor(), w0) -
                                            detail::nu_log_target(h0.nu, p, to.cov_factor(), w0) + u1 - u0);
                ld += normal_logpdf(u1, u0, 1.0 / (m.nu_step_sd * m.nu_step_sd)) - u1 + log_a_nu;

                const Wishart w_prop{h1.nu + p + 1.0, to.cov_factor()};
                const auto iw0 = detail::hyper_prior_iw(pr);
                const SpdFactor w1f = factor_spd(h1.w);
                const double log_a_w =
                    mode == SweepMode::proposal ? 0.0 : std::min(0.0, iw0.logpdf(w1f) - iw0.logpdf(w0));
                return ld + w_prop.logpdf(w1f) + log_a_w;
            } else {
                const double n = static_cast<double>(st.n);
                double ld = 0.0;
                for (int d = 0; d < m.p; ++d) {
                    const double sum = st.sum[d];
                    const double shape = 1.0 + 0.5 * (n + 1.0);
                    const double rate = detail::diag_precision_rate(from.mean()[d], n, sum, st.outer(d, d));
                    const double lam = to.precision()[d];
                    ld += gamma_logpdf(lam, shape, rate) + normal_logpdf(to.mean()[d], sum / (n + 1.0), lam * (n + 1.0));
                }
                return ld;
            }
        },
        model.variant());
}

/// Conjugate evidence log p(members) for the diagonal model, in closed form.
inline double marginal_loglik(const ComponentModel& model, const SuffStats& st) {
    const auto* dm = std::get_if<DiagModel>(&model.variant());
    if (dm == nullptr) throw ValidationError("marginal_loglik is only available for the conjugate diagonal model");
    if (st.n == 0) return 0.0;
    const double n = static_cast<double>(st.n);
    double out = 0.0;
    for (int d = 0; d < dm->p; ++d) {
        const double mean = st.sum[d] / n;
        const double ss = std::max(0.0, st.outer(d, d) - n * mean * mean);
        const double a_n = 1.0 + 0.5 * n;
        const double b_n = 1.0 + 0.5 * (ss + n * mean * mean / (1.0 + n));
        out += std::lgamma(a_n) - a_n * std::log(b_n) + 0.5 * (0.0 - std::log(1.0 + n)) - 0.5 * n * kLog2Pi;
    }
    return out;
}

}  // namespace bnpmix
