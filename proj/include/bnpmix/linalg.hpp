#pragma once

#include "bnpmix/core.hpp"
#include "bnpmix/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <numbers>

namespace bnpmix {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Lower Cholesky factor of a symmetric positive definite matrix, A = L L^T.
struct SpdFactor {
    Eigen::MatrixXd lower;
    double logdet = 0.0;

    [[nodiscard]] Eigen::Index dim() const noexcept { return lower.rows(); }

    /// Solves L y = v.
    [[nodiscard]] Eigen::VectorXd solve_lower(const Eigen::Ref<const Eigen::VectorXd>& v) const {
        return lower.triangularView<Eigen::Lower>().solve(v);
    }

    /// A^{-1} b.
    [[nodiscard]] Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& b) const {
        Eigen::VectorXd y = lower.triangularView<Eigen::Lower>().solve(b);
        return lower.transpose().triangularView<Eigen::Upper>().solve(y);
    }

    [[nodiscard]] Eigen::MatrixXd inverse() const {
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim(), dim());
        Eigen::MatrixXd y = lower.triangularView<Eigen::Lower>().solve(id);
        Eigen::MatrixXd inv = lower.transpose().triangularView<Eigen::Upper>().solve(y);
        return 0.5 * (inv + inv.transpose());
    }
};

/// Cholesky with at most one jitter retry of 1e-10 * trace / p on the diagonal.
inline SpdFactor factor_spd(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols() || a.rows() == 0) throw NumericDegeneracyError("factor_spd needs a square matrix");
    if (!a.allFinite()) throw NumericDegeneracyError("matrix has non-finite entries");
    auto attempt = [](const Eigen::MatrixXd& m, SpdFactor& out) {
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() != Eigen::Success) return false;
        out.lower = llt.matrixL();
        const auto diag = out.lower.diagonal();
        if (!(diag.array() > 0.0).all() || !diag.allFinite()) return false;
        out.logdet = 2.0 * diag.array().log().sum();
        return std::isfinite(out.logdet);
    };
    SpdFactor f;
    if (attempt(a, f)) return f;
    const double jitter = 1e-10 * a.trace() / static_cast<double>(a.rows());
    if (jitter > 0.0) {
        Eigen::MatrixXd b = a;
        b.diagonal().array() += jitter;
        if (attempt(b, f)) return f;
    }
    throw NumericDegeneracyError("matrix is not positive definite (factorisation failed after jitter)");
}

inline double log_multi_gamma(int p, double a) {
    double out = 0.25 * p * (p - 1) * std::log(std::numbers::pi);
    for (int j = 1; j <= p; ++j) out += std::lgamma(a + 0.5 * (1 - j));
    return out;
}

/// || L_a^{-1} L_b ||_F^2 = tr(A^{-1} B).
inline double trace_inv_product(const SpdFactor& a, const SpdFactor& b) {
    return a.lower.triangularView<Eigen::Lower>().solve(b.lower).squaredNorm();
}

inline double mvn_logpdf(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& mean,
                         const SpdFactor& cov) {
    const Eigen::VectorXd z = cov.solve_lower(x - mean);
    return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + cov.logdet + z.squaredNorm());
}

inline Eigen::VectorXd mvn_sample(const Eigen::VectorXd& mean, const SpdFactor& cov, RngStream& rng) {
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean + cov.lower * z;
}

/// Normal specified by its precision matrix Q (mean, Q = L L^T).
struct MvnPrecision {
    Eigen::VectorXd mean;
    SpdFactor precision;

    /// Mean = Q^{-1} b.
    static MvnPrecision from_canonical(const Eigen::MatrixXd& q, const Eigen::VectorXd& b) {
        MvnPrecision out;
        out.precision = factor_spd(q);
        out.mean = out.precision.solve(b);
        return out;
    }

    Eigen::VectorXd sample(RngStream& rng) const {
        Eigen::VectorXd z(mean.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
        return mean + precision.lower.transpose().triangularView<Eigen::Upper>().solve(z);
    }

    [[nodiscard]] double logpdf(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        const Eigen::VectorXd r = precision.lower.transpose() * (x - mean);
        return -0.5 * (static_cast<double>(x.size()) * kLog2Pi - precision.logdet + r.squaredNorm());
    }
};

namespace detail {

/// Lower-triangular Bartlett factor A with A A^T ~ Wishart(df, I).
inline Eigen::MatrixXd bartlett_factor(Eigen::Index p, double df, RngStream& rng) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        // tiny degrees of freedom can underflow the chi-square draw to zero
        a(i, i) = std::sqrt(std::max(rng.chi_squared(df - static_cast<double>(i)), 1e-100));
        for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
    }
    return a;
}

}  // namespace detail

/// Wishart(df, scale) with E[W] = df * scale.
struct Wishart {
    double df = 0.0;
    SpdFactor scale;

    Eigen::MatrixXd sample(RngStream& rng) const {
        const Eigen::MatrixXd la = scale.lower * detail::bartlett_factor(scale.dim(), df, rng);
        Eigen::MatrixXd w = la * la.transpose();
        return 0.5 * (w + w.transpose());
    }

    [[nodiscard]] double logpdf(const Eigen::MatrixXd& w) const { return logpdf(factor_spd(w)); }

    [[nodiscard]] double logpdf(const SpdFactor& w) const {
        const int p = static_cast<int>(scale.dim());
        return 0.5 * (df - p - 1) * w.logdet - 0.5 * trace_inv_product(scale, w) - 0.5 * df * p * std::numbers::ln2 -
               0.5 * df * scale.logdet - log_multi_gamma(p, 0.5 * df);
    }
};

/// InverseWishart(df, scale) with density proportional to
/// |S|^{-(df+p+1)/2} exp(-tr(scale S^{-1}) / 2).
struct InverseWishart {
    double df = 0.0;
    SpdFactor scale;

    Eigen::MatrixXd sample(RngStream& rng) const {
        // S = W^{-1}, W ~ Wishart(df, scale^{-1}) = L^{-T} A A^T L^{-1}
        const Eigen::MatrixXd a = detail::bartlett_factor(scale.dim(), df, rng);
        const Eigen::MatrixXd a_inv_t =
            a.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(a.rows(), a.cols())).transpose();
        const Eigen::MatrixXd b = scale.lower * a_inv_t;
        Eigen::MatrixXd s = b * b.transpose();
        return 0.5 * (s + s.transpose());
    }

    [[nodiscard]] double logpdf(const Eigen::MatrixXd& s) const { return logpdf(factor_spd(s)); }

    [[nodiscard]] double logpdf(const SpdFactor& s) const {
        const int p = static_cast<int>(scale.dim());
        return 0.5 * df * scale.logdet - 0.5 * df * p * std::numbers::ln2 - log_multi_gamma(p, 0.5 * df) -
               0.5 * (df + p + 1) * s.logdet - 0.5 * trace_inv_product(s, scale);
    }
};

inline double gamma_logpdf(double x, double shape, double rate) {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double normal_logpdf(double x, double mean, double precision) {
    const double d = x - mean;
    return 0.5 * (std::log(precision) - kLog2Pi - precision * d * d);
}

}  // namespace bnpmix
