#pragma once

#include "bnpmix/core.hpp"
#include "bnpmix/linalg.hpp"
#include "bnpmix/priors.hpp"
#include "bnpmix/rng.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace bnpmix {

/// Finite Gaussian mixture used to simulate data.
class MixtureSpec {
public:
    MixtureSpec(std::vector<double> weights, std::vector<Eigen::VectorXd> means, std::vector<Eigen::MatrixXd> covs)
        : weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(covs)) {
        if (weights_.empty()) throw ValidationError("mixture needs at least one component");
        if (means_.size() != weights_.size() || covs_.size() != weights_.size()) {
            throw ValidationError("mixture weights, means and covariances differ in length");
        }
        double total = 0.0;
        for (double w : weights_) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("mixture weights must be non-negative");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ValidationError("mixture weights must sum to 1");
        const Eigen::Index p = means_.front().size();
        if (p < 1) throw ValidationError("mixture dimension must be at least 1");
        for (std::size_t k = 0; k < covs_.size(); ++k) {
            if (means_[k].size() != p || covs_[k].rows() != p || covs_[k].cols() != p) {
                throw ValidationError("mixture component " + std::to_string(k + 1) + " has inconsistent dimension");
            }
            if (!covs_[k].isApprox(covs_[k].transpose(), 1e-12)) {
                throw ValidationError("mixture covariance " + std::to_string(k + 1) + " is not symmetric");
            }
            factors_.push_back(factor_spd(covs_[k]));
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return means_.front().size(); }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
    [[nodiscard]] const std::vector<Eigen::VectorXd>& means() const noexcept { return means_; }
    [[nodiscard]] const std::vector<Eigen::MatrixXd>& covs() const noexcept { return covs_; }
    [[nodiscard]] const SpdFactor& factor(std::size_t k) const { return factors_[k]; }

private:
    std::vector<double> weights_;
    std::vector<Eigen::VectorXd> means_;
    std::vector<Eigen::MatrixXd> covs_;
    std::vector<SpdFactor> factors_;
};

/// Four bivariate components: a broad one, a rotated one, an elongated one and a tiny one.
inline MixtureSpec benchmark_spec() {
    const double c = std::cos(std::numbers::pi / 4.0);
    Eigen::Matrix2d rot;
    rot << c, -c, c, c;
    const Eigen::Matrix2d two_i = 2.0 * Eigen::Matrix2d::Identity();
    Eigen::MatrixXd s2 = rot * two_i * rot.transpose();
    s2 = 0.5 * (s2 + s2.transpose());
    return MixtureSpec({0.44, 0.30, 0.25, 0.01},
                       {Eigen::Vector2d(4, 4), Eigen::Vector2d(7, 4), Eigen::Vector2d(6, 2), Eigen::Vector2d(8, 11)},
                       {two_i, s2, Eigen::Vector2d(3.0, 0.1).asDiagonal().toDenseMatrix(),
                        Eigen::Vector2d(0.1, 0.1).asDiagonal().toDenseMatrix()});
}

struct Synthetic {
    Dataset data;
    Partition truth;
};

/// Labels from the weights, then one Gaussian draw per observation.
inline Synthetic generate(const MixtureSpec& spec, std::size_t n, RngStream& rng) {
    if (n < 1) throw ValidationError("generate needs n >= 1");
    std::discrete_distribution<int> pick(spec.weights().begin(), spec.weights().end());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), spec.dim());
    std::vector<int> raw(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int k = pick(rng);
        raw[i] = k + 1;
        const auto ku = static_cast<std::size_t>(k);
        x.row(static_cast<Eigen::Index>(i)) = mvn_sample(spec.means()[ku], spec.factor(ku), rng).transpose();
    }
    return {Dataset(std::move(x)), relabel_contiguous(raw)};
}

inline double mixture_logdensity(const MixtureSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != spec.dim()) throw ValidationError("observation dimension does not match the mixture");
    double out = kNegInf;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        if (spec.weights()[k] <= 0.0) continue;
        out = log_add_exp(out, std::log(spec.weights()[k]) + mvn_logpdf(x, spec.means()[k], spec.factor(k)));
    }
    return out;
}

/// Reads {"weights": [...], "means": [[...], ...], "covariances": [[[...], ...], ...]}.
inline MixtureSpec mixture_spec_from_json(const nlohmann::json& j) {
    try {
        const auto weights = j.at("weights").get<std::vector<double>>();
        std::vector<Eigen::VectorXd> means;
        for (const auto& m : j.at("means")) {
            const auto v = m.get<std::vector<double>>();
            means.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        std::vector<Eigen::MatrixXd> covs;
        for (const auto& c : j.at("covariances")) {
            const auto rows = c.get<std::vector<std::vector<double>>>();
            Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != rows.size()) throw ValidationError("covariance matrices must be square");
                for (std::size_t s = 0; s < rows.size(); ++s) {
                    m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) = rows[r][s];
                }
            }
            covs.push_back(std::move(m));
        }
        return MixtureSpec(weights, std::move(means), std::move(covs));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed mixture spec: ") + e.what());
    }
}

inline MixtureSpec load_mixture_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open mixture spec '" + path + "'");
    try {
        return mixture_spec_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("mixture spec '" + path + "' is not valid JSON: " + e.what());
    }
}

}  // namespace bnpmix
