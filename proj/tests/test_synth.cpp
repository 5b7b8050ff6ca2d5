#include "bnpmix/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace bnpmix;

TEST(BenchmarkSpec, ParameterBlock) {
    const MixtureSpec s = benchmark_spec();
    ASSERT_EQ(s.size(), 4u);
    double total = 0.0;
    for (double w : s.weights()) total += w;
    EXPECT_NEAR(total, 1.0, 1e-15);
    EXPECT_EQ(s.weights(), (std::vector<double>{0.44, 0.30, 0.25, 0.01}));
    EXPECT_EQ(s.means()[3], Eigen::Vector2d(8.0, 11.0));
    EXPECT_EQ(s.means()[1], Eigen::Vector2d(7.0, 4.0));
    EXPECT_LT((s.covs()[1] - 2.0 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(s.covs()[2](0, 0), 3.0);
    EXPECT_EQ(s.covs()[2](1, 1), 0.1);
    EXPECT_EQ(s.covs()[3], (0.1 * Eigen::Matrix2d::Identity()).eval());
}

TEST(MixtureSpec, RejectsInvalidInput) {
    const std::vector<Eigen::VectorXd> m{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    const std::vector<Eigen::MatrixXd> c{Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)};
    EXPECT_THROW(MixtureSpec({0.5, 0.6}, m, c), ValidationError);
    EXPECT_THROW(MixtureSpec({0.5}, m, c), ValidationError);
    EXPECT_THROW(MixtureSpec({0.5, 0.5}, m, {Eigen::MatrixXd::Identity(1, 1), -Eigen::MatrixXd::Identity(1, 1)}),
                 NumericDegeneracyError);
}

TEST(Generate, SingleObservation) {
    RngStream rng(1, 0);
    const auto s = generate(benchmark_spec(), 1, rng);
    EXPECT_EQ(s.data.n(), 1u);
    EXPECT_EQ(s.truth.t(), 1);
    EXPECT_THROW(generate(benchmark_spec(), 0, rng), ValidationError);
}

TEST(Generate, PointMassWeights) {
    const MixtureSpec s({1.0, 0.0}, {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)},
                        {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)});
    RngStream rng(2, 0);
    const auto g = generate(s, 200, rng);
    for (std::size_t i = 0; i < 200; ++i) EXPECT_EQ(g.truth[i], 1);
}

TEST(Generate, FrequenciesAndMomentsMatchTheSpec) {
    const MixtureSpec spec = benchmark_spec();
    RngStream rng(3, 0);
    const std::size_t n = 100000;
    const auto g = generate(spec, n, rng);
    const auto members = g.truth.members();
    ASSERT_EQ(members.size(), 4u);
    for (const auto& mem : members) {
        Eigen::Vector2d mean = Eigen::Vector2d::Zero();
        for (auto i : mem) mean += g.data.values().row(static_cast<Eigen::Index>(i)).transpose();
        mean /= static_cast<double>(mem.size());
        // identify the generating component by its mean
        std::size_t k = 0;
        for (std::size_t c = 1; c < 4; ++c) {
            if ((spec.means()[c] - mean).norm() < (spec.means()[k] - mean).norm()) k = c;
        }
        const double p = spec.weights()[k];
        EXPECT_NEAR(static_cast<double>(mem.size()), n * p, 3.0 * std::sqrt(n * p * (1 - p)));
        const double m = static_cast<double>(mem.size());
        for (int d = 0; d < 2; ++d) {
            EXPECT_NEAR(mean[d], spec.means()[k][d], 4.0 * std::sqrt(spec.covs()[k](d, d) / m));
        }
        Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
        for (auto i : mem) {
            const Eigen::Vector2d r = g.data.values().row(static_cast<Eigen::Index>(i)).transpose() - mean;
            cov += r * r.transpose();
        }
        cov /= m - 1.0;
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                const double sd = std::sqrt((spec.covs()[k](a, a) * spec.covs()[k](b, b) +
                                             spec.covs()[k](a, b) * spec.covs()[k](a, b)) / m);
                EXPECT_NEAR(cov(a, b), spec.covs()[k](a, b), 4.0 * sd);
            }
        }
    }
}

TEST(Generate, SameSeedSameData) {
    RngStream a(4, 7), b(4, 7);
    const auto x = generate(benchmark_spec(), 300, a);
    const auto y = generate(benchmark_spec(), 300, b);
    EXPECT_EQ(x.data.values(), y.data.values());
    EXPECT_EQ(x.truth.labels(), y.truth.labels());
}

TEST(MixtureLogdensity, CollapsesToComponent) {
    const Eigen::Vector2d mu(1.0, -1.0);
    Eigen::Matrix2d c;
    c << 2.0, 0.3, 0.3, 1.0;
    const MixtureSpec one({1.0}, {mu}, {c});
    const MixtureSpec two({0.5, 0.5}, {mu, mu}, {c, c});
    const Eigen::Vector2d x(0.2, 0.4);
    const double direct = mvn_logpdf(x, mu, factor_spd(c));
    EXPECT_NEAR(mixture_logdensity(one, x), direct, 1e-14);
    EXPECT_NEAR(mixture_logdensity(two, x), direct, 1e-14);
    EXPECT_THROW(mixture_logdensity(one, Eigen::VectorXd::Zero(3)), ValidationError);
}

TEST(MixtureLogdensity, IntegratesToOneOnBenchmark) {
    const MixtureSpec spec = benchmark_spec();
    const double h = 0.01;
    double total = 0.0;
    for (double x = -6.0; x < 18.0; x += h) {
        for (double y = -6.0; y < 16.0; y += h) {
            total += std::exp(mixture_logdensity(spec, Eigen::Vector2d(x + 0.5 * h, y + 0.5 * h)));
        }
    }
    EXPECT_NEAR(total * h * h, 1.0, 1e-4);
}

TEST(MixtureSpecJson, LoadsFromFile) {
    const std::string path = (std::filesystem::temp_directory_path() / "bnpmix_mix.json").string();
    {
        std::ofstream out(path);
        out << R"({"weights": [0.25, 0.75], "means": [[0, 1], [2, 3]],
                   "covariances": [[[1, 0], [0, 1]], [[2, 0.5], [0.5, 1]]]})";
    }
    const MixtureSpec s = load_mixture_spec(path);
    EXPECT_EQ(s.size(), 2u);
    EXPECT_EQ(s.means()[1], Eigen::Vector2d(2.0, 3.0));
    EXPECT_EQ(s.covs()[1](0, 1), 0.5);
    {
        std::ofstream out(path);
        out << R"({"weights": [1.0], "means": [[0, 1]]})";
    }
    EXPECT_THROW(load_mixture_spec(path), ValidationError);
    {
        std::ofstream out(path);
        out << "not json";
    }
    EXPECT_THROW(load_mixture_spec(path), ValidationError);
    EXPECT_THROW(load_mixture_spec(path + ".missing"), ValidationError);
}
