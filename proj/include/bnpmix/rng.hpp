#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bnpmix {

/// Reproducible random stream keyed by (seed, stream_id).
///
/// Two streams built from the same pair produce the same draws. Streams with
/// different ids are seeded through std::seed_seq, which scrambles all input
/// words, so their sequences are unrelated for practical purposes.
class RngStream {
public:
    using result_type = std::mt19937_64::result_type;

    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Child stream for a sub-task; does not consume draws from this stream.
    [[nodiscard]] RngStream substream(std::uint64_t k) const {
        return RngStream(splitmix64(seed_ ^ splitmix64(k + 0x5bd1e995ULL)), stream_id_);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        // 53 random bits, shifted off zero
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

    /// Gamma with shape/rate parameterisation.
    double gamma(double shape, double rate) {
        return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
    }

    double chi_squared(double dof) { return gamma(0.5 * dof, 0.5); }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    static constexpr std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id),
                          static_cast<std::uint32_t>(stream_id >> 32)};
        return std::mt19937_64(seq);
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

/// Stream id reserved for synthetic data generation, disjoint from chain ids.
inline constexpr std::uint64_t kDataStreamId = 0xDA7A000000000000ULL;

}  // namespace bnpmix
