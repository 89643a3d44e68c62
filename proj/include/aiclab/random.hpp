#ifndef AICLAB_RANDOM_HPP
#define AICLAB_RANDOM_HPP

// Counter-based random streams. A draw is a pure function of
// (seed, stream, index), so results never depend on call order or thread count.

#include <cmath>
#include <cstdint>

#include <boost/math/special_functions/erf.hpp>

namespace aiclab {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                                            std::uint64_t index) noexcept {
    std::uint64_t h = splitmix64(seed ^ 0x5851F42D4C957F2DULL);
    h = splitmix64(h ^ stream);
    return splitmix64(h ^ (index * 0xD1342543DE82EF95ULL));
}

/// Uniform in the open interval (0, 1) with 53 bits of resolution.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t index) noexcept {
    const std::uint64_t bits = counter_hash(seed, stream, index) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

/// Standard normal quantile; inverse of Phi.
inline double normal_quantile(double u) {
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

/// Standard normal draw by inverse-CDF transform of a counter uniform.
inline double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return normal_quantile(counter_uniform(seed, stream, index));
}

/// Sequential view over one counter stream. Copying the object forks the position.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : seed_(seed), stream_(stream) {}

    double uniform() noexcept { return counter_uniform(seed_, stream_, index_++); }
    double normal() { return counter_normal(seed_, stream_, index_++); }
    double sign() noexcept { return (counter_hash(seed_, stream_, index_++) >> 63) ? -1.0 : 1.0; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    std::uint64_t position() const noexcept { return index_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t index_ = 0;
};

// Fixed stream identifiers so different consumers of one seed never overlap.
namespace streams {
inline constexpr std::uint64_t basis = 1;
inline constexpr std::uint64_t complement_mix = 2;
inline constexpr std::uint64_t cubic = 3;
inline constexpr std::uint64_t matrix = 4;
inline constexpr std::uint64_t power_start = 5;
inline constexpr std::uint64_t skill = 6;
inline constexpr std::uint64_t perturbation = 7;
inline constexpr std::uint64_t synth_basis = 8;
inline constexpr std::uint64_t synth_coeff = 9;
inline constexpr std::uint64_t synth_input = 10;
inline constexpr std::uint64_t sphere_base = 1ULL << 32;
}  // namespace streams

}  // namespace aiclab

#endif  // AICLAB_RANDOM_HPP
