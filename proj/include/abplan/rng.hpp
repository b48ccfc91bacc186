#pragma once

#include <cstdint>

#include "abplan/math.hpp"

namespace abplan {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer (stateless mix).
inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

}  // namespace detail

// Derives an independent stream seed from (seed, a, b). Streams keyed by
// (seed, arm, user) or (seed, study, replication) are decorrelated, so
// work units can be generated in any order with identical results.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = detail::mix64(seed + detail::kGolden);
    s = detail::mix64(s ^ (a + detail::kGolden));
    s = detail::mix64(s ^ (b + detail::kGolden));
    return s;
}

// Minimal splitmix64 generator. Output depends only on the seed and the
// number of prior draws, never on global state.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += detail::kGolden;
        return detail::mix64(state_);
    }

    // Uniform on the open interval (0, 1); never returns an endpoint.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal by inversion; one uniform per variate, so the draw
    // count per unit of work is fixed and streams stay aligned.
    double next_gaussian() { return norm_quantile(next_uniform()); }

    // Uniform integer in [0, n) via 128-bit multiply-shift.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

private:
    std::uint64_t state_;
};

}  // namespace abplan
