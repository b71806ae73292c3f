#pragma once

#include <array>
#include <cstdint>

namespace amip {

std::uint64_t splitmix64(std::uint64_t& state);

// Mixes a base seed with cell coordinates so each cell of a grid gets an
// independent stream regardless of evaluation order.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// Standard normal quantile: Acklam's rational approximation refined by one
// Halley step against erfc.
double normal_quantile(double p);

// xoshiro256** seeded through splitmix64.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed);

    std::uint64_t next();
    std::uint64_t operator()() { return next(); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

    // Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    double exponential();

private:
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace amip
