#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace driftdx {

// Bad user input (files, schemas, config). The CLI maps this to exit code 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Internal failure during a run. The CLI maps this to exit code 3.
struct RunError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Compensated accumulator. Summation order still matters, but the result is
// stable enough to pin cross-implementation identities at 1e-12.
struct Kahan {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

using Rng = std::mt19937_64;

// Derives an independent substream from a base seed. splitmix64 finalizer, so
// nearby (seed, salt) pairs do not produce correlated mt19937 states.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace driftdx
