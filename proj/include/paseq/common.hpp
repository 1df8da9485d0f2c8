#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace paseq {

// Error taxonomy. The CLI maps these onto exit codes: usage -> 1,
// data -> 2, numeric/contract/shape -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor dimension mismatch; message names the offending parameter path.
struct ShapeError : Error {
    using Error::Error;
};

// A documented precondition was violated by the caller.
struct ContractError : Error {
    using Error::Error;
};

// Unreadable or malformed input data.
struct DataError : Error {
    using Error::Error;
};

// NaN/Inf escaped a computation, or an optimizer diverged.
struct NumericError : Error {
    using Error::Error;
};

// Bad command line or config.
struct UsageError : Error {
    using Error::Error;
};

// Deterministic RNG. All randomness in the project flows through this
// generator so runs are reproducible bit-for-bit from a single seed.
// xoshiro256++ with splitmix64 seeding; uniform doubles are built from
// the top 53 bits, never from std:: distributions (those are
// implementation-defined).
class DetRng {
public:
    explicit DetRng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : state_) {
            x += 0x9e3779b97f4a7c15ull;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            word = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform index in [0, n). n must be positive.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4];
};

// Stable seed derivation for subsystems: hash of (run seed, subsystem name).
inline uint64_t derive_seed(uint64_t run_seed, const std::string& subsystem) {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](uint64_t byte) {
        h ^= byte;
        h *= 0x100000001b3ull;
    };
    for (int i = 0; i < 8; ++i) mix((run_seed >> (8 * i)) & 0xff);
    for (unsigned char c : subsystem) mix(c);
    return h;
}

}  // namespace paseq
