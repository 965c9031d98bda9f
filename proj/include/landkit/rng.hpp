#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace landkit {

// Deterministic 64-bit generator (splitmix64). The standard <random> engines and
// distributions are implementation-defined across library versions, so everything
// that must reproduce byte-identically goes through this one.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t next_below(uint64_t n) {
        // Rejection sampling keeps the draw unbiased.
        uint64_t threshold = (~n + 1) % n;  // = 2^64 mod n
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform double in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Standard normal via Box-Muller (no cached spare; keeps the stream positional).
    double next_normal();

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
};

// Derives a subsystem seed from the master seed and a label, so parallel stages
// can own disjoint deterministic streams ("dataset.split.class3" etc.).
uint64_t derive_seed(uint64_t master, std::string_view label);

// Convenience for labels with a numeric suffix (per class, per tree, per fold).
uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index);

}  // namespace landkit
