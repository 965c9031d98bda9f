#include "landkit/rng.hpp"

#include <cmath>

namespace landkit {

double Rng::next_normal() {
    // Box-Muller, discarding the second variate.
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

namespace {

// FNV-1a over the label bytes.
uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

uint64_t derive_seed(uint64_t master, std::string_view label) {
    Rng mix(master ^ fnv1a(label));
    return mix.next_u64();
}

uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index) {
    Rng mix(master ^ fnv1a(label) ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    return mix.next_u64();
}

}  // namespace landkit
