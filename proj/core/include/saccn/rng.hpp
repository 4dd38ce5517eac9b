#pragma once

#include <cstdint>
#include <string_view>

namespace saccn {

// Splittable counter-based generator. Every draw is a pure function of
// (state, index), so run k of a loop can be reproduced without replaying
// draws 0..k-1, and independent streams are derived by forking on a label.
// All arithmetic is 64-bit and platform-independent.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(mix(seed ^ 0x5343434eull /* "SCCN" */)) {}

    Rng fork(std::string_view label) const { return Rng(raw_tag{}, mix(state_ ^ fnv1a(label))); }
    Rng fork(uint64_t index) const { return Rng(raw_tag{}, mix(state_ + mix(index ^ 0x9e3779b97f4a7c15ull))); }

    uint64_t word(uint64_t index) const { return mix(state_ + mix(index + 1)); }

    // Uniform in [0,1) with 53 random bits.
    double uniform(uint64_t index) const {
        return static_cast<double>(word(index) >> 11) * 0x1.0p-53;
    }
    double uniform(uint64_t index, double lo, double hi) const {
        return lo + (hi - lo) * uniform(index);
    }
    // Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(uint64_t index, int64_t lo, int64_t hi) const {
        const double u = uniform(index);
        return lo + static_cast<int64_t>(u * static_cast<double>(hi - lo + 1));
    }

    uint64_t state() const { return state_; }

  private:
    struct raw_tag {};
    Rng(raw_tag, uint64_t state) : state_(state) {}

    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static uint64_t fnv1a(std::string_view s) {
        uint64_t h = 0xcbf29ce484222325ull;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        return h;
    }

    uint64_t state_;
};

}  // namespace saccn
