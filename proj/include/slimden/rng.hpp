// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace slimden {

// Seeded generator on top of mt19937_64. The uniform/normal transforms are
// written out here instead of using <random> distributions because those are
// implementation-defined: datasets and trained weights must reproduce
// bit-for-bit from a seed regardless of the standard library build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed), seed_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive on both ends
    int uniform_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(eng_() % span);
    }

    // Box-Muller; consumes two draws per call, no cached spare.
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    float normal_f(float mean, float stddev) {
        return mean + stddev * static_cast<float>(normal());
    }

    // Derive an independent stream keyed on (seed, stream), e.g. one per
    // dataset patch. splitmix64 finalizer.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t z = seed_ + (stream + 1) * 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 eng_;
    std::uint64_t seed_ = 0;
};

}  // namespace slimden
