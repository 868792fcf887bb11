// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "slimden/rng.hpp"
#include "slimden/tensor.hpp"

namespace slimden {

class ThreadPool;

// One training pair: a procedurally generated piecewise-smooth patch and its
// Gaussian-corrupted version, both in [0,1].
struct PatchPair {
    Tensor clean;   // (1,1,P,P)
    Tensor noisy;   // clean + N(0, sigma^2), clipped to [0,1]
    double sigma = 0.0;
};

struct DatasetParams {
    std::uint64_t seed = 1;
    int count = 256;
    int patch = 32;
    double sigma_min = 10.0 / 255.0;
    double sigma_max = 50.0 / 255.0;

    bool operator==(const DatasetParams&) const = default;
};

// Deterministic in (seed, parameters); every patch is generated from its own
// forked stream so the result does not depend on generation order.
std::vector<PatchPair> synth_dataset(const DatasetParams& params, ThreadPool* pool = nullptr);

}  // namespace slimden
