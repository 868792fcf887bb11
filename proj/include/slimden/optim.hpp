// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace slimden {

struct AdamParams {
    float lr = 5e-5f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Moment buffers for a fixed list of parameter blocks. Block order is the
// identity: callers must pass the same blocks in the same order every step.
struct AdamState {
    AdamParams hp;
    std::int64_t step = 0;
    std::vector<std::vector<float>> m, v;

    void init(const std::vector<std::size_t>& block_sizes);
    bool initialized() const { return !m.empty(); }
};

// One Adam update. Throws NumericError on a non-finite gradient.
void adam_step(std::span<float* const> params, std::span<const float* const> grads,
               std::span<const std::size_t> sizes, AdamState& state);

}  // namespace slimden
