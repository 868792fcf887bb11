// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/optim.hpp"

#include <cmath>
#include <string>

#include "slimden/errors.hpp"

namespace slimden {

void AdamState::init(const std::vector<std::size_t>& block_sizes) {
    m.clear();
    v.clear();
    for (std::size_t sz : block_sizes) {
        m.emplace_back(sz, 0.0f);
        v.emplace_back(sz, 0.0f);
    }
    step = 0;
}

void adam_step(std::span<float* const> params, std::span<const float* const> grads,
               std::span<const std::size_t> sizes, AdamState& state) {
    if (params.size() != grads.size() || params.size() != sizes.size()) {
        throw DataError("adam_step: mismatched block lists");
    }
    if (!state.initialized()) {
        state.init(std::vector<std::size_t>(sizes.begin(), sizes.end()));
    }
    if (state.m.size() != params.size()) {
        throw DataError("adam_step: state has " + std::to_string(state.m.size()) + " blocks, got " +
                        std::to_string(params.size()));
    }

    ++state.step;
    const float b1 = state.hp.beta1;
    const float b2 = state.hp.beta2;
    const double bc1 = 1.0 - std::pow(static_cast<double>(b1), static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(static_cast<double>(b2), static_cast<double>(state.step));
    const float inv_bc1 = static_cast<float>(1.0 / bc1);
    const float inv_bc2 = static_cast<float>(1.0 / bc2);

    for (std::size_t blk = 0; blk < params.size(); ++blk) {
        if (state.m[blk].size() != sizes[blk]) {
            throw DataError("adam_step: block " + std::to_string(blk) + " size changed");
        }
        float* p = params[blk];
        const float* g = grads[blk];
        float* mb = state.m[blk].data();
        float* vb = state.v[blk].data();
        for (std::size_t i = 0; i < sizes[blk]; ++i) {
            const float gi = g[i];
            if (!std::isfinite(gi)) {
                throw NumericError("adam_step: non-finite gradient in block " + std::to_string(blk) +
                                   " at index " + std::to_string(i) + " (step " +
                                   std::to_string(state.step) + ")");
            }
            mb[i] = b1 * mb[i] + (1.0f - b1) * gi;
            vb[i] = b2 * vb[i] + (1.0f - b2) * gi * gi;
            const float mhat = mb[i] * inv_bc1;
            const float vhat = vb[i] * inv_bc2;
            p[i] -= state.hp.lr * mhat / (std::sqrt(vhat) + state.hp.eps);
        }
    }
}

}  // namespace slimden
