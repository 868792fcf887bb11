// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "slimden/threadpool.hpp"

namespace slimden {

namespace {

float smoothstep(float edge0, float edge1, float x) {
    float t = (x - edge0) / (edge1 - edge0);
    t = std::clamp(t, 0.0f, 1.0f);
    return t * t * (3.0f - 2.0f * t);
}

// Piecewise-smooth scene: a bilinear background gradient, a handful of soft-
// edged discs and rectangles, and sometimes a low-amplitude sinusoidal
// texture. Content complexity varies across patches so that some are much
// easier to denoise than others.
Tensor make_clean_patch(int p, Rng& rng) {
    Tensor img(1, 1, p, p);

    // background gradient, corner values kept away from the value bounds
    const float c00 = static_cast<float>(rng.uniform(0.2, 0.8));
    const float c01 = static_cast<float>(rng.uniform(0.2, 0.8));
    const float c10 = static_cast<float>(rng.uniform(0.2, 0.8));
    const float c11 = static_cast<float>(rng.uniform(0.2, 0.8));
    for (int y = 0; y < p; ++y) {
        const float fy = p > 1 ? static_cast<float>(y) / (p - 1) : 0.0f;
        for (int x = 0; x < p; ++x) {
            const float fx = p > 1 ? static_cast<float>(x) / (p - 1) : 0.0f;
            const float top = c00 + (c01 - c00) * fx;
            const float bot = c10 + (c11 - c10) * fx;
            img.at(0, 0, y, x) = top + (bot - top) * fy;
        }
    }

    const int shapes = rng.uniform_int(0, 6);
    for (int s = 0; s < shapes; ++s) {
        const float value = static_cast<float>(rng.uniform(0.15, 0.85));
        const float feather = static_cast<float>(rng.uniform(0.6, 2.5));
        if (rng.uniform() < 0.5) {
            // disc
            const float cx = static_cast<float>(rng.uniform(0.0, p));
            const float cy = static_cast<float>(rng.uniform(0.0, p));
            const float radius = static_cast<float>(rng.uniform(0.08, 0.35)) * p;
            for (int y = 0; y < p; ++y) {
                for (int x = 0; x < p; ++x) {
                    const float dx = x - cx, dy = y - cy;
                    const float d = std::sqrt(dx * dx + dy * dy);
                    const float a = 1.0f - smoothstep(radius - feather, radius + feather, d);
                    if (a > 0.0f) {
                        float& px = img.at(0, 0, y, x);
                        px = px + (value - px) * a;
                    }
                }
            }
        } else {
            // axis-aligned rectangle
            const int x0 = rng.uniform_int(0, p - 1);
            const int y0 = rng.uniform_int(0, p - 1);
            const int x1 = std::min(p - 1, x0 + rng.uniform_int(2, std::max(2, p / 2)));
            const int y1 = std::min(p - 1, y0 + rng.uniform_int(2, std::max(2, p / 2)));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const float ax = std::min(smoothstep(x0 - feather, x0 + feather, static_cast<float>(x)),
                                              1.0f - smoothstep(x1 - feather, x1 + feather, static_cast<float>(x)));
                    const float ay = std::min(smoothstep(y0 - feather, y0 + feather, static_cast<float>(y)),
                                              1.0f - smoothstep(y1 - feather, y1 + feather, static_cast<float>(y)));
                    const float a = std::min(ax, ay);
                    float& px = img.at(0, 0, y, x);
                    px = px + (value - px) * a;
                }
            }
        }
    }

    if (rng.uniform() < 0.5) {
        const float amp = static_cast<float>(rng.uniform(0.01, 0.08));
        const float fx = static_cast<float>(rng.uniform(0.05, 0.45)) * 2.0f * static_cast<float>(M_PI);
        const float fy = static_cast<float>(rng.uniform(0.05, 0.45)) * 2.0f * static_cast<float>(M_PI);
        const float phase = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));
        for (int y = 0; y < p; ++y) {
            for (int x = 0; x < p; ++x) {
                img.at(0, 0, y, x) += amp * std::sin(fx * x + fy * y + phase);
            }
        }
    }

    for (auto& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

PatchPair make_pair(const DatasetParams& params, Rng rng) {
    PatchPair pair;
    pair.clean = make_clean_patch(params.patch, rng);
    pair.sigma = rng.uniform(params.sigma_min, params.sigma_max);
    pair.noisy = pair.clean;
    for (auto& v : pair.noisy.data) {
        v = std::clamp(v + static_cast<float>(pair.sigma * rng.normal()), 0.0f, 1.0f);
    }
    return pair;
}

}  // namespace

std::vector<PatchPair> synth_dataset(const DatasetParams& params, ThreadPool* pool) {
    if (params.count < 1) throw DataError("synth_dataset: count must be >= 1");
    if (params.patch < 1) throw DataError("synth_dataset: patch must be >= 1");
    if (params.sigma_min < 0.0 || params.sigma_max < params.sigma_min) {
        throw DataError("synth_dataset: invalid sigma range");
    }
    std::vector<PatchPair> out(params.count);
    const Rng root(params.seed);
    auto gen = [&](std::size_t i) { out[i] = make_pair(params, root.fork(i)); };
    if (pool) {
        pool->parallel_for(out.size(), gen);
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) gen(i);
    }
    return out;
}

}  // namespace slimden
