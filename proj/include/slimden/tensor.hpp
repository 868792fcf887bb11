// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "slimden/errors.hpp"

namespace slimden {

// Dense NCHW float32 tensor. All channels of one batch item are stored
// back to back, so the first k channels of an item form one contiguous
// range -- prefix-width execution is a zero-copy view into full storage.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t item_size() const { return static_cast<std::size_t>(c) * plane(); }

    float* chan(int b, int ch) { return data.data() + (static_cast<std::size_t>(b) * c + ch) * plane(); }
    const float* chan(int b, int ch) const {
        return data.data() + (static_cast<std::size_t>(b) * c + ch) * plane();
    }

    float& at(int b, int ch, int y, int x) { return chan(b, ch)[static_cast<std::size_t>(y) * w + x]; }
    float at(int b, int ch, int y, int x) const { return chan(b, ch)[static_cast<std::size_t>(y) * w + x]; }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DataError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace slimden
