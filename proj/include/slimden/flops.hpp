// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slimden/backbone.hpp"

namespace slimden {

// Multiply-add accounting. Biases and activations are not counted; a conv
// layer contributes out_active * in_active * k^2 per output position and the
// gate head matrices contribute their element counts once per image.
struct FlopsReport {
    struct Item {
        std::string name;
        std::uint64_t macs = 0;
    };
    std::vector<Item> per_layer;
    std::uint64_t total_macs = 0;
    std::uint64_t pixels = 0;
    double flops_per_pixel = 0.0;
};

// Dimensions of the gate matrices that execute at inference time
// (W1: C/r x C, W3: D x C/r, W4: E x D).
struct GateDims {
    int channels = 0;   // C
    int reduction = 4;  // r
    int hidden = 16;    // D
    int candidates = 0; // E
};

// Static cost of running the network at `cfg` on an h x w image. With
// stem_full_width the stem runs at its maximum width while the rest of the
// network still reads only the cfg[0]-channel prefix -- the dynamic-inference
// execution shape. Gate head cost is added when dims are supplied.
FlopsReport count_flops(const BackboneSpec& spec, const WidthConfig& cfg, int h, int w,
                        const GateDims* gate = nullptr, bool stem_full_width = false);

}  // namespace slimden
