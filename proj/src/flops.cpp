// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/flops.hpp"

#include "slimden/ops.hpp"

namespace slimden {

FlopsReport count_flops(const BackboneSpec& spec, const WidthConfig& cfg, int h, int w,
                        const GateDims* gate, bool stem_full_width) {
    require_valid(spec, cfg, "count_flops");
    FlopsReport report;
    report.pixels = static_cast<std::uint64_t>(h) * w;

    const int k = spec.kernel;
    const std::uint64_t k2 = static_cast<std::uint64_t>(k) * k;
    // stride-1, same padding: every conv preserves the spatial extent
    const std::uint64_t positions = static_cast<std::uint64_t>(h) * w;

    auto add_conv = [&](const std::string& name, int out_active, int in_active) {
        FlopsReport::Item item;
        item.name = name;
        item.macs = static_cast<std::uint64_t>(out_active) * in_active * k2 * positions;
        report.total_macs += item.macs;
        report.per_layer.push_back(std::move(item));
    };

    add_conv("conv0", stem_full_width ? spec.max_width[0] : cfg.active[0], spec.image_channels);
    for (int i = 1; i < spec.layers; ++i) {
        add_conv("conv" + std::to_string(i), cfg.active[i], cfg.active[i - 1]);
    }
    add_conv("conv" + std::to_string(spec.layers), spec.image_channels, cfg.active[spec.layers - 1]);

    if (gate) {
        const int reduced = gate->channels / gate->reduction;
        auto add_mat = [&](const std::string& name, int rows, int cols) {
            FlopsReport::Item item;
            item.name = name;
            item.macs = static_cast<std::uint64_t>(rows) * cols;
            report.total_macs += item.macs;
            report.per_layer.push_back(std::move(item));
        };
        add_mat("gate_w1", reduced, gate->channels);
        add_mat("gate_w3", gate->hidden, reduced);
        add_mat("gate_w4", gate->candidates, gate->hidden);
    }

    report.flops_per_pixel = static_cast<double>(report.total_macs) / static_cast<double>(report.pixels);
    return report;
}

}  // namespace slimden
