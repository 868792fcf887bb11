// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/slimming.hpp"

#include <algorithm>

#include "slimden/threadpool.hpp"

namespace slimden {

std::vector<WidthConfig> slim_candidates(const BackboneSpec& spec, const WidthConfig& cfg, int group) {
    require_valid(spec, cfg, "slim_candidates");
    if (group < 1) throw DataError("slim_candidates: group must be >= 1");
    std::vector<WidthConfig> out;
    for (int layer = 0; layer < spec.layers; ++layer) {
        if (cfg.active[layer] <= spec.min_width[layer]) continue;
        WidthConfig c = cfg;
        c.active[layer] = std::max(spec.min_width[layer], cfg.active[layer] - group);
        out.push_back(std::move(c));
    }
    return out;
}

RoutingSpace progressive_slim(const SuperNet& net, std::span<const PatchPair> val,
                              const DatasetParams& val_params, int group, ThreadPool* pool) {
    if (val.empty()) throw DataError("progressive_slim: empty validation set");
    const BackboneSpec& spec = net.spec;

    RoutingSpace space;
    space.eval_params = val_params;

    auto make_entry = [&](const WidthConfig& cfg, double score) {
        RoutingEntry e;
        e.config = cfg;
        e.flops_per_pixel = count_flops(spec, cfg, val[0].clean.h, val[0].clean.w).flops_per_pixel;
        e.psnr_db = score;
        return e;
    };

    WidthConfig current = largest_config(spec);
    space.entries.push_back(make_entry(current, evaluate_config(net, current, val, pool)));

    const WidthConfig smallest = smallest_config(spec);
    while (!(current == smallest)) {
        GreedyStep step;
        step.candidates = slim_candidates(spec, current, group);
        step.scores.assign(step.candidates.size(), 0.0);
        auto eval_candidate = [&](std::size_t i) {
            step.scores[i] = evaluate_config(net, step.candidates[i], val, nullptr);
        };
        if (pool) {
            pool->parallel_for(step.candidates.size(), eval_candidate);
        } else {
            for (std::size_t i = 0; i < step.candidates.size(); ++i) eval_candidate(i);
        }
        // best score wins; ties go to the lowest layer index, which is the
        // candidate generated first
        step.chosen = 0;
        for (std::size_t i = 1; i < step.scores.size(); ++i) {
            if (step.scores[i] > step.scores[step.chosen]) step.chosen = static_cast<int>(i);
        }
        current = step.candidates[step.chosen];
        space.entries.push_back(make_entry(current, step.scores[step.chosen]));
        space.log.push_back(std::move(step));
    }
    return space;
}

const RoutingEntry& select_by_budget(const RoutingSpace& space, double budget_flops_per_pixel,
                                     bool* warned) {
    if (space.entries.empty()) throw DataError("select_by_budget: empty routing space");
    if (warned) *warned = false;
    const RoutingEntry* best = nullptr;
    for (const auto& e : space.entries) {
        if (e.flops_per_pixel <= budget_flops_per_pixel) {
            if (!best || e.psnr_db > best->psnr_db) best = &e;
        }
    }
    if (!best) {
        if (warned) *warned = true;
        best = &space.entries.back();
    }
    return *best;
}

}  // namespace slimden
