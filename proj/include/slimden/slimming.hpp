// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0
//
// Greedy progressive slimming: starting from the largest config, repeatedly
// evaluate every one-group-narrower candidate on the validation set with the
// shared (frozen) weights and keep the best, until the smallest config is
// reached. The chain of kept configs, with their compute costs, is the
// routing space the dynamic gate later selects from.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "slimden/backbone.hpp"
#include "slimden/flops.hpp"

namespace slimden {

class ThreadPool;

struct RoutingEntry {
    WidthConfig config;
    double flops_per_pixel = 0.0;
    double psnr_db = 0.0;
};

// One greedy step: every candidate that was scored plus the chosen index.
struct GreedyStep {
    std::vector<WidthConfig> candidates;
    std::vector<double> scores;
    int chosen = -1;
};

struct RoutingSpace {
    std::vector<RoutingEntry> entries;  // descending FLOPs: largest first
    std::vector<GreedyStep> log;        // one per transition, for replay
    DatasetParams eval_params;          // validation set the scores came from
};

// All configs reachable from `cfg` by removing one channel group from one
// layer (clamped at that layer's minimum). Layers already at minimum yield
// no candidate.
std::vector<WidthConfig> slim_candidates(const BackboneSpec& spec, const WidthConfig& cfg, int group);

RoutingSpace progressive_slim(const SuperNet& net, std::span<const PatchPair> val,
                              const DatasetParams& val_params, int group, ThreadPool* pool = nullptr);

// Best-quality entry within the FLOPs budget. Falls back to the smallest
// entry (and reports it through `warned`) when nothing qualifies.
const RoutingEntry& select_by_budget(const RoutingSpace& space, double budget_flops_per_pixel,
                                     bool* warned = nullptr);

}  // namespace slimden
