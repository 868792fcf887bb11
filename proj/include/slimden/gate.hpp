// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0
//
// Stage 3: difficulty labeling, gate training and dynamic inference.
//
// Candidate sub-networks are ordered by ascending compute cost, so the first
// one-hot index means "easy image, smallest network" and the last means
// "hard image, largest network". Labels only ever name those two extremes;
// intermediate candidates become reachable through the complexity loss,
// which pulls the gate's expected cost toward the configured budget.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slimden/backbone.hpp"
#include "slimden/flops.hpp"
#include "slimden/slimming.hpp"

namespace slimden {

class ThreadPool;

// The full gate: both heads plus the candidate set it dispatches over.
struct GateNet {
    GateAttention attention;
    GatePredictor predictor;
    std::vector<WidthConfig> candidates;      // ascending FLOPs
    std::vector<double> candidate_flops;      // dynamic-execution FLOPs/pixel per candidate

    int num_candidates() const { return static_cast<int>(candidates.size()); }
};

// FLOPs/pixel of serving one image through candidate `cfg`: full-width stem,
// gate head matrices, and the remaining network at the candidate's widths.
double dynamic_flops_per_pixel(const BackboneSpec& spec, const WidthConfig& cfg, const GateDims& dims,
                               int h, int w);

// Builds the gate over a FLOPs-stratified subset of the routing space:
// smallest, largest, and num_candidates-2 entries nearest to evenly spaced
// cost targets. num_candidates <= 0 keeps every entry (the full-space option).
GateNet make_gate(const BackboneSpec& spec, const RoutingSpace& space, int num_candidates,
                  int reduction, int hidden_dim, int image_h, int image_w, Rng& rng);

struct DifficultyLabel {
    int index = 0;         // one-hot position: 0 = easy, num_classes-1 = hard
    int num_classes = 0;
    double psnr_gain = 0.0;  // PSNR(largest) - PSNR(smallest) on this image
};

// Two static forwards per image (largest and smallest config, no attention);
// gain above beta marks the image hard, gain at or below beta easy.
DifficultyLabel label_online(const SuperNet& net, const Tensor& noisy, const Tensor& clean, double beta,
                             int num_classes);

// Mean cross-entropy against one-hot labels; probabilities floored at 1e-12.
double gate_loss(const Tensor& probs, std::span<const int> label_index);

struct ComplexityBudget {
    double target_flops_px = 0.0;  // C
    double norm_flops_px = 0.0;    // T, cost of the full-width network
};

// ((expected - C) / T)^2
double complexity_loss(double expected_flops_px, const ComplexityBudget& budget);

struct GateTrainOptions {
    int epochs = 1;
    int batch = 64;
    AdamParams adam;  // lr defaults to 5e-5
    float lr_decay = 0.9f;
    double beta = 0.2;
    double comp_weight = 50.0;  // scale on the complexity loss
    std::uint64_t seed = 1;
};

struct GateEpochLog {
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0, ce = 0.0, comp = 0.0;
    double label_accuracy = 0.0;     // argmax == label index
    double expected_flops_px = 0.0;  // softmax-weighted candidate cost, mean over images
};

struct GateTrainLog {
    std::vector<GateEpochLog> epochs;
    std::vector<int> labels;  // per training image, as generated
};

// Trains gate parameters only; the backbone is frozen (taken by const ref)
// and the attention multiplier stays disabled throughout.
GateTrainLog train_gate(GateNet& gate, const SuperNet& net, std::span<const PatchPair> train,
                        const ComplexityBudget& budget, const GateTrainOptions& opt,
                        ThreadPool* pool = nullptr);

struct DynamicResult {
    Tensor denoised;
    WidthConfig route;
    int candidate_index = 0;
    double flops_per_pixel = 0.0;
};

// Full dynamic inference for one image: full-width stem, gate prediction,
// remaining network at the chosen candidate. force_route >= 0 bypasses the
// gate's choice (test hook).
DynamicResult dynamic_denoise(const SuperNet& net, const GateNet& gate, const Tensor& noisy,
                              int force_route = -1);

}  // namespace slimden
