// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0
//
// Weight-shared slimmable residual denoising CNN.
//
// The network is a chain of layers+1 convolutions: a stem taking the image
// into the first feature boundary, layers-1 interior convolutions, and a head
// projecting back to the image, added to the input (residual prediction).
// Every feature boundary has a quantized range of admissible widths; a
// WidthConfig picks one width per boundary and execution touches only weight
// prefixes, so any narrower run reads a contiguous slice of full storage.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slimden/dataset.hpp"
#include "slimden/gate_heads.hpp"
#include "slimden/ops.hpp"
#include "slimden/optim.hpp"
#include "slimden/rng.hpp"

namespace slimden {

class ThreadPool;

struct BackboneSpec {
    int layers = 8;       // number of slimmable feature boundaries
    int base_width = 32;  // n per boundary before the width-ratio bounds
    int kernel = 3;
    int image_channels = 1;
    double rho_min = 0.2;
    double rho_max = 1.5;
    int quantum = 8;                   // channel counts snap to multiples of this
    std::vector<int> min_width, max_width;  // per boundary, derived in make()

    static BackboneSpec make(int layers = 8, int base_width = 32, int kernel = 3,
                             double rho_min = 0.2, double rho_max = 1.5, int quantum = 8);

    // Admissible widths for one boundary: min, min+q, ..., max.
    std::vector<int> width_grid(int boundary) const;
    int conv_count() const { return layers + 1; }

    bool operator==(const BackboneSpec&) const = default;
};

struct WidthConfig {
    std::vector<int> active;  // one width per boundary

    bool operator==(const WidthConfig&) const = default;
    std::string str() const;
};

WidthConfig largest_config(const BackboneSpec& spec);
WidthConfig smallest_config(const BackboneSpec& spec);
bool config_valid(const BackboneSpec& spec, const WidthConfig& cfg);
void require_valid(const BackboneSpec& spec, const WidthConfig& cfg, const char* what);

struct SuperNet {
    BackboneSpec spec;
    std::vector<ConvLayer> convs;  // [stem, interior..., head], all at max width

    static SuperNet init(const BackboneSpec& spec, Rng& rng);
};

// Gradient tape for the shared weights: one buffer per conv parameter block.
struct SuperNetGrad {
    std::vector<ConvGrad> convs;

    static SuperNetGrad like(const SuperNet& net);
    void zero();
    void add(const SuperNetGrad& o);
    void scale(float s);
};

// --- forward paths ------------------------------------------------------

// Stem block: conv0 at the given output width, then ReLU.
Tensor stem_forward(const SuperNet& net, const Tensor& noisy, int width);

// Remaining network from stem features (consumes the first cfg[0] channels)
// through the head, plus the residual connection to `noisy`.
struct BranchCache {
    std::vector<Tensor> inputs;  // input to conv i (post-ReLU of previous)
    std::vector<Tensor> pre;     // pre-activation outputs
};

Tensor branch_forward(const SuperNet& net, const WidthConfig& cfg, const Tensor& features,
                      const Tensor& noisy, BranchCache* cache = nullptr);

// Backward from dL/dprediction; accumulates into the tape and returns the
// gradient w.r.t. the branch's slice of the stem features (cfg[0] channels).
Tensor branch_backward(const SuperNet& net, const WidthConfig& cfg, const BranchCache& cache,
                       const Tensor& grad_pred, SuperNetGrad& tape);

// Whole-network forward at a config. With an attention head the stem runs at
// full width and its features are channel-recalibrated before the rest of the
// network (the super-network training path); without one the multiplier is
// identically 1 and the stem runs at cfg[0].
Tensor forward(const SuperNet& net, const WidthConfig& cfg, const Tensor& noisy,
               const GateAttention* att = nullptr);

// --- stage-1 training ----------------------------------------------------

// Largest first, smallest last, n-2 random configs in between; every random
// boundary width is drawn uniformly from the quantized grid.
std::vector<WidthConfig> sample_sandwich(const BackboneSpec& spec, Rng& rng, int n_samples);

struct SynergyLoss {
    double total = 0.0;
    double largest = 0.0;   // D(pred_largest, clean)
    double random = 0.0;    // sum of D(pred_random, sg(pred_largest))
    double smallest = 0.0;  // D(pred_smallest, sg(ensemble of the larger branches))
};

// One joint pass over all sandwich branches. Distillation targets are
// gradient-stopped; every branch accumulates into the shared tape. With
// distill=false each branch is supervised by the clean image instead (the
// no-distillation baseline).
SynergyLoss inplace_synergy_loss(const SuperNet& net, const std::vector<WidthConfig>& configs,
                                 const Tensor& noisy, const Tensor& clean, SuperNetGrad& tape,
                                 const GateAttention* att = nullptr,
                                 GateAttentionGrad* att_grad = nullptr, bool distill = true);

struct SupernetTrainOptions {
    int epochs = 1;
    int batch = 16;
    int n_samples = 4;
    AdamParams adam;      // lr defaults to 5e-5
    float lr_decay = 0.9f;
    bool distill = true;
    bool attention = true;
    std::uint64_t seed = 1;
};

struct SupernetEpochLog {
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0, loss_largest = 0.0, loss_random = 0.0, loss_smallest = 0.0;
    double val_psnr_largest = 0.0, val_psnr_smallest = 0.0;
};

struct SupernetTrainLog {
    std::vector<SupernetEpochLog> epochs;
};

// Mean PSNR of static execution at cfg over a patch set.
double evaluate_config(const SuperNet& net, const WidthConfig& cfg, std::span<const PatchPair> patches,
                       ThreadPool* pool = nullptr);

SupernetTrainLog train_supernet(SuperNet& net, GateAttention* att, std::span<const PatchPair> train,
                                std::span<const PatchPair> val, const SupernetTrainOptions& opt,
                                AdamState* adam_state = nullptr, ThreadPool* pool = nullptr);

// Parameter block lists in tape order, for the optimizer.
std::vector<float*> param_blocks(SuperNet& net, GateAttention* att);
std::vector<const float*> grad_blocks(const SuperNetGrad& tape, const GateAttentionGrad* att_grad);
std::vector<std::size_t> block_sizes(const SuperNet& net, const GateAttention* att);

}  // namespace slimden
