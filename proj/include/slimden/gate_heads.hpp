// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0
//
// The two small heads that ride on the first conv block's features:
//
//   attention:  U = squeeze(X);  X~ = X * (1 + tanh(W2 relu(W1 U)))
//   predictor:  R = relu(W1 U);  probs = softmax(W4 relu(BN(W3 R)))
//
// W1 is shared between the two. The attention multiplier recalibrates
// channels during super-network training only; the predictor picks one of E
// candidate sub-networks at inference time. Per-channel multipliers always
// lie in (0, 2) because 1 + tanh does.

#pragma once

#include <utility>
#include <vector>

#include "slimden/ops.hpp"
#include "slimden/rng.hpp"

namespace slimden {

struct GateAttention {
    int channels = 0;   // attachment-point channel count C
    int reduction = 4;  // r; C/r is the reduced dimension
    Linear w1;          // (C/r, C)
    Linear w2;          // (C, C/r)

    static GateAttention init(int channels, int reduction, Rng& rng);
    int reduced_dim() const { return channels / reduction; }
};

struct GatePredictor {
    int hidden_dim = 16;  // D
    int num_candidates = 0;  // E
    Linear w3;            // (D, C/r)
    Linear w4;            // (E, D)
    BatchNorm1d bn;       // over the hidden dimension

    static GatePredictor init(int reduced_dim, int hidden_dim, int num_candidates, Rng& rng);
};

struct GateAttentionGrad {
    std::vector<float> w1, w2;

    static GateAttentionGrad like(const GateAttention& a);
    void zero();
    void add(const GateAttentionGrad& o);
};

struct GatePredictorGrad {
    std::vector<float> w3, w4;
    BatchNorm1dGrad bn;

    static GatePredictorGrad like(const GatePredictor& p);
    void zero();
};

// Channel-mean squeeze: (n,C,H,W) -> (n,C,1,1).
Tensor squeeze(const Tensor& x);

// Applies the attention multiplier; plain inference path, no cache.
Tensor attention_apply(const Tensor& x, const GateAttention& att);

// Forward with saved intermediates so the pass can be reversed.
struct AttentionCache {
    Tensor input;        // X
    Tensor pooled;       // U
    Tensor hidden_pre;   // W1 U
    Tensor hidden;       // relu(W1 U)
    Tensor excite_tanh;  // tanh(W2 hidden)
    Tensor multiplier;   // (n,C,1,1), 1 + excite_tanh
};

Tensor attention_apply_cached(const Tensor& x, const GateAttention& att, AttentionCache& cache);

// Backward through multiply + excitation + squeeze; returns dL/dX.
Tensor attention_backward(const Tensor& grad_out, const GateAttention& att, const AttentionCache& cache,
                          GateAttentionGrad& grad);

// Full prediction path from attachment features. Returns per-item softmax
// probabilities (n,E,1,1) and per-item argmax indices (first index wins ties).
std::pair<Tensor, std::vector<int>> gate_predict(const Tensor& x, const GateAttention& att,
                                                 GatePredictor& pred, bool training);

// Same path but starting from a precomputed squeeze vector (n,C,1,1).
struct PredictorCache {
    Tensor pooled;      // U
    Tensor reduce_pre;  // W1 U
    Tensor reduced;     // R = relu(W1 U)
    Tensor hidden_pre;  // W3 R
    BatchNorm1dCache bn;
    Tensor bn_out;
    Tensor hidden;      // relu(bn_out)
    Tensor probs;
};

Tensor gate_predict_from_pooled(const Tensor& pooled, const GateAttention& att, GatePredictor& pred,
                                bool training, PredictorCache* cache);

// Inference-only variant: running statistics, nothing mutated, no cache.
Tensor gate_predict_infer(const Tensor& pooled, const GateAttention& att, const GatePredictor& pred);

std::vector<int> argmax_rows(const Tensor& probs);

// Backward from dL/dlogits; accumulates into the shared-W1 attention grad and
// the predictor grad. Gradients stop at the pooled vector (the backbone below
// is frozen during gate training).
void gate_predict_backward(const Tensor& grad_logits, const GateAttention& att, const GatePredictor& pred,
                           const PredictorCache& cache, GateAttentionGrad& att_grad,
                           GatePredictorGrad& pred_grad);

}  // namespace slimden
