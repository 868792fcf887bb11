// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/gate_heads.hpp"

#include <cmath>
#include <string>

namespace slimden {

namespace {

void he_init(Linear& l, Rng& rng) {
    const float stddev = std::sqrt(2.0f / static_cast<float>(l.in_dim));
    for (auto& w : l.weight) w = rng.normal_f(0.0f, stddev);
}

}  // namespace

GateAttention GateAttention::init(int channels, int reduction, Rng& rng) {
    if (channels <= 0 || reduction <= 0 || channels % reduction != 0) {
        throw DataError("GateAttention: reduction must divide channel count, got C=" +
                        std::to_string(channels) + " r=" + std::to_string(reduction));
    }
    GateAttention a;
    a.channels = channels;
    a.reduction = reduction;
    a.w1 = Linear::make(channels / reduction, channels);
    a.w2 = Linear::make(channels, channels / reduction);
    he_init(a.w1, rng);
    // W2 starts at zero: multipliers are exactly 1 until trained, so the
    // attention path is a no-op at initialization.
    return a;
}

GatePredictor GatePredictor::init(int reduced_dim, int hidden_dim, int num_candidates, Rng& rng) {
    if (num_candidates < 1) throw DataError("GatePredictor: need at least one candidate");
    GatePredictor p;
    p.hidden_dim = hidden_dim;
    p.num_candidates = num_candidates;
    p.w3 = Linear::make(hidden_dim, reduced_dim);
    p.w4 = Linear::make(num_candidates, hidden_dim);
    p.bn = BatchNorm1d::make(hidden_dim);
    he_init(p.w3, rng);
    he_init(p.w4, rng);
    return p;
}

GateAttentionGrad GateAttentionGrad::like(const GateAttention& a) {
    GateAttentionGrad g;
    g.w1.assign(a.w1.weight.size(), 0.0f);
    g.w2.assign(a.w2.weight.size(), 0.0f);
    return g;
}

void GateAttentionGrad::zero() {
    std::fill(w1.begin(), w1.end(), 0.0f);
    std::fill(w2.begin(), w2.end(), 0.0f);
}

void GateAttentionGrad::add(const GateAttentionGrad& o) {
    for (std::size_t i = 0; i < w1.size(); ++i) w1[i] += o.w1[i];
    for (std::size_t i = 0; i < w2.size(); ++i) w2[i] += o.w2[i];
}

GatePredictorGrad GatePredictorGrad::like(const GatePredictor& p) {
    GatePredictorGrad g;
    g.w3.assign(p.w3.weight.size(), 0.0f);
    g.w4.assign(p.w4.weight.size(), 0.0f);
    g.bn = BatchNorm1dGrad::like(p.bn);
    return g;
}

void GatePredictorGrad::zero() {
    std::fill(w3.begin(), w3.end(), 0.0f);
    std::fill(w4.begin(), w4.end(), 0.0f);
    bn.zero();
}

Tensor squeeze(const Tensor& x) { return global_avg_pool_forward(x); }

Tensor attention_apply(const Tensor& x, const GateAttention& att) {
    AttentionCache cache;
    return attention_apply_cached(x, att, cache);
}

Tensor attention_apply_cached(const Tensor& x, const GateAttention& att, AttentionCache& cache) {
    if (x.c != att.channels) {
        throw DataError("attention_apply: feature channels " + std::to_string(x.c) +
                        " != attention channels " + std::to_string(att.channels));
    }
    cache.input = x;
    cache.pooled = squeeze(x);
    cache.hidden_pre = linear_forward(cache.pooled, att.w1);
    cache.hidden = relu_forward(cache.hidden_pre);
    cache.excite_tanh = tanh_forward(linear_forward(cache.hidden, att.w2));
    cache.multiplier = cache.excite_tanh;
    for (auto& v : cache.multiplier.data) v += 1.0f;

    Tensor out = x;
    for (int b = 0; b < x.n; ++b) {
        for (int ch = 0; ch < x.c; ++ch) {
            const float m = cache.multiplier.at(b, ch, 0, 0);
            float* p = out.chan(b, ch);
            for (std::size_t i = 0; i < out.plane(); ++i) p[i] *= m;
        }
    }
    return out;
}

Tensor attention_backward(const Tensor& grad_out, const GateAttention& att, const AttentionCache& cache,
                          GateAttentionGrad& grad) {
    const Tensor& x = cache.input;
    check_same_shape(grad_out, x, "attention_backward");

    // dX (direct product term) and d multiplier
    Tensor grad_in = grad_out;
    Tensor grad_mult(x.n, x.c, 1, 1);
    for (int b = 0; b < x.n; ++b) {
        for (int ch = 0; ch < x.c; ++ch) {
            const float m = cache.multiplier.at(b, ch, 0, 0);
            const float* go = grad_out.chan(b, ch);
            const float* xi = x.chan(b, ch);
            float* gi = grad_in.chan(b, ch);
            double dm = 0.0;
            for (std::size_t i = 0; i < x.plane(); ++i) {
                dm += static_cast<double>(go[i]) * xi[i];
                gi[i] = go[i] * m;
            }
            grad_mult.at(b, ch, 0, 0) = static_cast<float>(dm);
        }
    }

    // multiplier = 1 + tanh(W2 hidden)
    Tensor grad_excite = tanh_backward(grad_mult, cache.excite_tanh);
    Tensor grad_hidden = linear_backward(grad_excite, cache.hidden, att.w2, grad.w2);
    Tensor grad_hidden_pre = relu_backward(grad_hidden, cache.hidden_pre);
    Tensor grad_pooled = linear_backward(grad_hidden_pre, cache.pooled, att.w1, grad.w1);

    // squeeze backward folds into the input gradient
    Tensor grad_from_pool = global_avg_pool_backward(grad_pooled, x.h, x.w);
    for (std::size_t i = 0; i < grad_in.data.size(); ++i) grad_in.data[i] += grad_from_pool.data[i];
    return grad_in;
}

std::vector<int> argmax_rows(const Tensor& probs) {
    std::vector<int> idx(probs.n, 0);
    for (int b = 0; b < probs.n; ++b) {
        float best = probs.at(b, 0, 0, 0);
        for (int ch = 1; ch < probs.c; ++ch) {
            const float v = probs.at(b, ch, 0, 0);
            if (v > best) {
                best = v;
                idx[b] = ch;
            }
        }
    }
    return idx;
}

Tensor gate_predict_from_pooled(const Tensor& pooled, const GateAttention& att, GatePredictor& pred,
                                bool training, PredictorCache* cache) {
    if (pred.num_candidates < 2) {
        throw DataError("gate_predict: need at least 2 candidates, have " +
                        std::to_string(pred.num_candidates));
    }
    Tensor reduce_pre = linear_forward(pooled, att.w1);
    Tensor reduced = relu_forward(reduce_pre);
    Tensor hidden_pre = linear_forward(reduced, pred.w3);
    BatchNorm1dCache bn_cache;
    Tensor bn_out = batchnorm1d_forward(hidden_pre, pred.bn, training, cache ? &bn_cache : nullptr);
    Tensor hidden = relu_forward(bn_out);
    Tensor logits = linear_forward(hidden, pred.w4);
    Tensor probs = softmax_forward(logits);
    if (cache) {
        cache->pooled = pooled;
        cache->reduce_pre = std::move(reduce_pre);
        cache->reduced = std::move(reduced);
        cache->hidden_pre = std::move(hidden_pre);
        cache->bn = std::move(bn_cache);
        cache->bn_out = std::move(bn_out);
        cache->hidden = std::move(hidden);
        cache->probs = probs;
    }
    return probs;
}

Tensor gate_predict_infer(const Tensor& pooled, const GateAttention& att, const GatePredictor& pred) {
    if (pred.num_candidates < 2) {
        throw DataError("gate_predict: need at least 2 candidates, have " +
                        std::to_string(pred.num_candidates));
    }
    Tensor reduced = relu_forward(linear_forward(pooled, att.w1));
    Tensor hidden = relu_forward(batchnorm1d_infer(linear_forward(reduced, pred.w3), pred.bn));
    return softmax_forward(linear_forward(hidden, pred.w4));
}

std::pair<Tensor, std::vector<int>> gate_predict(const Tensor& x, const GateAttention& att,
                                                 GatePredictor& pred, bool training) {
    Tensor probs = gate_predict_from_pooled(squeeze(x), att, pred, training, nullptr);
    std::vector<int> idx = argmax_rows(probs);
    return {std::move(probs), std::move(idx)};
}

void gate_predict_backward(const Tensor& grad_logits, const GateAttention& att, const GatePredictor& pred,
                           const PredictorCache& cache, GateAttentionGrad& att_grad,
                           GatePredictorGrad& pred_grad) {
    Tensor grad_hidden = linear_backward(grad_logits, cache.hidden, pred.w4, pred_grad.w4);
    Tensor grad_bn_out = relu_backward(grad_hidden, cache.bn_out);
    Tensor grad_hidden_pre = batchnorm1d_backward(grad_bn_out, pred.bn, cache.bn, pred_grad.bn);
    Tensor grad_reduced = linear_backward(grad_hidden_pre, cache.reduced, pred.w3, pred_grad.w3);
    Tensor grad_reduce_pre = relu_backward(grad_reduced, cache.reduce_pre);
    linear_backward(grad_reduce_pre, cache.pooled, att.w1, att_grad.w1);
}

}  // namespace slimden
