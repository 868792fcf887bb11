// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "slimden/quality.hpp"
#include "slimden/threadpool.hpp"

namespace slimden {

namespace {

int snap_to_quantum(double channels, int quantum) {
    const int rounded = static_cast<int>(std::lround(channels));
    const int snapped =
        static_cast<int>(std::lround(static_cast<double>(rounded) / quantum)) * quantum;
    return snapped;
}

// Copies the first `width` channels of src into an exact-width tensor.
Tensor narrow_copy(const Tensor& src, int width) {
    Tensor out(src.n, width, src.h, src.w);
    for (int b = 0; b < src.n; ++b) {
        std::memcpy(out.chan(b, 0), src.chan(b, 0), sizeof(float) * out.item_size());
    }
    return out;
}

}  // namespace

BackboneSpec BackboneSpec::make(int layers, int base_width, int kernel, double rho_min, double rho_max,
                                int quantum) {
    if (layers < 1) throw DataError("BackboneSpec: need at least one boundary");
    BackboneSpec s;
    s.layers = layers;
    s.base_width = base_width;
    s.kernel = kernel;
    s.rho_min = rho_min;
    s.rho_max = rho_max;
    s.quantum = quantum;
    s.min_width.resize(layers);
    s.max_width.resize(layers);
    for (int i = 0; i < layers; ++i) {
        const int lo = std::max(quantum, snap_to_quantum(rho_min * base_width, quantum));
        const int hi = std::max(lo, snap_to_quantum(rho_max * base_width, quantum));
        s.min_width[i] = lo;
        s.max_width[i] = hi;
    }
    return s;
}

std::vector<int> BackboneSpec::width_grid(int boundary) const {
    std::vector<int> grid;
    for (int w = min_width[boundary]; w <= max_width[boundary]; w += quantum) grid.push_back(w);
    return grid;
}

std::string WidthConfig::str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < active.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(active[i]);
    }
    return s + "]";
}

WidthConfig largest_config(const BackboneSpec& spec) { return {spec.max_width}; }
WidthConfig smallest_config(const BackboneSpec& spec) { return {spec.min_width}; }

bool config_valid(const BackboneSpec& spec, const WidthConfig& cfg) {
    if (static_cast<int>(cfg.active.size()) != spec.layers) return false;
    for (int i = 0; i < spec.layers; ++i) {
        if (cfg.active[i] < spec.min_width[i] || cfg.active[i] > spec.max_width[i]) return false;
    }
    return true;
}

void require_valid(const BackboneSpec& spec, const WidthConfig& cfg, const char* what) {
    if (!config_valid(spec, cfg)) {
        throw DataError(std::string(what) + ": invalid width config " + cfg.str());
    }
}

SuperNet SuperNet::init(const BackboneSpec& spec, Rng& rng) {
    SuperNet net;
    net.spec = spec;
    net.convs.reserve(spec.conv_count());
    for (int i = 0; i < spec.conv_count(); ++i) {
        const int in_max = i == 0 ? spec.image_channels : spec.max_width[i - 1];
        const int out_max = i == spec.layers ? spec.image_channels : spec.max_width[i];
        ConvLayer l = ConvLayer::make(out_max, in_max, spec.kernel);
        const float stddev = std::sqrt(2.0f / static_cast<float>(in_max * spec.kernel * spec.kernel));
        for (auto& w : l.weight.data) w = rng.normal_f(0.0f, stddev);
        // Head starts at zero so the initial prediction is the identity;
        // residual training then only has to learn the correction.
        if (i == spec.layers) l.weight.fill(0.0f);
        net.convs.push_back(std::move(l));
    }
    return net;
}

SuperNetGrad SuperNetGrad::like(const SuperNet& net) {
    SuperNetGrad g;
    g.convs.reserve(net.convs.size());
    for (const auto& c : net.convs) g.convs.push_back(ConvGrad::like(c));
    return g;
}

void SuperNetGrad::zero() {
    for (auto& c : convs) c.zero();
}

void SuperNetGrad::add(const SuperNetGrad& o) {
    for (std::size_t i = 0; i < convs.size(); ++i) convs[i].add(o.convs[i]);
}

void SuperNetGrad::scale(float s) {
    for (auto& c : convs) {
        for (auto& v : c.weight.data) v *= s;
        for (auto& v : c.bias) v *= s;
    }
}

Tensor stem_forward(const SuperNet& net, const Tensor& noisy, int width) {
    Tensor pre = conv2d_slim_forward(noisy, net.convs[0], net.spec.image_channels, width);
    relu_inplace(pre);
    return pre;
}

Tensor branch_forward(const SuperNet& net, const WidthConfig& cfg, const Tensor& features,
                      const Tensor& noisy, BranchCache* cache) {
    const int layers = net.spec.layers;
    if (features.c < cfg.active[0]) {
        throw DataError("branch_forward: stem features narrower than cfg[0]");
    }
    Tensor cur = features.c == cfg.active[0] ? features : narrow_copy(features, cfg.active[0]);
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
        cache->inputs.reserve(layers);
        cache->pre.reserve(layers - 1);
    }
    for (int i = 1; i < layers; ++i) {
        Tensor pre = conv2d_slim_forward(cur, net.convs[i], cfg.active[i - 1], cfg.active[i]);
        if (cache) {
            cache->inputs.push_back(std::move(cur));
            cache->pre.push_back(pre);
        }
        relu_inplace(pre);
        cur = std::move(pre);
    }
    Tensor out =
        conv2d_slim_forward(cur, net.convs[layers], cfg.active[layers - 1], net.spec.image_channels);
    if (cache) cache->inputs.push_back(std::move(cur));
    check_same_shape(out, noisy, "branch_forward residual");
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += noisy.data[i];
    return out;
}

Tensor branch_backward(const SuperNet& net, const WidthConfig& cfg, const BranchCache& cache,
                       const Tensor& grad_pred, SuperNetGrad& tape) {
    const int layers = net.spec.layers;
    // residual add passes the gradient straight through to the head output
    Tensor g = conv2d_slim_backward(grad_pred, cache.inputs[layers - 1], net.convs[layers],
                                    cfg.active[layers - 1], net.spec.image_channels,
                                    tape.convs[layers]);
    for (int i = layers - 1; i >= 1; --i) {
        g = relu_backward(g, cache.pre[i - 1]);
        g = conv2d_slim_backward(g, cache.inputs[i - 1], net.convs[i], cfg.active[i - 1], cfg.active[i],
                                 tape.convs[i]);
    }
    return g;
}

Tensor forward(const SuperNet& net, const WidthConfig& cfg, const Tensor& noisy,
               const GateAttention* att) {
    require_valid(net.spec, cfg, "forward");
    if (att) {
        Tensor features = stem_forward(net, noisy, net.spec.max_width[0]);
        features = attention_apply(features, *att);
        return branch_forward(net, cfg, features, noisy, nullptr);
    }
    Tensor features = stem_forward(net, noisy, cfg.active[0]);
    return branch_forward(net, cfg, features, noisy, nullptr);
}

std::vector<WidthConfig> sample_sandwich(const BackboneSpec& spec, Rng& rng, int n_samples) {
    if (n_samples < 2) throw DataError("sample_sandwich: need at least 2 samples");
    std::vector<WidthConfig> configs;
    configs.reserve(n_samples);
    configs.push_back(largest_config(spec));
    for (int s = 0; s < n_samples - 2; ++s) {
        WidthConfig cfg;
        cfg.active.resize(spec.layers);
        for (int i = 0; i < spec.layers; ++i) {
            const int steps = (spec.max_width[i] - spec.min_width[i]) / spec.quantum;
            cfg.active[i] = spec.min_width[i] + spec.quantum * rng.uniform_int(0, steps);
        }
        configs.push_back(std::move(cfg));
    }
    configs.push_back(smallest_config(spec));
    return configs;
}

SynergyLoss inplace_synergy_loss(const SuperNet& net, const std::vector<WidthConfig>& configs,
                                 const Tensor& noisy, const Tensor& clean, SuperNetGrad& tape,
                                 const GateAttention* att, GateAttentionGrad* att_grad, bool distill) {
    if (configs.size() < 2) throw DataError("inplace_synergy_loss: need at least 2 configs");
    for (const auto& cfg : configs) require_valid(net.spec, cfg, "inplace_synergy_loss");
    const int n = static_cast<int>(configs.size());
    const int full = net.spec.max_width[0];

    // Shared stem at full width; every branch consumes a prefix of it.
    Tensor stem_pre = conv2d_slim_forward(noisy, net.convs[0], net.spec.image_channels, full);
    Tensor stem_post = relu_forward(stem_pre);
    AttentionCache att_cache;
    Tensor features = att ? attention_apply_cached(stem_post, *att, att_cache) : stem_post;

    std::vector<BranchCache> caches(n);
    std::vector<Tensor> preds(n);
    for (int b = 0; b < n; ++b) {
        preds[b] = branch_forward(net, configs[b], features, noisy, &caches[b]);
    }

    // Ensemble of the largest and random branches, the smallest branch's
    // (gradient-stopped) distillation target.
    Tensor ensemble = preds[0];
    if (n > 2) {
        for (int b = 1; b < n - 1; ++b) {
            for (std::size_t i = 0; i < ensemble.data.size(); ++i) ensemble.data[i] += preds[b].data[i];
        }
        const float inv = 1.0f / static_cast<float>(n - 1);
        for (auto& v : ensemble.data) v *= inv;
    }

    SynergyLoss loss;
    Tensor grad_features(features.n, features.c, features.h, features.w);
    for (int b = 0; b < n; ++b) {
        const Tensor* target = &clean;
        if (distill && b > 0) target = b == n - 1 ? &ensemble : &preds[0];
        const double d = divergence_loss(preds[b], *target);
        if (b == 0) {
            loss.largest = d;
        } else if (b == n - 1) {
            loss.smallest = d;
        } else {
            loss.random += d;
        }
        Tensor grad_pred = divergence_loss_backward(preds[b], *target);
        Tensor grad_branch_features = branch_backward(net, configs[b], caches[b], grad_pred, tape);
        for (int item = 0; item < grad_features.n; ++item) {
            float* dst = grad_features.chan(item, 0);
            const float* src = grad_branch_features.chan(item, 0);
            const std::size_t sz = grad_branch_features.item_size();
            for (std::size_t i = 0; i < sz; ++i) dst[i] += src[i];
        }
    }
    loss.total = loss.largest + loss.random + loss.smallest;

    Tensor grad_stem_post;
    if (att) {
        if (!att_grad) throw DataError("inplace_synergy_loss: attention grad buffer missing");
        grad_stem_post = attention_backward(grad_features, *att, att_cache, *att_grad);
    } else {
        grad_stem_post = std::move(grad_features);
    }
    Tensor grad_stem_pre = relu_backward(grad_stem_post, stem_pre);
    conv2d_slim_backward(grad_stem_pre, noisy, net.convs[0], net.spec.image_channels, full,
                         tape.convs[0]);
    return loss;
}

double evaluate_config(const SuperNet& net, const WidthConfig& cfg, std::span<const PatchPair> patches,
                       ThreadPool* pool) {
    require_valid(net.spec, cfg, "evaluate_config");
    if (patches.empty()) throw DataError("evaluate_config: empty patch set");
    std::vector<double> scores(patches.size());
    auto eval_one = [&](std::size_t i) {
        scores[i] = psnr(forward(net, cfg, patches[i].noisy), patches[i].clean);
    };
    if (pool) {
        pool->parallel_for(patches.size(), eval_one);
    } else {
        for (std::size_t i = 0; i < patches.size(); ++i) eval_one(i);
    }
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
}

std::vector<float*> param_blocks(SuperNet& net, GateAttention* att) {
    std::vector<float*> out;
    for (auto& c : net.convs) {
        out.push_back(c.weight.data.data());
        out.push_back(c.bias.data());
    }
    if (att) {
        out.push_back(att->w1.weight.data());
        out.push_back(att->w2.weight.data());
    }
    return out;
}

std::vector<const float*> grad_blocks(const SuperNetGrad& tape, const GateAttentionGrad* att_grad) {
    std::vector<const float*> out;
    for (const auto& c : tape.convs) {
        out.push_back(c.weight.data.data());
        out.push_back(c.bias.data());
    }
    if (att_grad) {
        out.push_back(att_grad->w1.data());
        out.push_back(att_grad->w2.data());
    }
    return out;
}

std::vector<std::size_t> block_sizes(const SuperNet& net, const GateAttention* att) {
    std::vector<std::size_t> out;
    for (const auto& c : net.convs) {
        out.push_back(c.weight.data.size());
        out.push_back(c.bias.size());
    }
    if (att) {
        out.push_back(att->w1.weight.size());
        out.push_back(att->w2.weight.size());
    }
    return out;
}

SupernetTrainLog train_supernet(SuperNet& net, GateAttention* att, std::span<const PatchPair> train,
                                std::span<const PatchPair> val, const SupernetTrainOptions& opt,
                                AdamState* adam_state, ThreadPool* pool) {
    if (train.empty()) throw DataError("train_supernet: empty training set");
    if (opt.batch < 1) throw DataError("train_supernet: batch must be >= 1");

    SupernetTrainLog log;
    AdamState local_state;
    AdamState& state = adam_state ? *adam_state : local_state;
    state.hp = opt.adam;

    Rng rng(opt.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    const int workers = pool ? pool->size() : 1;
    std::vector<SuperNetGrad> item_tapes;
    std::vector<GateAttentionGrad> item_att_grads;
    for (int i = 0; i < opt.batch; ++i) {
        item_tapes.push_back(SuperNetGrad::like(net));
        if (att) item_att_grads.push_back(GateAttentionGrad::like(*att));
    }
    (void)workers;

    SuperNetGrad tape = SuperNetGrad::like(net);
    GateAttentionGrad att_grad;
    if (att) att_grad = GateAttentionGrad::like(*att);

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        state.hp.lr = opt.adam.lr * std::pow(opt.lr_decay, static_cast<float>(epoch));

        // deterministic Fisher-Yates shuffle
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);
        }

        double ep_loss = 0.0, ep_largest = 0.0, ep_random = 0.0, ep_smallest = 0.0;
        std::size_t iterations = 0;

        for (std::size_t start = 0; start < order.size(); start += opt.batch) {
            const std::size_t count = std::min<std::size_t>(opt.batch, order.size() - start);
            const std::vector<WidthConfig> configs = sample_sandwich(net.spec, rng, opt.n_samples);

            std::vector<SynergyLoss> losses(count);
            auto run_item = [&](std::size_t i) {
                const PatchPair& p = train[order[start + i]];
                item_tapes[i].zero();
                if (att) item_att_grads[i].zero();
                losses[i] = inplace_synergy_loss(net, configs, p.noisy, p.clean, item_tapes[i], att,
                                                 att ? &item_att_grads[i] : nullptr, opt.distill);
            };
            if (pool) {
                pool->parallel_for(count, run_item);
            } else {
                for (std::size_t i = 0; i < count; ++i) run_item(i);
            }

            // reduce in item order so results do not depend on scheduling
            tape.zero();
            if (att) att_grad.zero();
            double batch_loss = 0.0;
            for (std::size_t i = 0; i < count; ++i) {
                tape.add(item_tapes[i]);
                if (att) att_grad.add(item_att_grads[i]);
                batch_loss += losses[i].total;
                ep_largest += losses[i].largest;
                ep_random += losses[i].random;
                ep_smallest += losses[i].smallest;
            }
            const float inv = 1.0f / static_cast<float>(count);
            tape.scale(inv);
            if (att) {
                for (auto& v : att_grad.w1) v *= inv;
                for (auto& v : att_grad.w2) v *= inv;
            }
            batch_loss /= static_cast<double>(count);
            if (!std::isfinite(batch_loss)) {
                throw NumericError("train_supernet: non-finite loss at epoch " + std::to_string(epoch) +
                                   " iteration " + std::to_string(iterations) + " (lr " +
                                   std::to_string(state.hp.lr) + ")");
            }
            ep_loss += batch_loss * count;
            ++iterations;

            auto params = param_blocks(net, att);
            auto grads = grad_blocks(tape, att ? &att_grad : nullptr);
            auto sizes = block_sizes(net, att);
            adam_step(params, grads, sizes, state);
        }

        SupernetEpochLog el;
        el.epoch = epoch;
        el.lr = state.hp.lr;
        el.loss = ep_loss / static_cast<double>(train.size());
        el.loss_largest = ep_largest / static_cast<double>(train.size());
        el.loss_random = ep_random / static_cast<double>(train.size());
        el.loss_smallest = ep_smallest / static_cast<double>(train.size());
        if (!val.empty()) {
            el.val_psnr_largest = evaluate_config(net, largest_config(net.spec), val, pool);
            el.val_psnr_smallest = evaluate_config(net, smallest_config(net.spec), val, pool);
        }
        log.epochs.push_back(el);
    }
    return log;
}

}  // namespace slimden
