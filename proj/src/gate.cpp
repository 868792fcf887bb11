// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/gate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slimden/quality.hpp"
#include "slimden/threadpool.hpp"

namespace slimden {

double dynamic_flops_per_pixel(const BackboneSpec& spec, const WidthConfig& cfg, const GateDims& dims,
                               int h, int w) {
    return count_flops(spec, cfg, h, w, &dims, /*stem_full_width=*/true).flops_per_pixel;
}

GateNet make_gate(const BackboneSpec& spec, const RoutingSpace& space, int num_candidates,
                  int reduction, int hidden_dim, int image_h, int image_w, Rng& rng) {
    if (space.entries.empty()) throw DataError("make_gate: empty routing space");

    // Pick the stratified subset: both extremes always, plus entries nearest
    // to evenly spaced FLOPs targets in between.
    std::vector<std::size_t> picked;
    const std::size_t n_entries = space.entries.size();
    if (num_candidates <= 0 || static_cast<std::size_t>(num_candidates) >= n_entries) {
        picked.resize(n_entries);
        std::iota(picked.begin(), picked.end(), 0);
    } else {
        picked.push_back(0);
        picked.push_back(n_entries - 1);
        const double f_large = space.entries.front().flops_per_pixel;
        const double f_small = space.entries.back().flops_per_pixel;
        for (int k = 1; k <= num_candidates - 2; ++k) {
            const double target =
                f_small + (f_large - f_small) * static_cast<double>(k) / (num_candidates - 1);
            std::size_t best = 0;
            double best_dist = -1.0;
            for (std::size_t i = 0; i < n_entries; ++i) {
                if (std::find(picked.begin(), picked.end(), i) != picked.end()) continue;
                const double d = std::abs(space.entries[i].flops_per_pixel - target);
                if (best_dist < 0.0 || d < best_dist) {
                    best_dist = d;
                    best = i;
                }
            }
            if (best_dist >= 0.0) picked.push_back(best);
        }
    }

    // entries are descending by FLOPs; candidates go ascending
    std::sort(picked.begin(), picked.end(), std::greater<>());

    GateNet gate;
    gate.attention = GateAttention::init(spec.max_width[0], reduction, rng);
    gate.predictor = GatePredictor::init(gate.attention.reduced_dim(), hidden_dim,
                                         static_cast<int>(picked.size()), rng);
    const GateDims dims{gate.attention.channels, gate.attention.reduction, gate.predictor.hidden_dim,
                        gate.predictor.num_candidates};
    for (std::size_t i : picked) {
        gate.candidates.push_back(space.entries[i].config);
        gate.candidate_flops.push_back(
            dynamic_flops_per_pixel(spec, space.entries[i].config, dims, image_h, image_w));
    }
    return gate;
}

DifficultyLabel label_online(const SuperNet& net, const Tensor& noisy, const Tensor& clean, double beta,
                             int num_classes) {
    if (beta <= 0.0) throw DataError("label_online: beta must be positive");
    const double psnr_large = psnr(forward(net, largest_config(net.spec), noisy), clean);
    const double psnr_small = psnr(forward(net, smallest_config(net.spec), noisy), clean);
    DifficultyLabel label;
    label.num_classes = num_classes;
    label.psnr_gain = psnr_large - psnr_small;
    // gain strictly above beta: hard, largest candidate; otherwise easy
    label.index = label.psnr_gain > beta ? num_classes - 1 : 0;
    return label;
}

double gate_loss(const Tensor& probs, std::span<const int> label_index) {
    if (static_cast<std::size_t>(probs.n) != label_index.size()) {
        throw DataError("gate_loss: batch size mismatch");
    }
    double total = 0.0;
    for (int b = 0; b < probs.n; ++b) {
        const double p = std::max(1e-12, static_cast<double>(probs.at(b, label_index[b], 0, 0)));
        total -= std::log(p);
    }
    return total / static_cast<double>(probs.n);
}

double complexity_loss(double expected_flops_px, const ComplexityBudget& budget) {
    if (budget.norm_flops_px <= 0.0 || budget.target_flops_px <= 0.0) {
        throw DataError("complexity_loss: budget fields must be positive");
    }
    const double z = (expected_flops_px - budget.target_flops_px) / budget.norm_flops_px;
    return z * z;
}

GateTrainLog train_gate(GateNet& gate, const SuperNet& net, std::span<const PatchPair> train,
                        const ComplexityBudget& budget, const GateTrainOptions& opt, ThreadPool* pool) {
    if (train.empty()) throw DataError("train_gate: empty training set");
    const int e_count = gate.num_candidates();
    if (e_count < 2) throw DataError("train_gate: need at least 2 candidates");

    GateTrainLog log;
    log.labels.assign(train.size(), -1);

    // The backbone is frozen, so both the difficulty labels and the squeeze
    // vectors are fixed per image; generate them once up front.
    std::vector<Tensor> pooled(train.size());
    auto prepare = [&](std::size_t i) {
        const PatchPair& p = train[i];
        log.labels[i] = label_online(net, p.noisy, p.clean, opt.beta, e_count).index;
        pooled[i] = squeeze(stem_forward(net, p.noisy, net.spec.max_width[0]));
    };
    if (pool) {
        pool->parallel_for(train.size(), prepare);
    } else {
        for (std::size_t i = 0; i < train.size(); ++i) prepare(i);
    }

    AdamState state;
    state.hp = opt.adam;
    GateAttentionGrad att_grad = GateAttentionGrad::like(gate.attention);
    GatePredictorGrad pred_grad = GatePredictorGrad::like(gate.predictor);

    const double t_norm = budget.norm_flops_px;
    const double c_target = budget.target_flops_px;
    if (t_norm <= 0.0 || c_target <= 0.0) throw DataError("train_gate: budget fields must be positive");

    Rng rng(opt.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    const int att_dim = gate.attention.channels;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        state.hp.lr = opt.adam.lr * std::pow(opt.lr_decay, static_cast<float>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);
        }

        double ep_ce = 0.0, ep_comp = 0.0, ep_psi = 0.0;
        std::size_t ep_correct = 0, seen = 0, iterations = 0;

        for (std::size_t start = 0; start < order.size(); start += opt.batch) {
            const int count = static_cast<int>(std::min<std::size_t>(opt.batch, order.size() - start));
            Tensor batch_pooled(count, att_dim, 1, 1);
            std::vector<int> labels(count);
            for (int i = 0; i < count; ++i) {
                const std::size_t idx = order[start + i];
                std::copy_n(pooled[idx].data.data(), att_dim, batch_pooled.chan(i, 0));
                labels[i] = log.labels[idx];
            }

            PredictorCache cache;
            Tensor probs = gate_predict_from_pooled(batch_pooled, gate.attention, gate.predictor,
                                                    /*training=*/true, &cache);

            const double ce = gate_loss(probs, labels);

            // complexity term, normalized by T for conditioning
            Tensor dprobs(count, e_count, 1, 1);
            double comp = 0.0;
            for (int i = 0; i < count; ++i) {
                double psi = 0.0;
                for (int e = 0; e < e_count; ++e) {
                    psi += static_cast<double>(probs.at(i, e, 0, 0)) * gate.candidate_flops[e];
                }
                ep_psi += psi;
                const double z = (psi - c_target) / t_norm;
                comp += z * z;
                const double dz = 2.0 * z / t_norm * opt.comp_weight / count;
                for (int e = 0; e < e_count; ++e) {
                    dprobs.at(i, e, 0, 0) = static_cast<float>(dz * gate.candidate_flops[e]);
                }
            }
            comp /= count;

            const double batch_loss = ce + opt.comp_weight * comp;
            if (!std::isfinite(batch_loss)) {
                throw NumericError("train_gate: non-finite loss at epoch " + std::to_string(epoch) +
                                   " iteration " + std::to_string(iterations));
            }

            // dL/dlogits: cross-entropy collapses with softmax to (p - onehot);
            // the complexity part goes through the softmax jacobian.
            Tensor dlogits = softmax_backward(dprobs, probs);
            const float inv_count = 1.0f / static_cast<float>(count);
            for (int i = 0; i < count; ++i) {
                for (int e = 0; e < e_count; ++e) {
                    const float onehot = e == labels[i] ? 1.0f : 0.0f;
                    dlogits.at(i, e, 0, 0) += (probs.at(i, e, 0, 0) - onehot) * inv_count;
                }
            }

            att_grad.zero();
            pred_grad.zero();
            gate_predict_backward(dlogits, gate.attention, gate.predictor, cache, att_grad, pred_grad);

            std::vector<float*> params = {gate.attention.w1.weight.data(),
                                          gate.attention.w2.weight.data(),
                                          gate.predictor.w3.weight.data(),
                                          gate.predictor.w4.weight.data(),
                                          gate.predictor.bn.gamma.data(),
                                          gate.predictor.bn.beta.data()};
            std::vector<const float*> grads = {att_grad.w1.data(), att_grad.w2.data(),
                                               pred_grad.w3.data(), pred_grad.w4.data(),
                                               pred_grad.bn.gamma.data(), pred_grad.bn.beta.data()};
            std::vector<std::size_t> sizes = {gate.attention.w1.weight.size(),
                                              gate.attention.w2.weight.size(),
                                              gate.predictor.w3.weight.size(),
                                              gate.predictor.w4.weight.size(),
                                              gate.predictor.bn.gamma.size(),
                                              gate.predictor.bn.beta.size()};
            adam_step(params, grads, sizes, state);

            const std::vector<int> pred_idx = argmax_rows(probs);
            for (int i = 0; i < count; ++i) {
                if (pred_idx[i] == labels[i]) ++ep_correct;
            }
            ep_ce += ce * count;
            ep_comp += comp * count;
            seen += count;
            ++iterations;
        }

        GateEpochLog el;
        el.epoch = epoch;
        el.lr = state.hp.lr;
        el.ce = ep_ce / static_cast<double>(seen);
        el.comp = ep_comp / static_cast<double>(seen);
        el.loss = el.ce + opt.comp_weight * el.comp;
        el.label_accuracy = static_cast<double>(ep_correct) / static_cast<double>(seen);
        el.expected_flops_px = ep_psi / static_cast<double>(seen);
        log.epochs.push_back(el);
    }
    return log;
}

DynamicResult dynamic_denoise(const SuperNet& net, const GateNet& gate, const Tensor& noisy,
                              int force_route) {
    if (gate.candidates.empty()) throw DataError("dynamic_denoise: gate has no candidates");
    Tensor features = stem_forward(net, noisy, net.spec.max_width[0]);

    DynamicResult result;
    if (force_route >= 0) {
        if (force_route >= gate.num_candidates()) throw DataError("dynamic_denoise: forced route out of range");
        result.candidate_index = force_route;
    } else if (gate.num_candidates() == 1) {
        result.candidate_index = 0;
    } else {
        const Tensor probs =
            gate_predict_infer(squeeze(features), gate.attention, gate.predictor);
        result.candidate_index = argmax_rows(probs)[0];
    }
    result.route = gate.candidates[result.candidate_index];
    result.denoised = branch_forward(net, result.route, features, noisy, nullptr);
    const GateDims dims{gate.attention.channels, gate.attention.reduction, gate.predictor.hidden_dim,
                        gate.predictor.num_candidates};
    result.flops_per_pixel = dynamic_flops_per_pixel(net.spec, result.route, dims, noisy.h, noisy.w);
    return result;
}

}  // namespace slimden
