// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0
//
// Layer forward/backward kernels. Every backward pass here is hand-derived
// and checked against central finite differences in the test suite.
//
// Slimmable convolution convention: a layer stores weights for its maximum
// width (out_max, in_max) and any call may execute a prefix (out_active,
// in_active). Arithmetic touches only the weight prefix; accumulation order
// is fixed (input-channel-major), so results are deterministic and the first
// a output channels agree bitwise between a width-a and a width-b run, a<=b.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slimden/tensor.hpp"

namespace slimden {

struct ConvLayer {
    int out_max = 0, in_max = 0;
    int ksize = 3, stride = 1, padding = 1;
    Tensor weight;             // (out_max, in_max, k, k)
    std::vector<float> bias;   // out_max

    static ConvLayer make(int out_max, int in_max, int ksize, int stride = 1, int padding = -1);
};

// Gradient buffers mirroring one ConvLayer.
struct ConvGrad {
    Tensor weight;
    std::vector<float> bias;

    static ConvGrad like(const ConvLayer& l);
    void zero();
    void add(const ConvGrad& o);
};

int conv_out_extent(int in, int ksize, int stride, int padding);

Tensor conv2d_slim_forward(const Tensor& input, const ConvLayer& layer, int in_active, int out_active);

// Accumulates weight/bias gradients into `grad` (prefix entries only) and
// returns the gradient w.r.t. the first in_active input channels.
Tensor conv2d_slim_backward(const Tensor& grad_out, const Tensor& saved_input, const ConvLayer& layer,
                            int in_active, int out_active, ConvGrad& grad);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& grad_out, const Tensor& saved_input);
void relu_inplace(Tensor& x);

Tensor tanh_forward(const Tensor& x);
// Uses the saved forward output: d tanh = 1 - y^2.
Tensor tanh_backward(const Tensor& grad_out, const Tensor& saved_output);

// (n,c,h,w) -> (n,c,1,1), mean over the spatial extent.
Tensor global_avg_pool_forward(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& grad_out, int h, int w);

// Row-wise softmax over the channel dimension of (n,c,1,1) vectors.
Tensor softmax_forward(const Tensor& logits);
Tensor softmax_backward(const Tensor& grad_out, const Tensor& saved_output);

// Bias-free fully connected layer on (n,in,1,1) vectors; weight is row-major
// (out, in). This is the 1x1-convolution-on-a-vector case.
struct Linear {
    int out_dim = 0, in_dim = 0;
    std::vector<float> weight;

    static Linear make(int out_dim, int in_dim);
};

Tensor linear_forward(const Tensor& x, const Linear& l);
Tensor linear_backward(const Tensor& grad_out, const Tensor& saved_input, const Linear& l,
                       std::vector<float>& weight_grad);

// 1-D batch normalization over (n,dim,1,1) feature vectors.
struct BatchNorm1d {
    int dim = 0;
    float eps = 1e-5f;
    float momentum = 0.1f;
    std::vector<float> gamma, beta, running_mean, running_var;

    static BatchNorm1d make(int dim);
};

struct BatchNorm1dCache {
    Tensor xhat;
    std::vector<float> inv_std;
};

struct BatchNorm1dGrad {
    std::vector<float> gamma, beta;

    static BatchNorm1dGrad like(const BatchNorm1d& bn);
    void zero();
};

// Training mode uses batch statistics and updates the running estimates;
// inference mode uses the running estimates and leaves them untouched.
Tensor batchnorm1d_forward(const Tensor& x, BatchNorm1d& bn, bool training, BatchNorm1dCache* cache);
Tensor batchnorm1d_infer(const Tensor& x, const BatchNorm1d& bn);
Tensor batchnorm1d_backward(const Tensor& grad_out, const BatchNorm1d& bn, const BatchNorm1dCache& cache,
                            BatchNorm1dGrad& grad);

// Mean squared divergence D(pred, target): value accumulated in f64. The
// gradient is taken w.r.t. pred only -- the target side is always detached,
// which is how distillation targets are gradient-stopped.
double divergence_loss(const Tensor& pred, const Tensor& target);
Tensor divergence_loss_backward(const Tensor& pred, const Tensor& target);

}  // namespace slimden
