// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#endif

namespace slimden {

namespace {

// Deterministic row dot product: lane accumulators are combined in a fixed
// order, so results are identical run to run for a given build.
inline float dot_row(const float* a, const float* b, int n) {
    int i = 0;
    float s;
#if defined(__AVX2__) && defined(__FMA__)
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    }
    float lanes[16];
    _mm256_storeu_ps(lanes, acc0);
    _mm256_storeu_ps(lanes + 8, acc1);
    s = 0.0f;
    for (int l = 0; l < 16; ++l) s += lanes[l];
#else
    float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    s = (s0 + s1) + (s2 + s3);
#endif
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline float sum_row(const float* a, int n) {
    int i = 0;
    float s;
#if defined(__AVX2__)
    __m256 acc = _mm256_setzero_ps();
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(a + i));
    float lanes[8];
    _mm256_storeu_ps(lanes, acc);
    s = 0.0f;
    for (int l = 0; l < 8; ++l) s += lanes[l];
#else
    float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i];
        s1 += a[i + 1];
        s2 += a[i + 2];
        s3 += a[i + 3];
    }
    s = (s0 + s1) + (s2 + s3);
#endif
    for (; i < n; ++i) s += a[i];
    return s;
}

void check_active(const ConvLayer& l, int in_active, int out_active) {
    if (in_active < 1 || in_active > l.in_max) {
        throw DataError("conv2d_slim: in_active " + std::to_string(in_active) + " out of range [1," +
                        std::to_string(l.in_max) + "]");
    }
    if (out_active < 1 || out_active > l.out_max) {
        throw DataError("conv2d_slim: out_active " + std::to_string(out_active) + " out of range [1," +
                        std::to_string(l.out_max) + "]");
    }
}

// Copies the first `channels` channels of one batch item into a zero-padded
// (channels, h+2p, w+2p) buffer so the conv kernels run without edge branches.
void pad_item(const Tensor& x, int item, int channels, int pad, std::vector<float>& out) {
    const int ph = x.h + 2 * pad;
    const int pw = x.w + 2 * pad;
    out.assign(static_cast<std::size_t>(channels) * ph * pw, 0.0f);
    for (int ch = 0; ch < channels; ++ch) {
        const float* src = x.chan(item, ch);
        float* dst = out.data() + static_cast<std::size_t>(ch) * ph * pw;
        for (int y = 0; y < x.h; ++y) {
            std::memcpy(dst + static_cast<std::size_t>(y + pad) * pw + pad,
                        src + static_cast<std::size_t>(y) * x.w, sizeof(float) * x.w);
        }
    }
}

}  // namespace

ConvLayer ConvLayer::make(int out_max, int in_max, int ksize, int stride, int padding) {
    ConvLayer l;
    l.out_max = out_max;
    l.in_max = in_max;
    l.ksize = ksize;
    l.stride = stride;
    l.padding = padding < 0 ? ksize / 2 : padding;
    l.weight = Tensor(out_max, in_max, ksize, ksize);
    l.bias.assign(out_max, 0.0f);
    return l;
}

ConvGrad ConvGrad::like(const ConvLayer& l) {
    ConvGrad g;
    g.weight = Tensor(l.out_max, l.in_max, l.ksize, l.ksize);
    g.bias.assign(l.out_max, 0.0f);
    return g;
}

void ConvGrad::zero() {
    weight.fill(0.0f);
    std::fill(bias.begin(), bias.end(), 0.0f);
}

void ConvGrad::add(const ConvGrad& o) {
    for (std::size_t i = 0; i < weight.data.size(); ++i) weight.data[i] += o.weight.data[i];
    for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += o.bias[i];
}

int conv_out_extent(int in, int ksize, int stride, int padding) {
    return (in + 2 * padding - ksize) / stride + 1;
}

Tensor conv2d_slim_forward(const Tensor& input, const ConvLayer& layer, int in_active, int out_active) {
    check_active(layer, in_active, out_active);
    if (input.c < in_active) {
        throw DataError("conv2d_slim_forward: input has " + std::to_string(input.c) +
                        " channels, needs at least " + std::to_string(in_active));
    }
    const int k = layer.ksize;
    const int oh = conv_out_extent(input.h, k, layer.stride, layer.padding);
    const int ow = conv_out_extent(input.w, k, layer.stride, layer.padding);
    if (oh <= 0 || ow <= 0) {
        throw DataError("conv2d_slim_forward: output extent is empty for input " + input.shape_str());
    }

    Tensor out(input.n, out_active, oh, ow);
    const int pw = input.w + 2 * layer.padding;
    std::vector<float> padded;

    for (int b = 0; b < input.n; ++b) {
        pad_item(input, b, in_active, layer.padding, padded);
        for (int oc = 0; oc < out_active; ++oc) {
            float* orow0 = out.chan(b, oc);
            std::fill(orow0, orow0 + out.plane(), layer.bias[oc]);
            for (int ic = 0; ic < in_active; ++ic) {
                const float* wbase = layer.weight.chan(oc, ic);
                const float* ibase = padded.data() + static_cast<std::size_t>(ic) * (input.h + 2 * layer.padding) * pw;
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const float wv = wbase[ky * k + kx];
                        if (layer.stride == 1) {
                            for (int y = 0; y < oh; ++y) {
                                const float* irow = ibase + static_cast<std::size_t>(y + ky) * pw + kx;
                                float* orow = orow0 + static_cast<std::size_t>(y) * ow;
                                for (int x = 0; x < ow; ++x) orow[x] += wv * irow[x];
                            }
                        } else {
                            for (int y = 0; y < oh; ++y) {
                                const float* irow = ibase + static_cast<std::size_t>(y * layer.stride + ky) * pw + kx;
                                float* orow = orow0 + static_cast<std::size_t>(y) * ow;
                                for (int x = 0; x < ow; ++x) orow[x] += wv * irow[x * layer.stride];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv2d_slim_backward(const Tensor& grad_out, const Tensor& saved_input, const ConvLayer& layer,
                            int in_active, int out_active, ConvGrad& grad) {
    check_active(layer, in_active, out_active);
    const int k = layer.ksize;
    const int oh = conv_out_extent(saved_input.h, k, layer.stride, layer.padding);
    const int ow = conv_out_extent(saved_input.w, k, layer.stride, layer.padding);
    if (grad_out.n != saved_input.n || grad_out.c != out_active || grad_out.h != oh || grad_out.w != ow) {
        throw DataError("conv2d_slim_backward: grad_out shape " + grad_out.shape_str() +
                        " does not match forward output");
    }
    if (saved_input.c < in_active) {
        throw DataError("conv2d_slim_backward: saved input is narrower than in_active");
    }

    const int pad = layer.padding;
    const int ph = saved_input.h + 2 * pad;
    const int pw = saved_input.w + 2 * pad;
    Tensor grad_in(saved_input.n, in_active, saved_input.h, saved_input.w);
    std::vector<float> padded;
    std::vector<float> gpad(static_cast<std::size_t>(ph) * pw);

    for (int b = 0; b < saved_input.n; ++b) {
        pad_item(saved_input, b, in_active, pad, padded);
        for (int oc = 0; oc < out_active; ++oc) {
            grad.bias[oc] += sum_row(grad_out.chan(b, oc), static_cast<int>(grad_out.plane()));
        }
        for (int ic = 0; ic < in_active; ++ic) {
            const float* ibase = padded.data() + static_cast<std::size_t>(ic) * ph * pw;
            std::fill(gpad.begin(), gpad.end(), 0.0f);
            for (int oc = 0; oc < out_active; ++oc) {
                const float* gout = grad_out.chan(b, oc);
                float* wg = grad.weight.chan(oc, ic);
                const float* wv = layer.weight.chan(oc, ic);
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        // dW[oc][ic][ky][kx] = sum_y,x gout[y][x] * in_pad[y*s+ky][x*s+kx]
                        const float wval = wv[ky * k + kx];
                        float acc = 0.0f;
                        for (int y = 0; y < oh; ++y) {
                            const float* irow = ibase + static_cast<std::size_t>(y * layer.stride + ky) * pw + kx;
                            const float* grow = gout + static_cast<std::size_t>(y) * ow;
                            float* gprow = gpad.data() + static_cast<std::size_t>(y * layer.stride + ky) * pw + kx;
                            if (layer.stride == 1) {
                                acc += dot_row(grow, irow, ow);
                                for (int x = 0; x < ow; ++x) gprow[x] += wval * grow[x];
                            } else {
                                for (int x = 0; x < ow; ++x) {
                                    acc += grow[x] * irow[x * layer.stride];
                                    gprow[x * layer.stride] += wval * grow[x];
                                }
                            }
                        }
                        wg[ky * k + kx] += acc;
                    }
                }
            }
            // fold the padded input-gradient plane back into the true extent
            float* gi = grad_in.chan(b, ic);
            for (int y = 0; y < saved_input.h; ++y) {
                const float* src = gpad.data() + static_cast<std::size_t>(y + pad) * pw + pad;
                float* dst = gi + static_cast<std::size_t>(y) * saved_input.w;
                for (int x = 0; x < saved_input.w; ++x) dst[x] += src[x];
            }
        }
    }
    return grad_in;
}

Tensor relu_forward(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data) v = v > 0.0f ? v : 0.0f;
    return out;
}

void relu_inplace(Tensor& x) {
    for (auto& v : x.data) v = v > 0.0f ? v : 0.0f;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& saved_input) {
    check_same_shape(grad_out, saved_input, "relu_backward");
    Tensor out = grad_out;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        if (saved_input.data[i] <= 0.0f) out.data[i] = 0.0f;
    }
    return out;
}

Tensor tanh_forward(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data) v = std::tanh(v);
    return out;
}

Tensor tanh_backward(const Tensor& grad_out, const Tensor& saved_output) {
    check_same_shape(grad_out, saved_output, "tanh_backward");
    Tensor out = grad_out;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const float y = saved_output.data[i];
        out.data[i] *= 1.0f - y * y;
    }
    return out;
}

Tensor global_avg_pool_forward(const Tensor& x) {
    if (x.h < 1 || x.w < 1) throw DataError("global_avg_pool: empty spatial extent");
    Tensor out(x.n, x.c, 1, 1);
    const double inv = 1.0 / static_cast<double>(x.plane());
    for (int b = 0; b < x.n; ++b) {
        for (int ch = 0; ch < x.c; ++ch) {
            const float* p = x.chan(b, ch);
            double s = 0.0;
            for (std::size_t i = 0; i < x.plane(); ++i) s += p[i];
            out.at(b, ch, 0, 0) = static_cast<float>(s * inv);
        }
    }
    return out;
}

Tensor global_avg_pool_backward(const Tensor& grad_out, int h, int w) {
    Tensor out(grad_out.n, grad_out.c, h, w);
    const float inv = 1.0f / static_cast<float>(static_cast<std::size_t>(h) * w);
    for (int b = 0; b < grad_out.n; ++b) {
        for (int ch = 0; ch < grad_out.c; ++ch) {
            const float g = grad_out.at(b, ch, 0, 0) * inv;
            float* p = out.chan(b, ch);
            std::fill(p, p + out.plane(), g);
        }
    }
    return out;
}

Tensor softmax_forward(const Tensor& logits) {
    Tensor out = logits;
    for (int b = 0; b < logits.n; ++b) {
        float mx = logits.at(b, 0, 0, 0);
        for (int ch = 1; ch < logits.c; ++ch) mx = std::max(mx, logits.at(b, ch, 0, 0));
        double sum = 0.0;
        for (int ch = 0; ch < logits.c; ++ch) {
            const double e = std::exp(static_cast<double>(logits.at(b, ch, 0, 0)) - mx);
            out.at(b, ch, 0, 0) = static_cast<float>(e);
            sum += e;
        }
        const float inv = static_cast<float>(1.0 / sum);
        for (int ch = 0; ch < logits.c; ++ch) out.at(b, ch, 0, 0) *= inv;
    }
    return out;
}

Tensor softmax_backward(const Tensor& grad_out, const Tensor& saved_output) {
    check_same_shape(grad_out, saved_output, "softmax_backward");
    Tensor out = grad_out;
    for (int b = 0; b < grad_out.n; ++b) {
        double dot = 0.0;
        for (int ch = 0; ch < grad_out.c; ++ch) {
            dot += static_cast<double>(grad_out.at(b, ch, 0, 0)) * saved_output.at(b, ch, 0, 0);
        }
        for (int ch = 0; ch < grad_out.c; ++ch) {
            out.at(b, ch, 0, 0) =
                saved_output.at(b, ch, 0, 0) * (grad_out.at(b, ch, 0, 0) - static_cast<float>(dot));
        }
    }
    return out;
}

Linear Linear::make(int out_dim, int in_dim) {
    Linear l;
    l.out_dim = out_dim;
    l.in_dim = in_dim;
    l.weight.assign(static_cast<std::size_t>(out_dim) * in_dim, 0.0f);
    return l;
}

Tensor linear_forward(const Tensor& x, const Linear& l) {
    if (x.c != l.in_dim || x.h != 1 || x.w != 1) {
        throw DataError("linear_forward: input " + x.shape_str() + " does not match in_dim " +
                        std::to_string(l.in_dim));
    }
    Tensor out(x.n, l.out_dim, 1, 1);
    for (int b = 0; b < x.n; ++b) {
        const float* xi = x.chan(b, 0);
        for (int o = 0; o < l.out_dim; ++o) {
            const float* wr = l.weight.data() + static_cast<std::size_t>(o) * l.in_dim;
            float s = 0.0f;
            for (int i = 0; i < l.in_dim; ++i) s += wr[i] * xi[i];
            out.at(b, o, 0, 0) = s;
        }
    }
    return out;
}

Tensor linear_backward(const Tensor& grad_out, const Tensor& saved_input, const Linear& l,
                       std::vector<float>& weight_grad) {
    if (grad_out.c != l.out_dim || saved_input.c != l.in_dim || grad_out.n != saved_input.n) {
        throw DataError("linear_backward: shape mismatch");
    }
    if (weight_grad.size() != l.weight.size()) {
        throw DataError("linear_backward: weight_grad size mismatch");
    }
    Tensor grad_in(saved_input.n, l.in_dim, 1, 1);
    for (int b = 0; b < grad_out.n; ++b) {
        const float* xi = saved_input.chan(b, 0);
        float* gi = grad_in.chan(b, 0);
        for (int o = 0; o < l.out_dim; ++o) {
            const float g = grad_out.at(b, o, 0, 0);
            const float* wr = l.weight.data() + static_cast<std::size_t>(o) * l.in_dim;
            float* wg = weight_grad.data() + static_cast<std::size_t>(o) * l.in_dim;
            for (int i = 0; i < l.in_dim; ++i) {
                wg[i] += g * xi[i];
                gi[i] += g * wr[i];
            }
        }
    }
    return grad_in;
}

BatchNorm1d BatchNorm1d::make(int dim) {
    BatchNorm1d bn;
    bn.dim = dim;
    bn.gamma.assign(dim, 1.0f);
    bn.beta.assign(dim, 0.0f);
    bn.running_mean.assign(dim, 0.0f);
    bn.running_var.assign(dim, 1.0f);
    return bn;
}

BatchNorm1dGrad BatchNorm1dGrad::like(const BatchNorm1d& bn) {
    BatchNorm1dGrad g;
    g.gamma.assign(bn.dim, 0.0f);
    g.beta.assign(bn.dim, 0.0f);
    return g;
}

void BatchNorm1dGrad::zero() {
    std::fill(gamma.begin(), gamma.end(), 0.0f);
    std::fill(beta.begin(), beta.end(), 0.0f);
}

Tensor batchnorm1d_forward(const Tensor& x, BatchNorm1d& bn, bool training, BatchNorm1dCache* cache) {
    if (x.c != bn.dim || x.h != 1 || x.w != 1) {
        throw DataError("batchnorm1d_forward: input " + x.shape_str() + " does not match dim " +
                        std::to_string(bn.dim));
    }
    Tensor out(x.n, x.c, 1, 1);
    if (cache) {
        cache->xhat = Tensor(x.n, x.c, 1, 1);
        cache->inv_std.assign(bn.dim, 0.0f);
    }
    for (int f = 0; f < bn.dim; ++f) {
        float mean, var;
        if (training) {
            double m = 0.0;
            for (int b = 0; b < x.n; ++b) m += x.at(b, f, 0, 0);
            m /= x.n;
            double v = 0.0;
            for (int b = 0; b < x.n; ++b) {
                const double d = x.at(b, f, 0, 0) - m;
                v += d * d;
            }
            v /= x.n;  // biased, as normalized
            mean = static_cast<float>(m);
            var = static_cast<float>(v);
            bn.running_mean[f] = (1.0f - bn.momentum) * bn.running_mean[f] + bn.momentum * mean;
            bn.running_var[f] = (1.0f - bn.momentum) * bn.running_var[f] + bn.momentum * var;
        } else {
            mean = bn.running_mean[f];
            var = bn.running_var[f];
        }
        const float inv_std = 1.0f / std::sqrt(var + bn.eps);
        if (cache) cache->inv_std[f] = inv_std;
        for (int b = 0; b < x.n; ++b) {
            const float xh = (x.at(b, f, 0, 0) - mean) * inv_std;
            if (cache) cache->xhat.at(b, f, 0, 0) = xh;
            out.at(b, f, 0, 0) = bn.gamma[f] * xh + bn.beta[f];
        }
    }
    return out;
}

Tensor batchnorm1d_infer(const Tensor& x, const BatchNorm1d& bn) {
    if (x.c != bn.dim || x.h != 1 || x.w != 1) {
        throw DataError("batchnorm1d_infer: input " + x.shape_str() + " does not match dim " +
                        std::to_string(bn.dim));
    }
    Tensor out(x.n, x.c, 1, 1);
    for (int f = 0; f < bn.dim; ++f) {
        const float inv_std = 1.0f / std::sqrt(bn.running_var[f] + bn.eps);
        for (int b = 0; b < x.n; ++b) {
            out.at(b, f, 0, 0) = bn.gamma[f] * (x.at(b, f, 0, 0) - bn.running_mean[f]) * inv_std + bn.beta[f];
        }
    }
    return out;
}

Tensor batchnorm1d_backward(const Tensor& grad_out, const BatchNorm1d& bn, const BatchNorm1dCache& cache,
                            BatchNorm1dGrad& grad) {
    check_same_shape(grad_out, cache.xhat, "batchnorm1d_backward");
    const int n = grad_out.n;
    Tensor grad_in(n, bn.dim, 1, 1);
    for (int f = 0; f < bn.dim; ++f) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int b = 0; b < n; ++b) {
            const double dy = grad_out.at(b, f, 0, 0);
            sum_dy += dy;
            sum_dy_xhat += dy * cache.xhat.at(b, f, 0, 0);
        }
        grad.beta[f] += static_cast<float>(sum_dy);
        grad.gamma[f] += static_cast<float>(sum_dy_xhat);
        const float scale = bn.gamma[f] * cache.inv_std[f];
        const float mean_dy = static_cast<float>(sum_dy / n);
        const float mean_dy_xhat = static_cast<float>(sum_dy_xhat / n);
        for (int b = 0; b < n; ++b) {
            const float dy = grad_out.at(b, f, 0, 0);
            const float xh = cache.xhat.at(b, f, 0, 0);
            grad_in.at(b, f, 0, 0) = scale * (dy - mean_dy - xh * mean_dy_xhat);
        }
    }
    return grad_in;
}

double divergence_loss(const Tensor& pred, const Tensor& target) {
    check_same_shape(pred, target, "divergence_loss");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - target.data[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.data.size());
}

Tensor divergence_loss_backward(const Tensor& pred, const Tensor& target) {
    check_same_shape(pred, target, "divergence_loss_backward");
    Tensor out = pred;
    const float scale = 2.0f / static_cast<float>(pred.data.size());
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = scale * (pred.data[i] - target.data[i]);
    }
    return out;
}

}  // namespace slimden
