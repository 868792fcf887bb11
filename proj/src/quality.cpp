// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/quality.hpp"

#include <cmath>
#include <string>

namespace slimden {

double psnr(const Tensor& pred, const Tensor& ref, double peak) {
    check_same_shape(pred, ref, "psnr");
    double mse = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - ref.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(pred.data.size());
    if (mse <= 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Tensor& pred, const Tensor& ref, int window, double peak) {
    check_same_shape(pred, ref, "ssim");
    if (pred.h < window || pred.w < window) {
        throw DataError("ssim: image " + pred.shape_str() + " smaller than window " +
                        std::to_string(window));
    }
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const double inv_n = 1.0 / (static_cast<double>(window) * window);

    double total = 0.0;
    std::size_t count = 0;
    for (int b = 0; b < pred.n; ++b) {
        for (int ch = 0; ch < pred.c; ++ch) {
            const float* a = pred.chan(b, ch);
            const float* r = ref.chan(b, ch);
            for (int y = 0; y + window <= pred.h; ++y) {
                for (int x = 0; x + window <= pred.w; ++x) {
                    double sa = 0.0, sr = 0.0, saa = 0.0, srr = 0.0, sar = 0.0;
                    for (int wy = 0; wy < window; ++wy) {
                        const float* arow = a + static_cast<std::size_t>(y + wy) * pred.w + x;
                        const float* rrow = r + static_cast<std::size_t>(y + wy) * pred.w + x;
                        for (int wx = 0; wx < window; ++wx) {
                            const double av = arow[wx];
                            const double rv = rrow[wx];
                            sa += av;
                            sr += rv;
                            saa += av * av;
                            srr += rv * rv;
                            sar += av * rv;
                        }
                    }
                    const double mu_a = sa * inv_n;
                    const double mu_r = sr * inv_n;
                    const double var_a = saa * inv_n - mu_a * mu_a;
                    const double var_r = srr * inv_n - mu_r * mu_r;
                    const double cov = sar * inv_n - mu_a * mu_r;
                    const double num = (2.0 * mu_a * mu_r + c1) * (2.0 * cov + c2);
                    const double den = (mu_a * mu_a + mu_r * mu_r + c1) * (var_a + var_r + c2);
                    total += num / den;
                    ++count;
                }
            }
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace slimden
