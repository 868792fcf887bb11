// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "slimden/tensor.hpp"

namespace slimden {

// PSNR in dB is capped here when the images are identical (MSE == 0), which
// keeps difficulty-gain arithmetic finite.
inline constexpr double kPsnrCapDb = 100.0;

struct QualityScore {
    double psnr_db = 0.0;
    double ssim = 0.0;
};

double psnr(const Tensor& pred, const Tensor& ref, double peak = 1.0);

// Mean local SSIM over sliding unweighted windows.
double ssim(const Tensor& pred, const Tensor& ref, int window = 8, double peak = 1.0);

}  // namespace slimden
