// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "slimden/tensor.hpp"

namespace slimden {

// Binary PGM (P5, maxval 255). Pixels map to [0,1] on load; saving rounds
// clamp(v,0,1)*255, so a save/load round trip moves a pixel by at most 1/510.
Tensor load_pgm(const std::string& path);
void save_pgm(const std::string& path, const Tensor& image);

}  // namespace slimden
