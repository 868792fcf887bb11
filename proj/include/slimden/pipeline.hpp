// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0
//
// The three-stage pipeline behind the CLI: super-network training,
// progressive slimming, gate training, plus reporting and benchmarking.
// Every stage reads its predecessor's checkpoint and rewrites the file with
// its own section added, so the pipeline is resumable and fully determined
// by (config, seed).

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "slimden/checkpoint.hpp"
#include "slimden/gate.hpp"

namespace slimden {

struct RunConfig {
    // backbone
    int layers = 8;
    int base_width = 32;
    int kernel = 3;
    double rho_min = 0.2;   // width ratio lower bound
    double rho_max = 1.5;   // width ratio upper bound
    int quantum = 8;        // smallest channel division

    // stage 1: super-network training
    int epochs_supernet = 4;  // T_s
    int batch = 64;
    int n_samples = 4;        // n, sampled channel configurations per iteration
    double lr = 5e-5;         // Adam initial learning rate
    double lr_decay = 0.9;    // decay factor per epoch
    bool distill = true;      // knowledge transfer between branches
    bool attention = true;    // attention head active during stage 1

    // stage 2: progressive slimming
    int group = 16;  // channels removed per slim step

    // stage 3: gate training
    int epochs_gate = 10;       // T_g
    double beta = 0.2;          // PSNR-gain threshold between easy and hard
    double budget_frac = 0.7;   // C as a fraction of T (ignored if budget_flops > 0)
    double budget_flops = 0.0;  // C, absolute FLOPs/pixel
    double comp_weight = 50.0;  // weight on the complexity loss
    int num_candidates = 4;     // E; 0 keeps the full routing space
    int gate_reduction = 4;     // r
    int gate_hidden = 16;       // D

    // data
    std::uint64_t seed = 1;
    int train_count = 2048;
    int val_count = 128;
    int test_count = 256;
    int patch = 64;
    double sigma_min = 10.0 / 255.0;
    double sigma_max = 50.0 / 255.0;

    // execution
    int threads = 0;  // 0 = hardware concurrency
    std::string checkpoint_path = "slimden.ckpt";

    DatasetParams train_params() const;
    DatasetParams val_params() const;
    DatasetParams test_params() const;
    BackboneSpec backbone() const;
};

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

SupernetTrainLog cmd_train_supernet(const RunConfig& cfg, std::ostream& out);
RoutingSpace cmd_slim(const RunConfig& cfg, std::ostream& out);
GateTrainLog cmd_train_gate(const RunConfig& cfg, std::ostream& out);

enum class DenoiseMode { kDynamic, kFixedWidth, kBudget };

struct DenoiseResult {
    WidthConfig route;
    double flops_per_pixel = 0.0;
    int candidate_index = -1;
};

DenoiseResult cmd_denoise(const RunConfig& cfg, const std::string& input_path,
                          const std::string& output_path, DenoiseMode mode, int fixed_width,
                          double budget, int force_route, std::ostream& out);

struct ReportRow {
    std::string group, model, type;
    double flops_per_pixel = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct RunReport {
    std::vector<ReportRow> rows;
};

RunReport cmd_report(const RunConfig& cfg, const std::string& report_path,
                     const std::string& curve_path, std::ostream& out);

struct BenchRow {
    int width = 0;
    double median_ms = 0.0;
    double mad_ms = 0.0;
    double speedup = 0.0;      // vs the largest width in the list
    double flops_ratio = 0.0;  // vs the largest width in the list
};

struct BenchReport {
    std::vector<BenchRow> rows;
    int image_h = 0, image_w = 0;
};

BenchReport cmd_bench(const RunConfig& cfg, const std::vector<int>& widths, int repeats,
                      std::ostream& out);

void write_report_text(const std::string& path, const RunReport& report);
void write_curve_file(const std::string& path, const RunReport& report);

}  // namespace slimden
