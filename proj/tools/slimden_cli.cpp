// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0
//
// slimden: train a slimmable denoising super network, distill it into a
// routing space, train the dynamic gate, and run/inspect the result.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "slimden/pipeline.hpp"

namespace {

// Shared options live on the root app; subcommands fall through to them, so
// both `slimden --seed 5 train-supernet` and `slimden train-supernet --seed 5`
// parse, and a config file can set them at top level.
void add_common_options(CLI::App& app, slimden::RunConfig& cfg) {
    app.add_option("--checkpoint", cfg.checkpoint_path, "checkpoint file path")
        ->capture_default_str();
    app.add_option("--seed", cfg.seed, "master seed; all datasets and init derive from it")
        ->capture_default_str();
    app.add_option("--threads", cfg.threads, "worker threads (0 = hardware)")->capture_default_str();

    app.add_option("--layers", cfg.layers, "slimmable feature boundaries L")->capture_default_str();
    app.add_option("--base-width", cfg.base_width, "base channel count n per layer")
        ->capture_default_str();
    app.add_option("--kernel", cfg.kernel, "conv kernel size")->capture_default_str();
    app.add_option("--rho-min", cfg.rho_min, "width ratio lower bound (rho)")->capture_default_str();
    app.add_option("--rho-max", cfg.rho_max, "width ratio upper bound (rho)")->capture_default_str();
    app.add_option("--quantum", cfg.quantum, "smallest channel division")->capture_default_str();

    app.add_option("--train-count", cfg.train_count, "training patches")->capture_default_str();
    app.add_option("--val-count", cfg.val_count, "validation patches")->capture_default_str();
    app.add_option("--test-count", cfg.test_count, "test patches")->capture_default_str();
    app.add_option("--patch", cfg.patch, "patch size")->capture_default_str();
    app.add_option("--sigma-min", cfg.sigma_min, "noise sigma lower bound (on [0,1] scale)")
        ->capture_default_str();
    app.add_option("--sigma-max", cfg.sigma_max, "noise sigma upper bound (on [0,1] scale)")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slimden: dynamic slimmable image denoiser"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "read options from a key=value config file");

    slimden::RunConfig cfg;
    add_common_options(app, cfg);

    CLI::App* train = app.add_subcommand("train-supernet", "stage 1: train the slimmable super network");
    train->fallthrough();
    train->add_option("--epochs", cfg.epochs_supernet, "super network training epochs T_s")
        ->capture_default_str();
    train->add_option("--batch", cfg.batch, "batch size")->capture_default_str();
    train->add_option("--n-samples", cfg.n_samples, "sampled channel configurations n per iteration")
        ->capture_default_str();
    train->add_option("--lr", cfg.lr, "Adam initial learning rate")->capture_default_str();
    train->add_option("--lr-decay", cfg.lr_decay, "learning rate decay factor per epoch")
        ->capture_default_str();
    train->add_flag_callback("--no-distill", [&cfg] { cfg.distill = false; },
                             "supervise every branch with the clean image (no knowledge transfer)");
    train->add_flag_callback("--no-attention", [&cfg] { cfg.attention = false; },
                             "train without the attention head");

    CLI::App* slim = app.add_subcommand("slim", "stage 2: greedy progressive slimming");
    slim->fallthrough();
    slim->add_option("--group", cfg.group, "channels removed per slim step")->capture_default_str();

    CLI::App* gate = app.add_subcommand("train-gate", "stage 3: train the dynamic gate");
    gate->fallthrough();
    gate->add_option("--epochs", cfg.epochs_gate, "gate training epochs T_g")->capture_default_str();
    gate->add_option("--batch", cfg.batch, "batch size")->capture_default_str();
    gate->add_option("--lr", cfg.lr, "Adam initial learning rate")->capture_default_str();
    gate->add_option("--lr-decay", cfg.lr_decay, "learning rate decay factor per epoch")
        ->capture_default_str();
    gate->add_option("--beta", cfg.beta, "PSNR-gain threshold beta between easy and hard images")
        ->capture_default_str();
    gate->add_option("--budget-frac", cfg.budget_frac,
                     "computation constraint C as a fraction of the full-width cost T")
        ->capture_default_str();
    gate->add_option("--budget-flops", cfg.budget_flops,
                     "computation constraint C in absolute FLOPs/pixel (overrides --budget-frac)")
        ->capture_default_str();
    gate->add_option("--comp-weight", cfg.comp_weight, "weight on the complexity loss")
        ->capture_default_str();
    gate->add_option("--candidates", cfg.num_candidates,
                     "candidate sub-networks E exposed to the gate (0 = whole routing space)")
        ->capture_default_str();
    gate->add_option("--gate-reduction", cfg.gate_reduction, "attention reduction ratio r")
        ->capture_default_str();
    gate->add_option("--gate-hidden", cfg.gate_hidden, "prediction head hidden dimension D")
        ->capture_default_str();

    CLI::App* denoise = app.add_subcommand("denoise", "denoise one PGM image");
    denoise->fallthrough();
    std::string input_path, output_path, mode = "dynamic";
    int force_route = -1;
    denoise->add_option("--in", input_path, "input PGM (P5)")->required();
    denoise->add_option("--out", output_path, "output PGM")->required();
    denoise->add_option("--mode", mode, "dynamic | width=<k> | budget=<flops/pixel>")
        ->capture_default_str();
    denoise->add_option("--force-route", force_route, "")->group("");  // test hook, hidden

    CLI::App* report = app.add_subcommand("report", "evaluate every route plus the gate on a test set");
    report->fallthrough();
    std::string report_path = "report.txt", curve_path = "curve.tsv";
    report->add_option("--report-file", report_path, "output table")->capture_default_str();
    report->add_option("--curve-file", curve_path, "FLOPs-vs-PSNR curve output")->capture_default_str();
    report->add_option("--budget-frac", cfg.budget_frac, "budget label used for the dynamic row")
        ->capture_default_str();
    report->add_option("--budget-flops", cfg.budget_flops, "absolute budget label")
        ->capture_default_str();

    CLI::App* bench = app.add_subcommand("bench", "single-threaded wall-clock latency per width");
    bench->fallthrough();
    std::vector<int> widths = {48, 40, 32, 24, 16, 8};
    int repeats = 9;
    bench->add_option("--widths", widths, "uniform widths to time")->capture_default_str();
    bench->add_option("--repeats", repeats, "timing repeats per width (>= 5)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // help/version exit clean, anything else is usage
    }

    try {
        if (train->parsed()) {
            slimden::cmd_train_supernet(cfg, std::cout);
        } else if (slim->parsed()) {
            slimden::cmd_slim(cfg, std::cout);
        } else if (gate->parsed()) {
            slimden::cmd_train_gate(cfg, std::cout);
        } else if (denoise->parsed()) {
            slimden::DenoiseMode dm = slimden::DenoiseMode::kDynamic;
            int fixed_width = 0;
            double budget = 0.0;
            if (mode.rfind("width=", 0) == 0) {
                dm = slimden::DenoiseMode::kFixedWidth;
                fixed_width = std::stoi(mode.substr(6));
            } else if (mode.rfind("budget=", 0) == 0) {
                dm = slimden::DenoiseMode::kBudget;
                budget = std::stod(mode.substr(7));
            } else if (mode != "dynamic") {
                std::cerr << "unknown mode '" << mode << "'\n";
                return 1;
            }
            slimden::cmd_denoise(cfg, input_path, output_path, dm, fixed_width, budget, force_route,
                                 std::cout);
        } else if (report->parsed()) {
            slimden::cmd_report(cfg, report_path, curve_path, std::cout);
        } else if (bench->parsed()) {
            slimden::cmd_bench(cfg, widths, repeats, std::cout);
        }
    } catch (const slimden::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const slimden::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
