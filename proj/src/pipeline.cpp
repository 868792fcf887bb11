// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "slimden/imageio.hpp"
#include "slimden/quality.hpp"
#include "slimden/threadpool.hpp"

namespace slimden {

namespace {

std::string format_si(double flops) {
    std::ostringstream os;
    os << std::setprecision(3);
    if (flops >= 1e6) {
        os << flops / 1e6 << "M";
    } else if (flops >= 1e3) {
        os << flops / 1e3 << "K";
    } else {
        os << flops;
    }
    return os.str();
}

Checkpoint load_stage_checkpoint(const RunConfig& cfg, const char* needed_by) {
    if (!std::filesystem::exists(cfg.checkpoint_path)) {
        throw DataError(std::string("missing supernet checkpoint: '") + cfg.checkpoint_path +
                        "' (required by " + needed_by + ")");
    }
    Checkpoint ckpt = load_checkpoint(cfg.checkpoint_path);
    if (spec_digest(ckpt.net.spec) != spec_digest(cfg.backbone())) {
        throw DataError("checkpoint backbone does not match the configured backbone (digest mismatch)");
    }
    return ckpt;
}

double norm_flops(const BackboneSpec& spec, int patch) {
    return count_flops(spec, largest_config(spec), patch, patch).flops_per_pixel;
}

double resolve_budget(const RunConfig& cfg, const BackboneSpec& spec) {
    if (cfg.budget_flops > 0.0) return cfg.budget_flops;
    return cfg.budget_frac * norm_flops(spec, cfg.patch);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + (stream + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

DatasetParams RunConfig::train_params() const {
    return {derive_seed(seed, 1), train_count, patch, sigma_min, sigma_max};
}

DatasetParams RunConfig::val_params() const {
    return {derive_seed(seed, 2), val_count, patch, sigma_min, sigma_max};
}

DatasetParams RunConfig::test_params() const {
    return {derive_seed(seed, 3), test_count, patch, sigma_min, sigma_max};
}

BackboneSpec RunConfig::backbone() const {
    return BackboneSpec::make(layers, base_width, kernel, rho_min, rho_max, quantum);
}

SupernetTrainLog cmd_train_supernet(const RunConfig& cfg, std::ostream& out) {
    ThreadPool pool(cfg.threads);
    const BackboneSpec spec = cfg.backbone();

    out << "stage 1: training super network (" << spec.layers << " boundaries, base width "
        << spec.base_width << ", " << cfg.train_count << " patches)\n";
    const std::vector<PatchPair> train = synth_dataset(cfg.train_params(), &pool);
    const std::vector<PatchPair> val = synth_dataset(cfg.val_params(), &pool);

    Rng rng(derive_seed(cfg.seed, 10));
    SuperNet net = SuperNet::init(spec, rng);
    GateAttention att = GateAttention::init(spec.max_width[0], cfg.gate_reduction, rng);

    SupernetTrainOptions opt;
    opt.epochs = cfg.epochs_supernet;
    opt.batch = cfg.batch;
    opt.n_samples = cfg.n_samples;
    opt.adam.lr = static_cast<float>(cfg.lr);
    opt.lr_decay = static_cast<float>(cfg.lr_decay);
    opt.distill = cfg.distill;
    opt.attention = cfg.attention;
    opt.seed = derive_seed(cfg.seed, 11);

    AdamState adam;
    SupernetTrainLog log = train_supernet(net, cfg.attention ? &att : nullptr, train, val, opt, &adam, &pool);
    for (const auto& e : log.epochs) {
        out << "  epoch " << e.epoch << ": loss " << std::fixed << std::setprecision(6) << e.loss
            << " (L " << e.loss_largest << " / R " << e.loss_random << " / S " << e.loss_smallest
            << ")  val PSNR largest " << std::setprecision(2) << e.val_psnr_largest << " dB, smallest "
            << e.val_psnr_smallest << " dB\n"
            << std::defaultfloat;
    }

    Checkpoint ckpt;
    ckpt.net = std::move(net);
    ckpt.adam = std::move(adam);
    save_checkpoint(cfg.checkpoint_path, ckpt);
    out << "  wrote " << cfg.checkpoint_path << "\n";
    return log;
}

RoutingSpace cmd_slim(const RunConfig& cfg, std::ostream& out) {
    ThreadPool pool(cfg.threads);
    Checkpoint ckpt = load_stage_checkpoint(cfg, "slim");

    const DatasetParams val_params = cfg.val_params();
    const std::vector<PatchPair> val = synth_dataset(val_params, &pool);

    out << "stage 2: progressive slimming (group " << cfg.group << ", " << val.size()
        << " validation patches)\n";
    RoutingSpace space = progressive_slim(ckpt.net, val, val_params, cfg.group, &pool);
    out << "  routing space: " << space.entries.size() << " entries, FLOPs/pixel "
        << format_si(space.entries.front().flops_per_pixel) << " down to "
        << format_si(space.entries.back().flops_per_pixel) << "\n";

    ckpt.space = space;
    save_checkpoint(cfg.checkpoint_path, ckpt);
    export_routing_space_text(cfg.checkpoint_path + ".routing.txt", space);
    out << "  wrote " << cfg.checkpoint_path << " and " << cfg.checkpoint_path << ".routing.txt\n";
    return space;
}

GateTrainLog cmd_train_gate(const RunConfig& cfg, std::ostream& out) {
    ThreadPool pool(cfg.threads);
    Checkpoint ckpt = load_stage_checkpoint(cfg, "train-gate");
    if (!ckpt.space) {
        throw DataError("checkpoint has no routing space; run the slim stage first");
    }

    const std::vector<PatchPair> train = synth_dataset(cfg.train_params(), &pool);

    Rng rng(derive_seed(cfg.seed, 20));
    GateNet gate = make_gate(ckpt.net.spec, *ckpt.space, cfg.num_candidates, cfg.gate_reduction,
                             cfg.gate_hidden, cfg.patch, cfg.patch, rng);

    ComplexityBudget budget;
    budget.norm_flops_px = norm_flops(ckpt.net.spec, cfg.patch);
    budget.target_flops_px = resolve_budget(cfg, ckpt.net.spec);

    out << "stage 3: gate training over " << gate.num_candidates() << " candidates, budget "
        << format_si(budget.target_flops_px) << " FLOPs/pixel (T = "
        << format_si(budget.norm_flops_px) << ")\n";

    GateTrainOptions opt;
    opt.epochs = cfg.epochs_gate;
    opt.batch = cfg.batch;
    opt.adam.lr = static_cast<float>(cfg.lr);
    opt.lr_decay = static_cast<float>(cfg.lr_decay);
    opt.beta = cfg.beta;
    opt.comp_weight = cfg.comp_weight;
    opt.seed = derive_seed(cfg.seed, 21);

    GateTrainLog log = train_gate(gate, ckpt.net, train, budget, opt, &pool);
    for (const auto& e : log.epochs) {
        out << "  epoch " << e.epoch << ": loss " << std::fixed << std::setprecision(4) << e.loss
            << " (ce " << e.ce << ", comp " << e.comp << ")  label acc " << std::setprecision(3)
            << e.label_accuracy << "  expected FLOPs/px " << format_si(e.expected_flops_px) << "\n"
            << std::defaultfloat;
    }

    ckpt.gate = std::move(gate);
    save_checkpoint(cfg.checkpoint_path, ckpt);
    out << "  wrote " << cfg.checkpoint_path << "\n";
    return log;
}

DenoiseResult cmd_denoise(const RunConfig& cfg, const std::string& input_path,
                          const std::string& output_path, DenoiseMode mode, int fixed_width,
                          double budget, int force_route, std::ostream& out) {
    Checkpoint ckpt = load_stage_checkpoint(cfg, "denoise");
    const Tensor noisy = load_pgm(input_path);

    DenoiseResult res;
    Tensor denoised;
    switch (mode) {
        case DenoiseMode::kDynamic: {
            if (!ckpt.gate) throw DataError("checkpoint has no gate; run train-gate first");
            DynamicResult d = dynamic_denoise(ckpt.net, *ckpt.gate, noisy, force_route);
            denoised = std::move(d.denoised);
            res.route = std::move(d.route);
            res.flops_per_pixel = d.flops_per_pixel;
            res.candidate_index = d.candidate_index;
            break;
        }
        case DenoiseMode::kFixedWidth: {
            WidthConfig cfg_w;
            const BackboneSpec& spec = ckpt.net.spec;
            for (int i = 0; i < spec.layers; ++i) {
                cfg_w.active.push_back(std::clamp(fixed_width, spec.min_width[i], spec.max_width[i]));
            }
            require_valid(spec, cfg_w, "denoise width");
            denoised = forward(ckpt.net, cfg_w, noisy);
            res.route = std::move(cfg_w);
            res.flops_per_pixel =
                count_flops(spec, res.route, noisy.h, noisy.w).flops_per_pixel;
            break;
        }
        case DenoiseMode::kBudget: {
            if (!ckpt.space) throw DataError("checkpoint has no routing space; run slim first");
            bool warned = false;
            const RoutingEntry& e = select_by_budget(*ckpt.space, budget, &warned);
            if (warned) {
                out << "warning: no routing entry fits budget " << format_si(budget)
                    << " FLOPs/pixel; using the smallest entry\n";
            }
            denoised = forward(ckpt.net, e.config, noisy);
            res.route = e.config;
            res.flops_per_pixel = count_flops(ckpt.net.spec, e.config, noisy.h, noisy.w).flops_per_pixel;
            break;
        }
    }
    for (auto& v : denoised.data) v = std::clamp(v, 0.0f, 1.0f);
    save_pgm(output_path, denoised);
    out << "route " << res.route.str() << "  FLOPs/pixel " << format_si(res.flops_per_pixel) << "\n";
    return res;
}

RunReport cmd_report(const RunConfig& cfg, const std::string& report_path,
                     const std::string& curve_path, std::ostream& out) {
    ThreadPool pool(cfg.threads);
    Checkpoint ckpt = load_stage_checkpoint(cfg, "report");
    if (!ckpt.space) throw DataError("checkpoint has no routing space; run slim first");

    const std::vector<PatchPair> test = synth_dataset(cfg.test_params(), &pool);
    if (test.empty()) throw DataError("report: empty test set");

    RunReport report;
    // one static row per routing entry
    for (std::size_t k = 0; k < ckpt.space->entries.size(); ++k) {
        const RoutingEntry& e = ckpt.space->entries[k];
        std::vector<double> psnrs(test.size()), ssims(test.size());
        pool.parallel_for(test.size(), [&](std::size_t i) {
            const Tensor pred = forward(ckpt.net, e.config, test[i].noisy);
            psnrs[i] = psnr(pred, test[i].clean);
            ssims[i] = ssim(pred, test[i].clean);
        });
        ReportRow row;
        row.group = format_si(e.flops_per_pixel);
        std::ostringstream model;
        model << "entry-" << std::setfill('0') << std::setw(2) << k;
        row.model = model.str();
        row.type = "static";
        row.flops_per_pixel = e.flops_per_pixel;
        for (std::size_t i = 0; i < test.size(); ++i) {
            row.psnr += psnrs[i];
            row.ssim += ssims[i];
        }
        row.psnr /= static_cast<double>(test.size());
        row.ssim /= static_cast<double>(test.size());
        report.rows.push_back(std::move(row));
    }

    // one dynamic row when a gate is present
    if (ckpt.gate) {
        std::vector<double> psnrs(test.size()), ssims(test.size()), flops(test.size());
        pool.parallel_for(test.size(), [&](std::size_t i) {
            DynamicResult d = dynamic_denoise(ckpt.net, *ckpt.gate, test[i].noisy);
            psnrs[i] = psnr(d.denoised, test[i].clean);
            ssims[i] = ssim(d.denoised, test[i].clean);
            flops[i] = d.flops_per_pixel;
        });
        ReportRow row;
        row.group = format_si(resolve_budget(cfg, ckpt.net.spec));
        row.model = "gated";
        row.type = "dynamic";
        for (std::size_t i = 0; i < test.size(); ++i) {
            row.psnr += psnrs[i];
            row.ssim += ssims[i];
            row.flops_per_pixel += flops[i];
        }
        row.psnr /= static_cast<double>(test.size());
        row.ssim /= static_cast<double>(test.size());
        row.flops_per_pixel /= static_cast<double>(test.size());
        report.rows.push_back(std::move(row));
    }

    write_report_text(report_path, report);
    write_curve_file(curve_path, report);
    out << "wrote " << report_path << " (" << report.rows.size() << " rows) and " << curve_path << "\n";
    return report;
}

BenchReport cmd_bench(const RunConfig& cfg, const std::vector<int>& widths, int repeats,
                      std::ostream& out) {
    if (repeats < 5) throw DataError("bench: need at least 5 repeats");
    if (widths.empty()) throw DataError("bench: empty width list");
    Checkpoint ckpt = load_stage_checkpoint(cfg, "bench");
    const BackboneSpec& spec = ckpt.net.spec;

    // fixed deterministic image, larger than a training patch so per-run
    // times are well above timer resolution
    DatasetParams params = cfg.test_params();
    params.count = 1;
    params.patch = 192;
    const Tensor image = synth_dataset(params).front().noisy;

    BenchReport report;
    report.image_h = image.h;
    report.image_w = image.w;

    auto config_for = [&](int width) {
        WidthConfig c;
        for (int i = 0; i < spec.layers; ++i) {
            c.active.push_back(std::clamp(width, spec.min_width[i], spec.max_width[i]));
        }
        return c;
    };

    // single-threaded, one warmup run per width, median of `repeats`
    std::vector<double> medians(widths.size());
    std::vector<double> mads(widths.size());
    std::vector<double> flops(widths.size());
    for (std::size_t wi = 0; wi < widths.size(); ++wi) {
        const WidthConfig wcfg = config_for(widths[wi]);
        require_valid(spec, wcfg, "bench width");
        flops[wi] = count_flops(spec, wcfg, image.h, image.w).flops_per_pixel;
        forward(ckpt.net, wcfg, image);  // warmup
        std::vector<double> times(repeats);
        for (int rep = 0; rep < repeats; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            forward(ckpt.net, wcfg, image);
            const auto t1 = std::chrono::steady_clock::now();
            times[rep] = std::chrono::duration<double, std::milli>(t1 - t0).count();
        }
        std::sort(times.begin(), times.end());
        const double median = times[times.size() / 2];
        std::vector<double> dev(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) dev[i] = std::abs(times[i] - median);
        std::sort(dev.begin(), dev.end());
        medians[wi] = median;
        mads[wi] = dev[dev.size() / 2];
    }

    const std::size_t ref =
        static_cast<std::size_t>(std::max_element(flops.begin(), flops.end()) - flops.begin());
    out << "bench on " << image.h << "x" << image.w << " image, " << repeats << " repeats\n";
    out << "width\tmedian_ms\tmad_ms\tspeedup\tflops_ratio\n";
    for (std::size_t wi = 0; wi < widths.size(); ++wi) {
        BenchRow row;
        row.width = widths[wi];
        row.median_ms = medians[wi];
        row.mad_ms = mads[wi];
        row.speedup = medians[ref] / medians[wi];
        row.flops_ratio = flops[wi] / flops[ref];
        out << row.width << "\t" << std::fixed << std::setprecision(3) << row.median_ms << "\t"
            << row.mad_ms << "\t" << std::setprecision(2) << row.speedup << "\t"
            << std::setprecision(4) << row.flops_ratio << "\n"
            << std::defaultfloat;
        report.rows.push_back(row);
    }
    return report;
}

void write_report_text(const std::string& path, const RunReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("report: cannot write '" + path + "'");
    out << "# run report v1\n";
    out << "group\tmodel\ttype\tflops_per_pixel\tpsnr\tssim\n";
    out << std::fixed;
    for (const auto& r : report.rows) {
        out << r.group << "\t" << r.model << "\t" << r.type << "\t" << std::setprecision(1)
            << r.flops_per_pixel << "\t" << std::setprecision(4) << r.psnr << "\t"
            << std::setprecision(5) << r.ssim << "\n";
    }
    if (!out) throw DataError("report: write failed for '" + path + "'");
}

void write_curve_file(const std::string& path, const RunReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("curve: cannot write '" + path + "'");
    out << "# flops_per_pixel\tpsnr\ttype\n";
    out << std::fixed;
    for (const auto& r : report.rows) {
        out << std::setprecision(1) << r.flops_per_pixel << "\t" << std::setprecision(4) << r.psnr
            << "\t" << r.type << "\n";
    }
    if (!out) throw DataError("curve: write failed for '" + path + "'");
}

}  // namespace slimden
