// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace slimden {

namespace {

constexpr char kMagic[8] = {'S', 'L', 'I', 'M', 'D', 'E', 'N', 'C'};

enum SectionId : std::uint32_t {
    kSectionSpec = 1,
    kSectionBackbone = 2,
    kSectionAdam = 3,
    kSectionRouting = 4,
    kSectionGreedy = 5,
    kSectionGate = 6,
};

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void f32s(const float* p, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) f32(p[i]);
    }
    const std::vector<std::uint8_t>& bytes() const { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    void f32s(float* p, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) p[i] = f32();
    }
    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }
    std::size_t remaining() const { return size_ - pos_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > size_) {
            throw CheckpointTruncatedError("checkpoint: section data ends early");
        }
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

void write_spec(ByteWriter& w, const BackboneSpec& s) {
    w.i32(s.layers);
    w.i32(s.base_width);
    w.i32(s.kernel);
    w.i32(s.image_channels);
    w.f64(s.rho_min);
    w.f64(s.rho_max);
    w.i32(s.quantum);
    for (int i = 0; i < s.layers; ++i) w.i32(s.min_width[i]);
    for (int i = 0; i < s.layers; ++i) w.i32(s.max_width[i]);
}

BackboneSpec read_spec(ByteReader& r) {
    BackboneSpec s;
    s.layers = r.i32();
    s.base_width = r.i32();
    s.kernel = r.i32();
    s.image_channels = r.i32();
    s.rho_min = r.f64();
    s.rho_max = r.f64();
    s.quantum = r.i32();
    if (s.layers < 1 || s.layers > 4096) throw CheckpointError("checkpoint: implausible layer count");
    s.min_width.resize(s.layers);
    s.max_width.resize(s.layers);
    for (int i = 0; i < s.layers; ++i) s.min_width[i] = r.i32();
    for (int i = 0; i < s.layers; ++i) s.max_width[i] = r.i32();
    return s;
}

void write_tensor(ByteWriter& w, const Tensor& t) {
    w.i32(t.n);
    w.i32(t.c);
    w.i32(t.h);
    w.i32(t.w);
    w.f32s(t.data.data(), t.data.size());
}

Tensor read_tensor(ByteReader& r) {
    const int n = r.i32(), c = r.i32(), h = r.i32(), w = r.i32();
    if (n < 0 || c < 0 || h < 0 || w < 0) throw CheckpointError("checkpoint: negative tensor dim");
    Tensor t(n, c, h, w);
    r.f32s(t.data.data(), t.data.size());
    return t;
}

void write_floats(ByteWriter& w, const std::vector<float>& v) {
    w.u64(v.size());
    w.f32s(v.data(), v.size());
}

std::vector<float> read_floats(ByteReader& r) {
    const std::uint64_t n = r.u64();
    if (n > (1ULL << 32)) throw CheckpointError("checkpoint: implausible float array size");
    std::vector<float> v(n);
    r.f32s(v.data(), v.size());
    return v;
}

void write_config(ByteWriter& w, const WidthConfig& c) {
    w.u32(static_cast<std::uint32_t>(c.active.size()));
    for (int v : c.active) w.i32(v);
}

WidthConfig read_config(ByteReader& r) {
    const std::uint32_t n = r.u32();
    WidthConfig c;
    c.active.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) c.active[i] = r.i32();
    return c;
}

void write_conv(ByteWriter& w, const ConvLayer& l) {
    w.i32(l.out_max);
    w.i32(l.in_max);
    w.i32(l.ksize);
    w.i32(l.stride);
    w.i32(l.padding);
    write_tensor(w, l.weight);
    write_floats(w, l.bias);
}

ConvLayer read_conv(ByteReader& r) {
    ConvLayer l;
    l.out_max = r.i32();
    l.in_max = r.i32();
    l.ksize = r.i32();
    l.stride = r.i32();
    l.padding = r.i32();
    l.weight = read_tensor(r);
    l.bias = read_floats(r);
    return l;
}

void write_linear(ByteWriter& w, const Linear& l) {
    w.i32(l.out_dim);
    w.i32(l.in_dim);
    write_floats(w, l.weight);
}

Linear read_linear(ByteReader& r) {
    Linear l;
    l.out_dim = r.i32();
    l.in_dim = r.i32();
    l.weight = read_floats(r);
    return l;
}

void append_section(ByteWriter& payload, std::uint32_t id, const ByteWriter& body) {
    payload.u32(id);
    payload.u64(body.bytes().size());
    for (std::uint8_t b : body.bytes()) payload.u8(b);
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t spec_digest(const BackboneSpec& spec) {
    ByteWriter w;
    write_spec(w, spec);
    return fnv1a64(w.bytes().data(), w.bytes().size());
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    ByteWriter payload;

    {
        ByteWriter body;
        write_spec(body, ckpt.net.spec);
        append_section(payload, kSectionSpec, body);
    }
    {
        ByteWriter body;
        body.u32(static_cast<std::uint32_t>(ckpt.net.convs.size()));
        for (const auto& c : ckpt.net.convs) write_conv(body, c);
        append_section(payload, kSectionBackbone, body);
    }
    if (ckpt.adam) {
        ByteWriter body;
        body.f32(ckpt.adam->hp.lr);
        body.f32(ckpt.adam->hp.beta1);
        body.f32(ckpt.adam->hp.beta2);
        body.f32(ckpt.adam->hp.eps);
        body.i64(ckpt.adam->step);
        body.u32(static_cast<std::uint32_t>(ckpt.adam->m.size()));
        for (std::size_t i = 0; i < ckpt.adam->m.size(); ++i) {
            write_floats(body, ckpt.adam->m[i]);
            write_floats(body, ckpt.adam->v[i]);
        }
        append_section(payload, kSectionAdam, body);
    }
    if (ckpt.space) {
        ByteWriter body;
        body.u32(static_cast<std::uint32_t>(ckpt.space->entries.size()));
        for (const auto& e : ckpt.space->entries) {
            write_config(body, e.config);
            body.f64(e.flops_per_pixel);
            body.f64(e.psnr_db);
        }
        append_section(payload, kSectionRouting, body);

        ByteWriter greedy;
        greedy.u64(ckpt.space->eval_params.seed);
        greedy.i32(ckpt.space->eval_params.count);
        greedy.i32(ckpt.space->eval_params.patch);
        greedy.f64(ckpt.space->eval_params.sigma_min);
        greedy.f64(ckpt.space->eval_params.sigma_max);
        greedy.u32(static_cast<std::uint32_t>(ckpt.space->log.size()));
        for (const auto& step : ckpt.space->log) {
            greedy.u32(static_cast<std::uint32_t>(step.candidates.size()));
            for (std::size_t i = 0; i < step.candidates.size(); ++i) {
                write_config(greedy, step.candidates[i]);
                greedy.f64(step.scores[i]);
            }
            greedy.i32(step.chosen);
        }
        append_section(payload, kSectionGreedy, greedy);
    }
    if (ckpt.gate) {
        ByteWriter body;
        body.i32(ckpt.gate->attention.channels);
        body.i32(ckpt.gate->attention.reduction);
        write_linear(body, ckpt.gate->attention.w1);
        write_linear(body, ckpt.gate->attention.w2);
        body.i32(ckpt.gate->predictor.hidden_dim);
        body.i32(ckpt.gate->predictor.num_candidates);
        write_linear(body, ckpt.gate->predictor.w3);
        write_linear(body, ckpt.gate->predictor.w4);
        body.f32(ckpt.gate->predictor.bn.eps);
        body.f32(ckpt.gate->predictor.bn.momentum);
        write_floats(body, ckpt.gate->predictor.bn.gamma);
        write_floats(body, ckpt.gate->predictor.bn.beta);
        write_floats(body, ckpt.gate->predictor.bn.running_mean);
        write_floats(body, ckpt.gate->predictor.bn.running_var);
        body.u32(static_cast<std::uint32_t>(ckpt.gate->candidates.size()));
        for (std::size_t i = 0; i < ckpt.gate->candidates.size(); ++i) {
            write_config(body, ckpt.gate->candidates[i]);
            body.f64(ckpt.gate->candidate_flops[i]);
        }
        append_section(payload, kSectionGate, body);
    }

    ByteWriter header;
    for (char c : kMagic) header.u8(static_cast<std::uint8_t>(c));
    header.u32(kCheckpointVersion);
    header.u64(spec_digest(ckpt.net.spec));
    header.u64(payload.bytes().size());
    header.u64(fnv1a64(payload.bytes().data(), payload.bytes().size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(header.bytes().data()),
              static_cast<std::streamsize>(header.bytes().size()));
    out.write(reinterpret_cast<const char*>(payload.bytes().data()),
              static_cast<std::streamsize>(payload.bytes().size()));
    if (!out) throw DataError("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
    std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 8 + 8;
    if (file.size() < kHeaderSize) throw CheckpointTruncatedError("checkpoint: file shorter than header");
    if (std::memcmp(file.data(), kMagic, 8) != 0) {
        throw CheckpointError("checkpoint: bad magic in '" + path + "'");
    }
    ByteReader header(file.data() + 8, kHeaderSize - 8);
    const std::uint32_t version = header.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointVersionError("checkpoint: format version " + std::to_string(version) +
                                     ", expected " + std::to_string(kCheckpointVersion));
    }
    const std::uint64_t header_spec_digest = header.u64();
    const std::uint64_t payload_size = header.u64();
    const std::uint64_t payload_digest = header.u64();
    if (file.size() < kHeaderSize + payload_size) {
        throw CheckpointTruncatedError("checkpoint: payload ends early (" +
                                       std::to_string(file.size() - kHeaderSize) + " of " +
                                       std::to_string(payload_size) + " bytes)");
    }
    const std::uint8_t* payload = file.data() + kHeaderSize;
    if (fnv1a64(payload, payload_size) != payload_digest) {
        throw CheckpointDigestError("checkpoint: payload digest mismatch in '" + path + "'");
    }

    Checkpoint ckpt;
    bool have_spec = false, have_backbone = false, have_routing = false;
    RoutingSpace space;
    ByteReader r(payload, payload_size);
    while (r.remaining() > 0) {
        const std::uint32_t id = r.u32();
        const std::uint64_t size = r.u64();
        if (size > r.remaining()) throw CheckpointTruncatedError("checkpoint: section overruns payload");
        const std::size_t section_end = r.pos() + size;
        switch (id) {
            case kSectionSpec:
                ckpt.net.spec = read_spec(r);
                have_spec = true;
                break;
            case kSectionBackbone: {
                const std::uint32_t count = r.u32();
                ckpt.net.convs.clear();
                for (std::uint32_t i = 0; i < count; ++i) ckpt.net.convs.push_back(read_conv(r));
                have_backbone = true;
                break;
            }
            case kSectionAdam: {
                AdamState st;
                st.hp.lr = r.f32();
                st.hp.beta1 = r.f32();
                st.hp.beta2 = r.f32();
                st.hp.eps = r.f32();
                st.step = r.i64();
                const std::uint32_t blocks = r.u32();
                for (std::uint32_t i = 0; i < blocks; ++i) {
                    st.m.push_back(read_floats(r));
                    st.v.push_back(read_floats(r));
                }
                ckpt.adam = std::move(st);
                break;
            }
            case kSectionRouting: {
                const std::uint32_t count = r.u32();
                for (std::uint32_t i = 0; i < count; ++i) {
                    RoutingEntry e;
                    e.config = read_config(r);
                    e.flops_per_pixel = r.f64();
                    e.psnr_db = r.f64();
                    space.entries.push_back(std::move(e));
                }
                have_routing = true;
                break;
            }
            case kSectionGreedy: {
                space.eval_params.seed = r.u64();
                space.eval_params.count = r.i32();
                space.eval_params.patch = r.i32();
                space.eval_params.sigma_min = r.f64();
                space.eval_params.sigma_max = r.f64();
                const std::uint32_t steps = r.u32();
                for (std::uint32_t s = 0; s < steps; ++s) {
                    GreedyStep step;
                    const std::uint32_t cands = r.u32();
                    for (std::uint32_t i = 0; i < cands; ++i) {
                        step.candidates.push_back(read_config(r));
                        step.scores.push_back(r.f64());
                    }
                    step.chosen = r.i32();
                    space.log.push_back(std::move(step));
                }
                break;
            }
            case kSectionGate: {
                GateNet gate;
                gate.attention.channels = r.i32();
                gate.attention.reduction = r.i32();
                gate.attention.w1 = read_linear(r);
                gate.attention.w2 = read_linear(r);
                gate.predictor.hidden_dim = r.i32();
                gate.predictor.num_candidates = r.i32();
                gate.predictor.w3 = read_linear(r);
                gate.predictor.w4 = read_linear(r);
                gate.predictor.bn.dim = gate.predictor.hidden_dim;
                gate.predictor.bn.eps = r.f32();
                gate.predictor.bn.momentum = r.f32();
                gate.predictor.bn.gamma = read_floats(r);
                gate.predictor.bn.beta = read_floats(r);
                gate.predictor.bn.running_mean = read_floats(r);
                gate.predictor.bn.running_var = read_floats(r);
                const std::uint32_t count = r.u32();
                for (std::uint32_t i = 0; i < count; ++i) {
                    gate.candidates.push_back(read_config(r));
                    gate.candidate_flops.push_back(r.f64());
                }
                ckpt.gate = std::move(gate);
                break;
            }
            default:
                // unknown section: skip (forward compatibility within a version)
                break;
        }
        r.seek(section_end);
    }

    if (!have_spec) throw CheckpointError("checkpoint: missing spec section");
    if (!have_backbone) throw CheckpointError("checkpoint: missing backbone weights section");
    if (have_routing) ckpt.space = std::move(space);
    if (spec_digest(ckpt.net.spec) != header_spec_digest) {
        throw CheckpointDigestError("checkpoint: spec digest mismatch in '" + path + "'");
    }
    return ckpt;
}

void export_routing_space_text(const std::string& path, const RoutingSpace& space) {
    std::ofstream out(path);
    if (!out) throw DataError("routing space export: cannot write '" + path + "'");
    out << "# routing space: widths flops_per_pixel psnr_db\n";
    out << std::setprecision(17);
    for (const auto& e : space.entries) {
        for (std::size_t i = 0; i < e.config.active.size(); ++i) {
            out << (i ? "," : "") << e.config.active[i];
        }
        out << "\t" << e.flops_per_pixel << "\t" << e.psnr_db << "\n";
    }
    if (!out) throw DataError("routing space export: write failed for '" + path + "'");
}

}  // namespace slimden
