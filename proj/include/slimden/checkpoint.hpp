// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint. Layout:
//
//   magic "SLIMDENC" | version u32 | spec digest u64 |
//   payload size u64 | payload digest u64 | payload
//
// The payload is a sequence of (id u32, size u64, bytes) sections; tensors
// are stored as shape plus little-endian f32 bit patterns, so a round trip
// reproduces every value exactly. The payload digest (64-bit FNV-1a) is
// verified before anything is parsed; version, digest and truncation
// failures are distinct error types.

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "slimden/backbone.hpp"
#include "slimden/gate.hpp"
#include "slimden/slimming.hpp"

namespace slimden {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointError : DataError {
    using DataError::DataError;
};
struct CheckpointVersionError : CheckpointError {
    using CheckpointError::CheckpointError;
};
struct CheckpointDigestError : CheckpointError {
    using CheckpointError::CheckpointError;
};
struct CheckpointTruncatedError : CheckpointError {
    using CheckpointError::CheckpointError;
};

struct Checkpoint {
    SuperNet net;  // spec + shared weights, always present
    std::optional<AdamState> adam;
    std::optional<RoutingSpace> space;
    std::optional<GateNet> gate;
};

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 14695981039346656037ULL);

std::uint64_t spec_digest(const BackboneSpec& spec);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Human-readable routing space listing: one entry per line with widths,
// FLOPs/pixel and validation PSNR.
void export_routing_space_text(const std::string& path, const RoutingSpace& space);

}  // namespace slimden
