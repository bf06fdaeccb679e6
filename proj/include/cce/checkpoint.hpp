#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cce/cascade.hpp"

namespace cce {

using Bytes = std::vector<std::uint8_t>;

// Single context encoder checkpoint ("CEPK"), little-endian:
//   magic, u32 version, network spec (f64 slopes), f64[3] fill, u64 seed,
//   u32 length + UTF-8 config text, then per layer u32 count + f32 weights,
//   u32 count + f32 biases.
struct Checkpoint {
    ContextEncoder model;
    std::uint64_t seed = 0;
    std::string config;  // resolved "key = value" lines
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

Bytes serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

// Parameters are stored as f32; rounding them in place makes the in-memory
// model identical to what a reload would produce.
void round_to_float(Parameters& params);

// Cascade container ("CCPK"): magic, u32 version, u32 length + manifest text,
// u64 length + stage-1 CEPK bytes, u64 length + stage-2 CEPK bytes. The
// stage-1 bytes are embedded verbatim.
struct CascadeCheckpoint {
    std::string manifest;
    Bytes stage1;
    Bytes stage2;

    CascadeModel model() const;
};

Bytes serialize_cascade(const CascadeCheckpoint& checkpoint);
CascadeCheckpoint parse_cascade(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

using LoadedModel = std::variant<ContextEncoder, CascadeModel>;

// Dispatches on the file magic.
LoadedModel load_model(const std::filesystem::path& path);

std::size_t latent_dim(const LoadedModel& model);

}  // namespace cce
