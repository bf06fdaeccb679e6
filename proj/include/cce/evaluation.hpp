#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cce/checkpoint.hpp"
#include "cce/imaging.hpp"
#include "cce/mask.hpp"
#include "cce/metric.hpp"

namespace cce {

// Latent dump ("LTNT"), little-endian: magic, u32 version, u32 D, u32 n,
// u32 id length + UTF-8 id, then n*D f32 row-major (one row per mask).
inline constexpr std::uint32_t kLatentDumpVersion = 1;

std::vector<std::uint8_t> serialize_latents(const LatentSet& set);
LatentSet parse_latents(std::span<const std::uint8_t> bytes);
void write_latent_dump(const LatentSet& set, const std::filesystem::path& path);
LatentSet read_latent_dump(const std::filesystem::path& path);

// One dump path per line, relative to the manifest's directory.
void write_latent_manifest(const std::vector<std::filesystem::path>& dumps, const std::filesystem::path& manifest);
std::vector<LatentSet> read_latent_manifest(const std::filesystem::path& manifest);

struct EvalProtocol {
    std::size_t masks = 100;   // n
    std::size_t images = 250;  // k
    MaskConfig mask_config{MaskKind::random_blocks};
    std::uint64_t seed = 1;
    bool standardize = false;
    unsigned threads = 1;

    void validate() const;
};

// The k images and the n masks shared by every image.
struct EvalSelection {
    std::vector<std::size_t> images;
    std::vector<Mask> masks;
};

// Validation images are used when there are at least k of them, otherwise
// the whole dataset; k is clamped to what is available.
EvalSelection select_protocol(const Dataset& dataset, const EvalProtocol& protocol);

// Encoder under evaluation; indices identify the (image, mask) pair so
// stochastic stubs can seed per call independently of scheduling.
using LatentEncoder =
    std::function<LatentVector(const Image& image, const Mask& mask, std::size_t image_index, std::size_t mask_index)>;

LatentEncoder model_encoder(const LoadedModel& model);

// Latents are rounded to f32, the precision of the dump files, so a report
// recomputed from dumps matches the original exactly.
std::vector<LatentSet> collect_latents(const LatentEncoder& encoder, const Dataset& dataset,
                                       const EvalSelection& selection, unsigned threads);

DistortionReport report_from_latents(std::vector<LatentSet> sets, const EvalProtocol& protocol);

DistortionReport evaluate_nsd(const LatentEncoder& encoder, const Dataset& dataset, const EvalProtocol& protocol);

std::string image_id(const Dataset& dataset, std::size_t index);

// "nsd = m ± s (D=.., n=.., k=.., masks=.., standardized=yes|no)"
std::string format_nsd(const DistortionReport& report);
std::string format_report_text(const std::string& model_name, const DistortionReport& report);
// One JSON object per image: {"image_id", "dist2", "nsd"}.
std::string format_report_records(const DistortionReport& report);
std::string format_comparison(const std::vector<std::string>& names, const std::vector<DistortionReport>& reports);

}  // namespace cce
