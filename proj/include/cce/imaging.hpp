#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cce/mask.hpp"
#include "cce/tensor.hpp"

namespace cce {

// 8-bit values map to [-1, 1] via v / 127.5 - 1.
inline constexpr double kPixelScale = 127.5;
inline constexpr double kPixelOffset = -1.0;

std::uint8_t quantize_pixel(double value);
double dequantize_pixel(std::uint8_t value);

// Reads an 8-bit RGB PNG. Grayscale or alpha images are rejected.
Image load_png(const std::filesystem::path& path);
void save_png(const Image& image, const std::filesystem::path& path);

// Masks round-trip through 1-bit grayscale PNG: black = context, white = missing.
void save_mask_png(const Mask& mask, const std::filesystem::path& path);
Mask load_mask_png(const std::filesystem::path& path);

// Concatenates equally sized images left to right.
Image hconcat(const std::vector<Image>& images);

enum class Split { train, val };

struct Dataset {
    std::vector<Image> items;
    std::vector<Split> split;
    std::vector<std::string> names;
    std::uint64_t seed = 0;

    std::vector<std::size_t> indices(Split which) const;
    std::size_t size() const { return items.size(); }
};

// Smooth two-colour gradients overlaid with 1-4 anti-aliased rectangles and
// ellipses; the first shape always overlaps the central quarter. The last
// val_count items form the validation split.
Dataset synth_dataset(std::size_t count, std::size_t size, std::uint64_t seed, std::size_t val_count = 0);

// Deterministic permutation of the given split for one epoch.
std::vector<std::size_t> epoch_order(const Dataset& dataset, Split which, std::uint64_t seed, std::size_t epoch);

// Per-channel mean over every train pixel.
std::array<double, 3> dataset_mean_color(const Dataset& dataset);

// Writes train/*.png, val/*.png and manifest.json.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace cce
