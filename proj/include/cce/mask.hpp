#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cce/tensor.hpp"

namespace cce {

// Binary region mask; 1 marks a missing pixel, 0 a context pixel.
class Mask {
public:
    Mask() = default;
    Mask(std::size_t height, std::size_t width, std::uint8_t fill = 0);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return bits_.size(); }

    bool missing(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }
    void set(std::size_t y, std::size_t x, bool missing) { bits_[y * width_ + x] = missing ? 1 : 0; }
    std::uint8_t operator[](std::size_t i) const { return bits_[i]; }

    std::size_t missing_count() const;
    std::span<const std::uint8_t> bits() const { return bits_; }

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct BlockRange {
    std::size_t min_side = 4;
    std::size_t max_side = 8;
};

// Centered square of side round(min(height, width) * sqrt(fraction)).
Mask central_mask(std::size_t height, std::size_t width, double fraction);

// Places uniformly positioned rectangles with sides drawn from `sides` until
// the next block would push the union coverage above max_coverage.
Mask random_blocks_mask(std::size_t height, std::size_t width, double max_coverage, BlockRange sides,
                        std::mt19937_64& rng);

Mask complement(const Mask& mask);

// Copies context pixels and writes `fill` (one value per channel) into missing ones.
Image apply_mask(const Image& image, const Mask& mask, std::span<const double> fill);

double coverage(const Mask& mask);

enum class MaskKind { central, random_blocks };

std::string to_string(MaskKind kind);
MaskKind parse_mask_kind(const std::string& name);

struct MaskConfig {
    MaskKind kind = MaskKind::central;
    double fraction = 0.25;
    double max_coverage = 0.25;
    BlockRange sides{4, 12};
};

// Draws one mask per the strategy; central masks ignore the generator.
Mask make_mask(const MaskConfig& config, std::size_t height, std::size_t width, std::mt19937_64& rng);

}  // namespace cce
