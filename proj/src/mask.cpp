#include "cce/mask.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cce {

Mask::Mask(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {}

std::size_t Mask::missing_count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Mask central_mask(std::size_t height, std::size_t width, double fraction) {
    if (height < 2 || width < 2) {
        throw std::invalid_argument("central_mask: height and width must be at least 2");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("central_mask: fraction must lie in (0, 1]");
    }
    const auto shorter = static_cast<double>(std::min(height, width));
    const auto side = static_cast<std::size_t>(std::lround(shorter * std::sqrt(fraction)));
    if (side == 0) {
        throw std::invalid_argument("central_mask: fraction " + std::to_string(fraction) +
                                    " gives a zero-sized square (degenerate size)");
    }
    Mask mask(height, width);
    const std::size_t top = (height - side) / 2;
    const std::size_t left = (width - side) / 2;
    for (std::size_t y = top; y < top + side; ++y) {
        for (std::size_t x = left; x < left + side; ++x) mask.set(y, x, true);
    }
    return mask;
}

Mask random_blocks_mask(std::size_t height, std::size_t width, double max_coverage, BlockRange sides,
                        std::mt19937_64& rng) {
    if (!(max_coverage > 0.0 && max_coverage <= 1.0)) {
        throw std::invalid_argument("random_blocks_mask: max_coverage must lie in (0, 1]");
    }
    if (sides.min_side < 1 || sides.min_side > sides.max_side || sides.max_side > std::min(height, width)) {
        throw std::invalid_argument("random_blocks_mask: block side range [" + std::to_string(sides.min_side) + "," +
                                    std::to_string(sides.max_side) + "] does not fit a " + std::to_string(height) +
                                    "x" + std::to_string(width) + " image");
    }
    const std::size_t total = height * width;
    const auto budget = static_cast<std::size_t>(std::floor(max_coverage * static_cast<double>(total) + 1e-9));
    if (budget == 0) {
        throw std::invalid_argument("random_blocks_mask: max_coverage is below one pixel");
    }

    Mask mask(height, width);
    std::size_t covered = 0;
    std::uniform_int_distribution<std::size_t> side_dist(sides.min_side, sides.max_side);

    while (true) {
        std::size_t bh = side_dist(rng);
        std::size_t bw = side_dist(rng);
        if (covered == 0) {
            // First block must fit on its own so the result is never empty.
            const auto cap = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(budget))));
            if (bh * bw > budget) {
                bh = std::min(bh, std::max<std::size_t>(cap, 1));
                bw = std::min(bw, std::max<std::size_t>(budget / bh, 1));
            }
        }
        const std::size_t top = std::uniform_int_distribution<std::size_t>(0, height - bh)(rng);
        const std::size_t left = std::uniform_int_distribution<std::size_t>(0, width - bw)(rng);

        std::size_t added = 0;
        for (std::size_t y = top; y < top + bh; ++y) {
            for (std::size_t x = left; x < left + bw; ++x) added += mask.missing(y, x) ? 0 : 1;
        }
        if (covered + added > budget) break;
        for (std::size_t y = top; y < top + bh; ++y) {
            for (std::size_t x = left; x < left + bw; ++x) mask.set(y, x, true);
        }
        covered += added;
        if (covered == budget) break;
    }
    return mask;
}

Mask complement(const Mask& mask) {
    Mask out(mask.height(), mask.width());
    for (std::size_t y = 0; y < mask.height(); ++y) {
        for (std::size_t x = 0; x < mask.width(); ++x) out.set(y, x, !mask.missing(y, x));
    }
    return out;
}

Image apply_mask(const Image& image, const Mask& mask, std::span<const double> fill) {
    if (image.height() != mask.height() || image.width() != mask.width()) {
        throw std::invalid_argument("apply_mask: mask " + std::to_string(mask.height()) + "x" +
                                    std::to_string(mask.width()) + " does not match image " + to_string(image.shape()));
    }
    if (fill.size() != image.channels()) {
        throw std::invalid_argument("apply_mask: fill has " + std::to_string(fill.size()) + " values for " +
                                    std::to_string(image.channels()) + " channels");
    }
    Image out = image;
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t y = 0; y < image.height(); ++y) {
            for (std::size_t x = 0; x < image.width(); ++x) {
                if (mask.missing(y, x)) out.at(c, y, x) = fill[c];
            }
        }
    }
    return out;
}

double coverage(const Mask& mask) {
    if (mask.size() == 0) return 0.0;
    return static_cast<double>(mask.missing_count()) / static_cast<double>(mask.size());
}

std::string to_string(MaskKind kind) {
    return kind == MaskKind::central ? "central" : "random_blocks";
}

MaskKind parse_mask_kind(const std::string& name) {
    if (name == "central") return MaskKind::central;
    if (name == "random" || name == "random_blocks" || name == "random-blocks") return MaskKind::random_blocks;
    throw std::invalid_argument("unknown mask strategy '" + name + "' (expected central or random_blocks)");
}

Mask make_mask(const MaskConfig& config, std::size_t height, std::size_t width, std::mt19937_64& rng) {
    if (config.kind == MaskKind::central) return central_mask(height, width, config.fraction);
    return random_blocks_mask(height, width, config.max_coverage, config.sides, rng);
}

}  // namespace cce
