#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cce/tensor.hpp"

namespace cce {

struct SynthShape {
    bool ellipse = false;
    double cx = 0.0, cy = 0.0;  // centre, pixel units
    double rx = 0.0, ry = 0.0;  // half extents
    std::array<double, 3> color{};

    // Inclusive-exclusive bounding box [x0, x1) x [y0, y1).
    double x0() const { return cx - rx; }
    double x1() const { return cx + rx; }
    double y0() const { return cy - ry; }
    double y1() const { return cy + ry; }
};

struct SynthSample {
    Image image;
    std::vector<SynthShape> shapes;
};

// Item `index` of the synthetic dataset with the given seed.
SynthSample synth_sample(std::size_t size, std::uint64_t seed, std::size_t index);

}  // namespace cce
