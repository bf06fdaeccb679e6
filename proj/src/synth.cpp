#include "cce/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace cce {

namespace {

constexpr int kSupersample = 4;

double shape_coverage(const SynthShape& s, double px, double py) {
    int inside = 0;
    for (int sy = 0; sy < kSupersample; ++sy) {
        for (int sx = 0; sx < kSupersample; ++sx) {
            const double x = px + (sx + 0.5) / kSupersample;
            const double y = py + (sy + 0.5) / kSupersample;
            const double dx = (x - s.cx) / s.rx;
            const double dy = (y - s.cy) / s.ry;
            const bool hit = s.ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
            inside += hit ? 1 : 0;
        }
    }
    return static_cast<double>(inside) / (kSupersample * kSupersample);
}

}  // namespace

SynthSample synth_sample(std::size_t size, std::uint64_t seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const auto n = static_cast<double>(size);
    SynthSample sample;
    sample.image = Image(Shape{3, size, size});

    std::array<double, 3> c0{}, c1{};
    for (auto& v : c0) v = uniform(-0.7, 0.7);
    for (auto& v : c1) v = uniform(-0.7, 0.7);
    const double angle = uniform(0.0, 2.0 * std::numbers::pi);
    const double ux = std::cos(angle), uy = std::sin(angle);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double proj = ((static_cast<double>(x) + 0.5 - n / 2) * ux + (static_cast<double>(y) + 0.5 - n / 2) * uy) / n;
            const double t = std::clamp(proj + 0.5, 0.0, 1.0);
            for (std::size_t c = 0; c < 3; ++c) sample.image.at(c, y, x) = c0[c] + (c1[c] - c0[c]) * t;
        }
    }

    const int shapes = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int k = 0; k < shapes; ++k) {
        SynthShape s;
        s.ellipse = unit(rng) < 0.5;
        if (k == 0) {
            // Centred in the central quarter and wide enough to cross its
            // border, so the hidden part continues something visible.
            s.cx = uniform(3 * n / 8, 5 * n / 8);
            s.cy = uniform(3 * n / 8, 5 * n / 8);
            s.rx = uniform(0.3 * n, 0.45 * n);
            s.ry = uniform(0.3 * n, 0.45 * n);
        } else {
            s.cx = uniform(0.0, n);
            s.cy = uniform(0.0, n);
            s.rx = uniform(n / 8, n / 3);
            s.ry = uniform(n / 8, n / 3);
        }
        for (auto& v : s.color) v = uniform(-1.0, 1.0);
        sample.shapes.push_back(s);
    }

    for (const auto& s : sample.shapes) {
        const auto y0 = static_cast<std::size_t>(std::clamp(std::floor(s.y0()), 0.0, n));
        const auto y1 = static_cast<std::size_t>(std::clamp(std::ceil(s.y1()), 0.0, n));
        const auto x0 = static_cast<std::size_t>(std::clamp(std::floor(s.x0()), 0.0, n));
        const auto x1 = static_cast<std::size_t>(std::clamp(std::ceil(s.x1()), 0.0, n));
        for (std::size_t y = y0; y < y1; ++y) {
            for (std::size_t x = x0; x < x1; ++x) {
                const double a = shape_coverage(s, static_cast<double>(x), static_cast<double>(y));
                if (a == 0.0) continue;
                for (std::size_t c = 0; c < 3; ++c) {
                    double& px = sample.image.at(c, y, x);
                    px += a * (s.color[c] - px);
                }
            }
        }
    }
    return sample;
}

}  // namespace cce
