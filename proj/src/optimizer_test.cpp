#include "doctest.h"

#include <cmath>
#include <limits>

#include "cce/optimizer.hpp"

using namespace cce;

namespace {

Parameters vector_params(std::vector<double> w) {
    Parameters p;
    p.layers = {LayerParams{std::move(w), {}}};
    return p;
}

}  // namespace

TEST_CASE("zero gradient leaves parameters unchanged") {
    Parameters p = vector_params({1.0, -2.0, 3.5});
    const auto before = p.layers;
    optimizer_step(p, zero_gradients(p), {});
    CHECK(p.layers == before);
    CHECK(p.adam.step == 1);
    CHECK(p.version == 1);
}

TEST_CASE("one-dimensional quadratic descends monotonically") {
    Parameters p = vector_params({1.0});
    double prev = 1.0;
    for (int i = 0; i < 100; ++i) {
        Gradients g{LayerParams{{2.0 * p.layers[0].weight[0]}, {}}};
        optimizer_step(p, g, AdamConfig{0.005});
        const double now = std::abs(p.layers[0].weight[0]);
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("ten-dimensional quadratic converges to its minimum") {
    // f(w) = sum_i a_i (w_i - c_i)^2, minimum at c.
    const std::vector<double> a{0.5, 1, 2, 3, 4, 5, 6, 7, 8, 10};
    const std::vector<double> c{1, -1, 2, -2, 0.5, -0.5, 3, -3, 0.1, 0};
    Parameters p = vector_params(std::vector<double>(10, 0.0));
    int steps = 0;
    double dist = 1.0;
    for (; steps < 2000 && dist > 1e-3; ++steps) {
        Gradients g{LayerParams{std::vector<double>(10), {}}};
        for (std::size_t i = 0; i < 10; ++i) g[0].weight[i] = 2.0 * a[i] * (p.layers[0].weight[i] - c[i]);
        optimizer_step(p, g, AdamConfig{0.05});
        dist = 0.0;
        for (std::size_t i = 0; i < 10; ++i) dist = std::max(dist, std::abs(p.layers[0].weight[i] - c[i]));
    }
    CHECK(dist <= 1e-3);
    CHECK(steps <= 2000);
}

TEST_CASE("first step moves each coordinate by the learning rate") {
    Parameters p = vector_params({0.0, 0.0});
    optimizer_step(p, Gradients{LayerParams{{3.0, -0.01}, {}}}, AdamConfig{0.1});
    CHECK(p.layers[0].weight[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(p.layers[0].weight[1] == doctest::Approx(0.1).epsilon(1e-5));
}

TEST_CASE("non-finite gradients abort before any update") {
    Parameters p;
    p.layers = {LayerParams{{1.0}, {0.0}}, LayerParams{{2.0}, {}}};
    const auto before = p.layers;
    Gradients g{LayerParams{{0.5}, {0.5}}, LayerParams{{std::numeric_limits<double>::quiet_NaN()}, {}}};
    try {
        optimizer_step(p, g, {});
        FAIL("expected NonFiniteGradient");
    } catch (const NonFiniteGradient& e) {
        CHECK(e.layer() == 1);
    }
    CHECK(p.layers == before);
    CHECK(p.adam.step == 0);

    Gradients wrong{LayerParams{{0.5, 0.5}, {0.5}}, LayerParams{{0.0}, {}}};
    CHECK_THROWS_AS(optimizer_step(p, wrong, {}), std::invalid_argument);
}

TEST_CASE("optimizer is deterministic") {
    Parameters a = vector_params({0.3, -0.7}), b = a;
    for (int i = 0; i < 20; ++i) {
        Gradients g{LayerParams{{std::sin(i * 1.0), std::cos(i * 0.5)}, {}}};
        optimizer_step(a, g, {});
        optimizer_step(b, g, {});
    }
    CHECK(a.layers == b.layers);
}
