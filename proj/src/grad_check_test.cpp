#include "doctest.h"

#include <random>
#include <set>

#include "cce/grad_check.hpp"
#include "cce/grad_suite.hpp"
#include "cce/losses.hpp"

using namespace cce;

TEST_CASE("linear layer with squared error is checked to near machine precision") {
    NetworkSpec spec;
    spec.input = {1, 4, 4};
    spec.layers = {LayerSpec::linear(6)};
    auto params = init_parameters(spec, 3);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    Tensor x(spec.input), target(Shape{6, 1, 1});
    for (auto& v : x.values()) v = u(rng);
    for (auto& v : target.values()) v = u(rng);
    const auto r = grad_check(spec, params, x, [&](const Tensor& o) { return mse_loss(target, o); });
    CHECK(r.max_relative_error < 1e-8);
    REQUIRE(r.layers.size() == 1);
    CHECK(r.layers[0].checked == 50);
}

TEST_CASE("full context encoder with masked reconstruction loss") {
    const auto spec = context_encoder_spec(16);
    auto params = init_parameters(spec, 9);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    Tensor p(spec.input);
    for (auto& v : p.values()) v = u(rng);
    const Mask m = central_mask(16, 16, 0.25);
    const std::array<double, 3> fill{0, 0, 0};
    const Tensor in = apply_mask(p, m, fill);
    const auto r = grad_check(spec, params, in, [&](const Tensor& o) { return masked_rec_loss(p, o, m); });
    CHECK(r.max_relative_error < 1e-6);
    std::size_t parameterised = 0;
    for (const auto& l : spec.layers) parameterised += l.has_parameters();
    CHECK(r.layers.size() == parameterised);
    for (const auto& l : r.layers) CHECK(l.checked >= 50);
}

TEST_CASE("sign-flipped backward is caught") {
    NetworkSpec spec;
    spec.input = {2, 5, 5};
    spec.layers = {LayerSpec::conv(3, 3, 1, 1), LayerSpec::activation(LayerKind::tanh)};
    auto params = init_parameters(spec, 5);
    Tensor x(spec.input, 0.3), target(spec.output_shape(), -0.2);
    GradCheckOptions opts;
    opts.flip_sign_layer = 0;
    const auto r = grad_check(spec, params, x, [&](const Tensor& o) { return mse_loss(target, o); }, opts);
    CHECK(r.max_relative_error > 0.1);
}

TEST_CASE("grad suite covers every layer type and loss path") {
    const auto entries = run_grad_suite({});
    std::set<std::string> names;
    for (const auto& e : entries) {
        INFO(e.component);
        CHECK(e.report.max_relative_error < 1e-6);
        names.insert(e.component);
    }
    for (const char* kind : {"conv", "conv_transpose", "channelwise_fc", "linear", "leaky_relu", "relu", "tanh",
                             "sigmoid"}) {
        CHECK(names.count(std::string("layer/") + kind) == 1);
    }
    for (const char* c : {"context_encoder/masked_rec_loss", "discriminator/disc_loss", "joint_loss",
                          "cascade/rec_loss", "cascade/adv_gen_loss", "cascade/adv_disc_loss"}) {
        CHECK(names.count(c) == 1);
    }
}

TEST_CASE("mutated grad suite fails every component") {
    GradSuiteOptions opts;
    opts.mutate = true;
    for (const auto& e : run_grad_suite(opts)) {
        INFO(e.component);
        CHECK(e.report.max_relative_error > 0.1);
    }
}
