#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cce/losses.hpp"
#include "cce/network.hpp"

namespace cce {

struct GradCheckOptions {
    double epsilon = 1e-5;
    std::size_t coordinates_per_layer = 50;
    std::uint64_t seed = 1;
    // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor);
    // below the floor the comparison is effectively absolute.
    double floor = 1e-4;
    // Self-test hook: negates the analytic gradient of this layer before comparing.
    std::optional<std::size_t> flip_sign_layer;
};

struct LayerCheck {
    std::size_t layer = 0;
    LayerKind kind = LayerKind::conv;
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // coordinates whose perturbation crossed a kink
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::vector<LayerCheck> layers;
};

struct Evaluation {
    double loss = 0.0;
    // Piecewise-linear state (rectifier signs, clamps). A perturbation that
    // changes it straddles a non-differentiable point and is resampled.
    std::vector<std::uint8_t> pattern;
};

// A scalar loss of `params` evaluated through closures that read the
// parameters by reference.
struct GradCheckProblem {
    std::function<Evaluation()> evaluate;
    std::function<Gradients()> gradient;
};

// Compares analytic gradients against central differences on a random
// subsample of coordinates in every parameterised layer.
GradCheckReport grad_check(const NetworkSpec& spec, Parameters& params, const GradCheckProblem& problem,
                           const GradCheckOptions& options = {});

// Loss on the network output: returns the loss and its gradient w.r.t. the output.
using OutputLoss = std::function<LossGradient(const Tensor& output)>;

GradCheckReport grad_check(const NetworkSpec& spec, Parameters& params, const Tensor& input,
                           const OutputLoss& loss_fn, const GradCheckOptions& options = {});

// Plain mean squared error against a fixed target.
LossGradient mse_loss(const Tensor& target, const Tensor& prediction);

}  // namespace cce
