#pragma once

#include <stdexcept>
#include <string>

#include "cce/network.hpp"

namespace cce {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class NonFiniteGradient : public std::runtime_error {
public:
    explicit NonFiniteGradient(std::size_t layer)
        : std::runtime_error("non-finite gradient in layer " + std::to_string(layer)), layer_(layer) {}
    std::size_t layer() const { return layer_; }

private:
    std::size_t layer_;
};

// Bias-corrected adaptive-moment update, in place. Gradients are checked
// for finiteness before any parameter is touched.
void optimizer_step(Parameters& params, const Gradients& grads, const AdamConfig& config);

}  // namespace cce
