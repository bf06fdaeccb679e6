#include "cce/optimizer.hpp"

#include <cmath>

namespace cce {

void optimizer_step(Parameters& params, const Gradients& grads, const AdamConfig& config) {
    if (grads.size() != params.layers.size()) {
        throw std::invalid_argument("optimizer_step: gradient layer count does not match parameters");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].weight.size() != params.layers[i].weight.size() ||
            grads[i].bias.size() != params.layers[i].bias.size()) {
            throw std::invalid_argument("optimizer_step: gradient shape mismatch at layer " + std::to_string(i));
        }
        for (double g : grads[i].weight) {
            if (!std::isfinite(g)) throw NonFiniteGradient(i);
        }
        for (double g : grads[i].bias) {
            if (!std::isfinite(g)) throw NonFiniteGradient(i);
        }
    }

    auto& adam = params.adam;
    if (adam.first_moment.size() != grads.size()) {
        adam.first_moment = zero_gradients(params);
        adam.second_moment = zero_gradients(params);
    }
    ++adam.step;
    const double t = static_cast<double>(adam.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);

    auto update = [&](std::vector<double>& w, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
            v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            w[k] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
        }
    };
    for (std::size_t i = 0; i < grads.size(); ++i) {
        update(params.layers[i].weight, grads[i].weight, adam.first_moment[i].weight, adam.second_moment[i].weight);
        update(params.layers[i].bias, grads[i].bias, adam.first_moment[i].bias, adam.second_moment[i].bias);
    }
    ++params.version;
}

}  // namespace cce
