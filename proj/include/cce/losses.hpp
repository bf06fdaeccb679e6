#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cce/mask.hpp"
#include "cce/network.hpp"
#include "cce/tensor.hpp"

namespace cce {

struct TrainConfig {
    double lambda_rec = 0.999;
    double lambda_adv = 0.0;
    double learning_rate = 1e-3;
    std::size_t batch_size = 16;
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
    bool adversarial_enabled = false;

    // Reconstruction-dominant weighting with the adversarial term switched on.
    static TrainConfig with_adversarial(double lambda_adv = 0.001);

    // Throws std::invalid_argument on a violated invariant.
    void validate() const;
};

struct LossGradient {
    double loss = 0.0;
    Tensor gradient;  // d loss / d prediction
};

// Mean squared error over the masked (missing) elements of every channel.
LossGradient masked_rec_loss(const Tensor& target, const Tensor& prediction, const Mask& mask);

struct AdversarialResult {
    double disc_loss = 0.0;
    double gen_loss = 0.0;
    Gradients disc_grads;               // d disc_loss / d discriminator parameters
    std::vector<Tensor> fake_grads;     // d gen_loss / d fake_i
    std::vector<double> real_probs;
    std::vector<double> fake_probs;
    std::vector<std::uint8_t> pattern;  // rectifier and clamp states, for gradient checking
};

inline constexpr double kProbabilityClamp = 1e-7;

// disc_loss = -mean[log D(real) + log(1 - D(fake))]
// gen_loss  = -mean[log D(fake)]
// with probabilities clamped to [eps, 1 - eps] before the logarithm.
AdversarialResult adversarial_losses(const NetworkSpec& disc_spec, const Parameters& disc_params,
                                     std::span<const Tensor> real, std::span<const Tensor> fake);

double joint_loss(double rec, double adv_gen, const TrainConfig& config);

}  // namespace cce
