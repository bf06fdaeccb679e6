#include "cce/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cce {

TrainConfig TrainConfig::with_adversarial(double lambda_adv) {
    TrainConfig cfg;
    cfg.adversarial_enabled = true;
    cfg.lambda_adv = lambda_adv;
    return cfg;
}

void TrainConfig::validate() const {
    if (!(lambda_rec > 0.0)) throw std::invalid_argument("train config: lambda_rec must be positive");
    if (lambda_adv < 0.0) throw std::invalid_argument("train config: lambda_adv must be non-negative");
    if (!adversarial_enabled && lambda_adv != 0.0) {
        throw std::invalid_argument("train config: lambda_adv must be 0 when adversarial training is disabled");
    }
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
    if (batch_size == 0) throw std::invalid_argument("train config: batch size must be positive");
}

LossGradient masked_rec_loss(const Tensor& target, const Tensor& prediction, const Mask& mask) {
    if (target.shape() != prediction.shape()) {
        throw std::invalid_argument("masked_rec_loss: target " + to_string(target.shape()) + " vs prediction " +
                                    to_string(prediction.shape()));
    }
    if (mask.height() != target.height() || mask.width() != target.width()) {
        throw std::invalid_argument("masked_rec_loss: mask does not match image size");
    }
    const std::size_t missing = mask.missing_count();
    if (missing == 0) throw std::invalid_argument("masked_rec_loss: mask has no missing pixels");

    const double count = static_cast<double>(missing * target.channels());
    LossGradient out{0.0, Tensor(target.shape())};
    CompensatedSum sum;
    const std::size_t plane = target.shape().plane();
    for (std::size_t c = 0; c < target.channels(); ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            if (!mask[i]) continue;
            const std::size_t k = c * plane + i;
            const double diff = prediction[k] - target[k];
            sum.add(diff * diff);
            out.gradient[k] = 2.0 * diff / count;
        }
    }
    out.loss = sum.value() / count;
    return out;
}

namespace {

double clamp_probability(double p, bool& clamped) {
    const double lo = kProbabilityClamp;
    const double hi = 1.0 - kProbabilityClamp;
    clamped = p < lo || p > hi;
    return std::clamp(p, lo, hi);
}

Tensor scalar_tensor(const Shape& shape, double value) { return Tensor(shape, value); }

}  // namespace

AdversarialResult adversarial_losses(const NetworkSpec& disc_spec, const Parameters& disc_params,
                                     std::span<const Tensor> real, std::span<const Tensor> fake) {
    if (real.size() != fake.size() || real.empty()) {
        throw std::invalid_argument("adversarial_losses: real batch of " + std::to_string(real.size()) +
                                    " vs fake batch of " + std::to_string(fake.size()));
    }
    const Shape out_shape = disc_spec.output_shape();
    if (out_shape.size() != 1) {
        throw std::invalid_argument("adversarial_losses: discriminator must output one probability per sample");
    }
    for (std::size_t b = 0; b < real.size(); ++b) {
        if (real[b].shape() != fake[b].shape()) {
            throw std::invalid_argument("adversarial_losses: real/fake shape mismatch at sample " + std::to_string(b));
        }
    }

    const double inv_b = 1.0 / static_cast<double>(real.size());
    AdversarialResult res;
    res.disc_grads = zero_gradients(disc_params);
    CompensatedSum disc_sum;
    CompensatedSum gen_sum;

    for (std::size_t b = 0; b < real.size(); ++b) {
        auto fr = forward(disc_spec, disc_params, real[b]);
        bool clamped = false;
        const double p = clamp_probability(fr.output[0], clamped);
        res.real_probs.push_back(fr.output[0]);
        disc_sum.add(-std::log(p));
        const double dp = clamped ? 0.0 : -inv_b / p;
        auto br = backward(disc_spec, disc_params, fr.tape, scalar_tensor(out_shape, dp));
        accumulate(res.disc_grads, br.params);
        auto pat = activation_pattern(disc_spec, fr.tape);
        res.pattern.insert(res.pattern.end(), pat.begin(), pat.end());
        res.pattern.push_back(clamped ? 1 : 0);
    }

    for (std::size_t b = 0; b < fake.size(); ++b) {
        auto ff = forward(disc_spec, disc_params, fake[b]);
        bool clamped = false;
        const double q = clamp_probability(ff.output[0], clamped);
        res.fake_probs.push_back(ff.output[0]);
        disc_sum.add(-std::log(1.0 - q));
        gen_sum.add(-std::log(q));

        const double d_disc = clamped ? 0.0 : inv_b / (1.0 - q);
        auto bd = backward(disc_spec, disc_params, ff.tape, scalar_tensor(out_shape, d_disc));
        accumulate(res.disc_grads, bd.params);

        const double d_gen = clamped ? 0.0 : -inv_b / q;
        auto bg = backward(disc_spec, disc_params, ff.tape, scalar_tensor(out_shape, d_gen));
        res.fake_grads.push_back(std::move(bg.input));

        auto pat = activation_pattern(disc_spec, ff.tape);
        res.pattern.insert(res.pattern.end(), pat.begin(), pat.end());
        res.pattern.push_back(clamped ? 1 : 0);
    }

    res.disc_loss = disc_sum.value() * inv_b;
    res.gen_loss = gen_sum.value() * inv_b;
    return res;
}

double joint_loss(double rec, double adv_gen, const TrainConfig& config) {
    return config.lambda_rec * rec + config.lambda_adv * adv_gen;
}

}  // namespace cce
