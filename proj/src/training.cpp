#include "cce/training.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "cce/checkpoint.hpp"
#include "cce/optimizer.hpp"

namespace cce {

namespace {

using SampleFn = std::function<std::optional<Sample>(std::size_t item, std::mt19937_64& rng)>;

std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b)};
    return std::mt19937_64(seq);
}

std::array<double, 3> fill_color(const Dataset& dataset) { return dataset_mean_color(dataset); }

std::size_t image_resolution(const Dataset& dataset) {
    if (dataset.items.empty()) throw std::invalid_argument("training: dataset is empty");
    const auto& first = dataset.items.front();
    if (first.height() != first.width()) throw std::invalid_argument("training: images must be square");
    for (const auto& im : dataset.items) {
        if (im.shape() != first.shape()) throw std::invalid_argument("training: images differ in size");
    }
    return first.height();
}

ContextEncoder fresh_model(std::size_t resolution, const Dataset& dataset, const TrainOptions& options,
                           std::uint64_t salt) {
    ContextEncoder model;
    model.spec = context_encoder_spec(resolution, options.latent_dim);
    model.params = init_parameters(model.spec, options.config.seed * 1000003ULL + salt);
    round_to_float(model.params);
    model.fill = fill_color(dataset);
    return model;
}

struct SampleResult {
    double loss = 0.0;
    Gradients grads;
    Tensor output;
    Tape tape;
};

ContextEncoder fit(ContextEncoder model, const Dataset& dataset, const SampleFn& make_sample,
                   const TrainOptions& options, const std::string& stage) {
    const auto& cfg = options.config;
    cfg.validate();
    if (dataset.indices(Split::train).empty()) throw std::invalid_argument("training: dataset has no train images");

    const AdamConfig adam{cfg.learning_rate};
    NetworkSpec disc_spec;
    Parameters disc_params;
    if (cfg.adversarial_enabled) {
        disc_spec = discriminator_spec(model.resolution());
        disc_params = init_parameters(disc_spec, cfg.seed * 1000003ULL + 77);
    }

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const auto order = epoch_order(dataset, Split::train, cfg.seed, epoch);
        CompensatedSum rec_sum, adv_sum, disc_sum;
        std::size_t rec_count = 0, adv_batches = 0;

        for (std::size_t first = 0, batch = 0; first < order.size(); first += cfg.batch_size, ++batch) {
            const std::size_t last = std::min(order.size(), first + cfg.batch_size);
            std::vector<Sample> samples;
            for (std::size_t pos = first; pos < last; ++pos) {
                auto rng = seeded_rng(cfg.seed, epoch, pos);
                auto s = make_sample(order[pos], rng);
                if (s && s->mask.missing_count() > 0) samples.push_back(std::move(*s));
            }
            if (samples.empty()) continue;

            std::vector<SampleResult> results(samples.size());
            parallel_for(samples.size(), options.threads, [&](std::size_t b) {
                auto fr = forward(model.spec, model.params, samples[b].input);
                const auto lg = masked_rec_loss(samples[b].target, fr.output, samples[b].mask);
                results[b].loss = lg.loss;
                results[b].grads = backward(model.spec, model.params, fr.tape, lg.gradient).params;
                if (cfg.adversarial_enabled) {
                    results[b].output = std::move(fr.output);
                    results[b].tape = std::move(fr.tape);
                }
            });

            const double inv_b = 1.0 / static_cast<double>(samples.size());
            Gradients gen = zero_gradients(model.params);
            for (std::size_t b = 0; b < samples.size(); ++b) {
                if (!std::isfinite(results[b].loss)) {
                    throw std::runtime_error(stage + ": non-finite reconstruction loss at epoch " +
                                             std::to_string(epoch) + ", batch " + std::to_string(batch));
                }
                rec_sum.add(results[b].loss);
                ++rec_count;
                accumulate(gen, results[b].grads, cfg.lambda_rec * inv_b);
            }

            if (cfg.adversarial_enabled) {
                std::vector<Tensor> real, fake;
                for (std::size_t b = 0; b < samples.size(); ++b) {
                    real.push_back(samples[b].target);
                    fake.push_back(results[b].output);
                }
                auto adv = adversarial_losses(disc_spec, disc_params, real, fake);
                if (!std::isfinite(adv.disc_loss) || !std::isfinite(adv.gen_loss)) {
                    throw std::runtime_error(stage + ": non-finite adversarial loss at epoch " +
                                             std::to_string(epoch) + ", batch " + std::to_string(batch));
                }
                for (std::size_t b = 0; b < samples.size(); ++b) {
                    accumulate(gen, backward(model.spec, model.params, results[b].tape, adv.fake_grads[b]).params,
                               cfg.lambda_adv);
                }
                adv_sum.add(adv.gen_loss);
                disc_sum.add(adv.disc_loss);
                ++adv_batches;
                optimizer_step(disc_params, adv.disc_grads, adam);
            }

            try {
                optimizer_step(model.params, gen, adam);
            } catch (const NonFiniteGradient& e) {
                throw std::runtime_error(stage + ": " + e.what() + " at epoch " + std::to_string(epoch) + ", batch " +
                                         std::to_string(batch));
            }
        }

        if (options.on_epoch) {
            EpochRecord rec;
            rec.stage = stage;
            rec.epoch = epoch;
            rec.rec_loss = rec_count ? rec_sum.value() / static_cast<double>(rec_count) : 0.0;
            rec.adv_loss = adv_batches ? adv_sum.value() / static_cast<double>(adv_batches) : 0.0;
            rec.disc_loss = adv_batches ? disc_sum.value() / static_cast<double>(adv_batches) : 0.0;
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            options.on_epoch(rec);
        }
    }
    round_to_float(model.params);
    return model;
}

}  // namespace

ContextEncoder untrained_stage1(const Dataset& dataset, const TrainOptions& options) {
    const std::size_t res = image_resolution(dataset);
    if (res % 2 != 0) throw std::invalid_argument("train_stage1: image size must be even");
    return fresh_model(res / 2, dataset, options, 1);
}

ContextEncoder untrained_single(const Dataset& dataset, const TrainOptions& options) {
    return fresh_model(image_resolution(dataset), dataset, options, 3);
}

CascadeModel untrained_cascade(const ContextEncoder& stage1, const Dataset& dataset, const TrainOptions& options) {
    CascadeModel model{stage1, fresh_model(image_resolution(dataset), dataset, options, 2)};
    model.validate();
    return model;
}

ContextEncoder train_stage1(const Dataset& dataset, const TrainOptions& options) {
    ContextEncoder model = untrained_stage1(dataset, options);
    const std::size_t res = image_resolution(dataset);
    const auto fill = model.fill;
    SampleFn make = [&](std::size_t item, std::mt19937_64& rng) -> std::optional<Sample> {
        const Mask full = make_mask(options.masks, res, res, rng);
        Sample s;
        s.target = downscale(dataset.items[item]);
        s.mask = downscale_mask(full);
        s.input = apply_mask(s.target, s.mask, fill);
        return s;
    };
    return fit(std::move(model), dataset, make, options, "stage1");
}

ContextEncoder train_single(const Dataset& dataset, const TrainOptions& options) {
    ContextEncoder model = untrained_single(dataset, options);
    const std::size_t res = model.resolution();
    const auto fill = model.fill;
    SampleFn make = [&](std::size_t item, std::mt19937_64& rng) -> std::optional<Sample> {
        Sample s;
        s.target = dataset.items[item];
        s.mask = make_mask(options.masks, res, res, rng);
        s.input = apply_mask(s.target, s.mask, fill);
        return s;
    };
    return fit(std::move(model), dataset, make, options, "single");
}

CascadeModel train_stage2(const ContextEncoder& stage1, const Dataset& dataset, const TrainOptions& options) {
    CascadeModel cascade = untrained_cascade(stage1, dataset, options);
    const std::size_t res = cascade.stage2.resolution();
    SampleFn make = [&](std::size_t item, std::mt19937_64& rng) -> std::optional<Sample> {
        Sample s;
        s.target = dataset.items[item];
        s.mask = make_mask(options.masks, res, res, rng);
        s.input = cascade_fill(cascade, s.target, s.mask).stage2_input;
        return s;
    };
    ContextEncoder trained = fit(cascade.stage2, dataset, make, options, "stage2");
    return CascadeModel{stage1, std::move(trained)};
}

namespace {

template <typename LossFn>
double mean_over_val(const Dataset& dataset, const MaskConfig& masks, std::uint64_t seed, LossFn&& loss) {
    auto idx = dataset.indices(Split::val);
    if (idx.empty()) throw std::invalid_argument("heldout loss: dataset has no validation images");
    CompensatedSum sum;
    std::size_t n = 0;
    for (std::size_t i : idx) {
        auto rng = seeded_rng(seed, i, 0xE7A1);
        const Image& im = dataset.items[i];
        const Mask m = make_mask(masks, im.height(), im.width(), rng);
        if (auto v = loss(im, m)) {
            sum.add(*v);
            ++n;
        }
    }
    if (n == 0) throw std::runtime_error("heldout loss: every validation mask was empty");
    return sum.value() / static_cast<double>(n);
}

}  // namespace

double heldout_loss_stage1(const ContextEncoder& model, const Dataset& dataset, const MaskConfig& masks,
                           std::uint64_t seed) {
    return mean_over_val(dataset, masks, seed, [&](const Image& im, const Mask& m) -> std::optional<double> {
        const Image small = downscale(im);
        const Mask sm = downscale_mask(m);
        if (sm.missing_count() == 0) return std::nullopt;
        return masked_rec_loss(small, predict(model, small, sm), sm).loss;
    });
}

double heldout_loss(const ContextEncoder& model, const Dataset& dataset, const MaskConfig& masks, std::uint64_t seed) {
    return mean_over_val(dataset, masks, seed, [&](const Image& im, const Mask& m) -> std::optional<double> {
        if (m.missing_count() == 0) return std::nullopt;
        return masked_rec_loss(im, predict(model, im, m), m).loss;
    });
}

double heldout_loss(const CascadeModel& model, const Dataset& dataset, const MaskConfig& masks, std::uint64_t seed) {
    return mean_over_val(dataset, masks, seed, [&](const Image& im, const Mask& m) -> std::optional<double> {
        if (m.missing_count() == 0) return std::nullopt;
        const auto fill = cascade_fill(model, im, m);
        return masked_rec_loss(im, infer(model.stage2.spec, model.stage2.params, fill.stage2_input), m).loss;
    });
}

}  // namespace cce
