#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "cce/cascade.hpp"
#include "cce/imaging.hpp"
#include "cce/losses.hpp"
#include "cce/mask.hpp"

namespace cce {

struct EpochRecord {
    std::string stage;
    std::size_t epoch = 0;
    double rec_loss = 0.0;   // mean masked reconstruction loss over the epoch
    double adv_loss = 0.0;   // mean generator adversarial loss (0 when disabled)
    double disc_loss = 0.0;  // mean discriminator loss (0 when disabled)
    double seconds = 0.0;
};

struct TrainOptions {
    TrainConfig config;
    MaskConfig masks;  // drawn at full image resolution
    std::size_t latent_dim = 256;
    unsigned threads = 1;
    std::function<void(const EpochRecord&)> on_epoch;
};

// One training example: the target image, its mask and the network input.
struct Sample {
    Image target;
    Mask mask;
    Image input;
};

// Half-resolution context encoder trained on downscaled images and masks.
ContextEncoder train_stage1(const Dataset& dataset, const TrainOptions& options);

// Standard single-stage context encoder at full resolution.
ContextEncoder train_single(const Dataset& dataset, const TrainOptions& options);

// Full-resolution stage trained on cascade composites; `stage1` is copied
// into the result untouched.
CascadeModel train_stage2(const ContextEncoder& stage1, const Dataset& dataset, const TrainOptions& options);

// Untrained models with the same initialisation the trainers use.
ContextEncoder untrained_stage1(const Dataset& dataset, const TrainOptions& options);
ContextEncoder untrained_single(const Dataset& dataset, const TrainOptions& options);
CascadeModel untrained_cascade(const ContextEncoder& stage1, const Dataset& dataset, const TrainOptions& options);

// Mean masked reconstruction loss over the validation split. Masks are
// drawn from `seed`, so different models are compared on identical masks.
double heldout_loss_stage1(const ContextEncoder& model, const Dataset& dataset, const MaskConfig& masks,
                           std::uint64_t seed);
double heldout_loss(const ContextEncoder& model, const Dataset& dataset, const MaskConfig& masks, std::uint64_t seed);
double heldout_loss(const CascadeModel& model, const Dataset& dataset, const MaskConfig& masks, std::uint64_t seed);

}  // namespace cce
