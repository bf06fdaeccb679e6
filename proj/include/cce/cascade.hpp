#pragma once

#include <array>
#include <span>
#include <vector>

#include "cce/losses.hpp"
#include "cce/mask.hpp"
#include "cce/network.hpp"
#include "cce/tensor.hpp"

namespace cce {

// 2x2 box average; identical to bilinear sampling at the half-resolution pixel centres.
Image downscale(const Image& image);

// Half-pixel-centred bilinear interpolation to twice the size, edges clamped.
Image upscale(const Image& image);

// Box-downscaled mask thresholded at 0.5 (a 2x2 block with two or more
// missing pixels stays missing).
Mask downscale_mask(const Mask& mask);

// A single encoder-decoder together with the colour written into dropped pixels.
struct ContextEncoder {
    NetworkSpec spec;
    Parameters params;
    std::array<double, 3> fill{0.0, 0.0, 0.0};

    std::size_t resolution() const { return spec.input.height; }
};

struct CascadeModel {
    ContextEncoder stage1;  // half resolution, frozen while stage 2 trains
    ContextEncoder stage2;  // full resolution

    // Throws unless stage1 is exactly half of stage2 in each dimension.
    void validate() const;
};

struct CascadeFill {
    Image stage2_input;      // context of P with the upscaled coarse fill pasted into M
    Image coarse_upscaled;   // stage-1 prediction upscaled to full resolution
};

// Drop M, run stage 1 on the downscaled masked image, upscale its
// prediction and composite it into the missing region.
CascadeFill cascade_fill(const CascadeModel& model, const Image& image, const Mask& mask);

struct CascadeRecResult {
    double loss = 0.0;
    Gradients stage2_grads;
    Image prediction;
    Tape tape;  // stage-2 tape, for rectifier-pattern inspection
};

CascadeRecResult cascade_rec_loss(const CascadeModel& model, const Image& image, const Mask& mask);

struct CascadeAdvResult {
    double disc_loss = 0.0;
    double gen_loss = 0.0;
    Gradients disc_grads;    // of disc_loss
    Gradients stage2_grads;  // of gen_loss
    std::vector<std::uint8_t> pattern;
};

// Discriminator sees real images against stage-2 outputs on the cascade composite.
CascadeAdvResult cascade_adv_loss(const CascadeModel& model, const NetworkSpec& disc_spec,
                                  const Parameters& disc_params, std::span<const Image> images,
                                  std::span<const Mask> masks);

// Prediction of a single context encoder on apply_mask(image, mask, fill).
Image predict(const ContextEncoder& model, const Image& image, const Mask& mask);

// (1 - M) * P + M * prediction; context pixels are copied, never recomputed.
Image composite(const Image& image, const Mask& mask, const Image& prediction);

Image inpaint(const ContextEncoder& model, const Image& image, const Mask& mask);
Image inpaint(const CascadeModel& model, const Image& image, const Mask& mask);

// Latent consumed by the distortion metric; for cascades it is the stage-2
// encoding of the cascade composite.
LatentVector encode_latent(const ContextEncoder& model, const Image& image, const Mask& mask);
LatentVector encode_latent(const CascadeModel& model, const Image& image, const Mask& mask);

}  // namespace cce
