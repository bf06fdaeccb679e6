#include "cce/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cce {

Image downscale(const Image& image) {
    if (image.height() % 2 != 0 || image.width() % 2 != 0) {
        throw std::invalid_argument("downscale: image dimensions must be even, got " + to_string(image.shape()));
    }
    Image out(Shape{image.channels(), image.height() / 2, image.width() / 2});
    for (std::size_t c = 0; c < out.channels(); ++c) {
        for (std::size_t y = 0; y < out.height(); ++y) {
            for (std::size_t x = 0; x < out.width(); ++x) {
                out.at(c, y, x) = 0.25 * (image.at(c, 2 * y, 2 * x) + image.at(c, 2 * y, 2 * x + 1) +
                                          image.at(c, 2 * y + 1, 2 * x) + image.at(c, 2 * y + 1, 2 * x + 1));
            }
        }
    }
    return out;
}

namespace {

struct Tap {
    std::size_t i0 = 0;
    std::size_t i1 = 0;
    double t = 0.0;
};

// Source taps for each output index of a 2x half-pixel-centred upsampling.
std::vector<Tap> upsample_taps(std::size_t n) {
    std::vector<Tap> taps(2 * n);
    const double last = static_cast<double>(n - 1);
    for (std::size_t j = 0; j < 2 * n; ++j) {
        const double u = std::clamp((static_cast<double>(j) + 0.5) / 2.0 - 0.5, 0.0, last);
        Tap tap;
        tap.i0 = static_cast<std::size_t>(std::floor(u));
        tap.i1 = std::min(tap.i0 + 1, n - 1);
        tap.t = u - static_cast<double>(tap.i0);
        taps[j] = tap;
    }
    return taps;
}

}  // namespace

Image upscale(const Image& image) {
    if (image.empty()) throw std::invalid_argument("upscale: empty image");
    const auto ty = upsample_taps(image.height());
    const auto tx = upsample_taps(image.width());
    Image out(Shape{image.channels(), 2 * image.height(), 2 * image.width()});
    for (std::size_t c = 0; c < out.channels(); ++c) {
        for (std::size_t y = 0; y < out.height(); ++y) {
            const Tap& a = ty[y];
            for (std::size_t x = 0; x < out.width(); ++x) {
                const Tap& b = tx[x];
                const double top = image.at(c, a.i0, b.i0) + b.t * (image.at(c, a.i0, b.i1) - image.at(c, a.i0, b.i0));
                const double bot = image.at(c, a.i1, b.i0) + b.t * (image.at(c, a.i1, b.i1) - image.at(c, a.i1, b.i0));
                out.at(c, y, x) = top + a.t * (bot - top);
            }
        }
    }
    return out;
}

Mask downscale_mask(const Mask& mask) {
    if (mask.height() % 2 != 0 || mask.width() % 2 != 0) {
        throw std::invalid_argument("downscale_mask: mask dimensions must be even");
    }
    Mask out(mask.height() / 2, mask.width() / 2);
    for (std::size_t y = 0; y < out.height(); ++y) {
        for (std::size_t x = 0; x < out.width(); ++x) {
            const int n = mask.missing(2 * y, 2 * x) + mask.missing(2 * y, 2 * x + 1) + mask.missing(2 * y + 1, 2 * x) +
                          mask.missing(2 * y + 1, 2 * x + 1);
            out.set(y, x, n >= 2);
        }
    }
    return out;
}

void CascadeModel::validate() const {
    const Shape s1 = stage1.spec.input;
    const Shape s2 = stage2.spec.input;
    if (s1.height * 2 != s2.height || s1.width * 2 != s2.width || s1.channels != s2.channels) {
        throw std::invalid_argument("cascade: stage-1 input " + to_string(s1) + " is not half of stage-2 input " +
                                    to_string(s2));
    }
    if (stage1.spec.output_shape() != s1 || stage2.spec.output_shape() != s2) {
        throw std::invalid_argument("cascade: each stage must predict an image of its input size");
    }
}

namespace {

void require_resolution(const ContextEncoder& model, const Image& image, const Mask& mask) {
    if (image.shape() != model.spec.input) {
        throw std::invalid_argument("image " + to_string(image.shape()) + " does not match model resolution " +
                                    to_string(model.spec.input));
    }
    if (mask.height() != image.height() || mask.width() != image.width()) {
        throw std::invalid_argument("mask size does not match image " + to_string(image.shape()));
    }
}

}  // namespace

Image composite(const Image& image, const Mask& mask, const Image& prediction) {
    if (prediction.shape() != image.shape()) {
        throw std::invalid_argument("composite: prediction " + to_string(prediction.shape()) + " vs image " +
                                    to_string(image.shape()));
    }
    if (mask.height() != image.height() || mask.width() != image.width()) {
        throw std::invalid_argument("composite: mask size does not match image");
    }
    Image out = image;
    const std::size_t plane = image.shape().plane();
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            if (mask[i]) out[c * plane + i] = prediction[c * plane + i];
        }
    }
    return out;
}

CascadeFill cascade_fill(const CascadeModel& model, const Image& image, const Mask& mask) {
    model.validate();
    require_resolution(model.stage2, image, mask);
    const Image small = downscale(image);
    const Mask small_mask = downscale_mask(mask);
    const Image stage1_input = apply_mask(small, small_mask, model.stage1.fill);
    const Image coarse = infer(model.stage1.spec, model.stage1.params, stage1_input);
    CascadeFill out;
    out.coarse_upscaled = upscale(coarse);
    out.stage2_input = composite(image, mask, out.coarse_upscaled);
    return out;
}

CascadeRecResult cascade_rec_loss(const CascadeModel& model, const Image& image, const Mask& mask) {
    const auto fill = cascade_fill(model, image, mask);
    auto fr = forward(model.stage2.spec, model.stage2.params, fill.stage2_input);
    const auto lg = masked_rec_loss(image, fr.output, mask);
    CascadeRecResult out;
    out.loss = lg.loss;
    out.stage2_grads = backward(model.stage2.spec, model.stage2.params, fr.tape, lg.gradient).params;
    out.prediction = std::move(fr.output);
    out.tape = std::move(fr.tape);
    return out;
}

CascadeAdvResult cascade_adv_loss(const CascadeModel& model, const NetworkSpec& disc_spec,
                                  const Parameters& disc_params, std::span<const Image> images,
                                  std::span<const Mask> masks) {
    if (images.size() != masks.size() || images.empty()) {
        throw std::invalid_argument("cascade_adv_loss: need one mask per image");
    }
    std::vector<Tensor> fakes;
    std::vector<Tape> tapes;
    CascadeAdvResult out;
    for (std::size_t b = 0; b < images.size(); ++b) {
        const auto fill = cascade_fill(model, images[b], masks[b]);
        auto fr = forward(model.stage2.spec, model.stage2.params, fill.stage2_input);
        auto pat = activation_pattern(model.stage2.spec, fr.tape);
        out.pattern.insert(out.pattern.end(), pat.begin(), pat.end());
        fakes.push_back(std::move(fr.output));
        tapes.push_back(std::move(fr.tape));
    }
    auto adv = adversarial_losses(disc_spec, disc_params, images, fakes);
    out.disc_loss = adv.disc_loss;
    out.gen_loss = adv.gen_loss;
    out.disc_grads = std::move(adv.disc_grads);
    out.pattern.insert(out.pattern.end(), adv.pattern.begin(), adv.pattern.end());
    out.stage2_grads = zero_gradients(model.stage2.params);
    for (std::size_t b = 0; b < images.size(); ++b) {
        accumulate(out.stage2_grads, backward(model.stage2.spec, model.stage2.params, tapes[b], adv.fake_grads[b]).params);
    }
    return out;
}

Image predict(const ContextEncoder& model, const Image& image, const Mask& mask) {
    require_resolution(model, image, mask);
    return infer(model.spec, model.params, apply_mask(image, mask, model.fill));
}

Image inpaint(const ContextEncoder& model, const Image& image, const Mask& mask) {
    return composite(image, mask, predict(model, image, mask));
}

Image inpaint(const CascadeModel& model, const Image& image, const Mask& mask) {
    const auto fill = cascade_fill(model, image, mask);
    return composite(image, mask, infer(model.stage2.spec, model.stage2.params, fill.stage2_input));
}

LatentVector encode_latent(const ContextEncoder& model, const Image& image, const Mask& mask) {
    require_resolution(model, image, mask);
    return encode(model.spec, model.params, apply_mask(image, mask, model.fill));
}

LatentVector encode_latent(const CascadeModel& model, const Image& image, const Mask& mask) {
    const auto fill = cascade_fill(model, image, mask);
    return encode(model.stage2.spec, model.stage2.params, fill.stage2_input);
}

}  // namespace cce
