#include "cce/grad_suite.hpp"

#include <random>

#include "cce/cascade.hpp"
#include "cce/losses.hpp"

namespace cce {

namespace {

Tensor uniform_tensor(Shape s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor t(s);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

std::vector<std::uint8_t> concat(std::vector<std::uint8_t> a, const std::vector<std::uint8_t>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

ContextEncoder random_encoder(std::size_t res, std::uint64_t seed) {
    ContextEncoder m;
    m.spec = context_encoder_spec(res);
    m.params = init_parameters(m.spec, seed);
    m.fill = {0.1, -0.05, 0.0};
    return m;
}

}  // namespace

std::vector<SuiteEntry> run_grad_suite(const GradSuiteOptions& options) {
    GradCheckOptions opts = options.check;
    if (options.mutate) opts.flip_sign_layer = 0;
    std::mt19937_64 rng(options.seed);
    std::vector<SuiteEntry> out;

    struct Probe {
        const char* name;
        Shape in;
        std::vector<LayerSpec> layers;
    };
    const std::vector<Probe> probes{
        {"conv", {2, 6, 6}, {LayerSpec::conv(3, 4, 2, 1)}},
        {"conv_transpose", {3, 3, 3}, {LayerSpec::conv_transpose(2, 4, 2, 1)}},
        {"channelwise_fc", {3, 3, 3}, {LayerSpec::channelwise_fc()}},
        {"linear", {2, 3, 2}, {LayerSpec::linear(5)}},
        {"leaky_relu", {2, 4, 4}, {LayerSpec::conv(3, 3, 1, 1), LayerSpec::activation(LayerKind::leaky_relu)}},
        {"relu", {2, 4, 4}, {LayerSpec::conv(3, 3, 1, 1), LayerSpec::activation(LayerKind::relu)}},
        {"tanh", {2, 4, 4}, {LayerSpec::conv(3, 3, 1, 1), LayerSpec::activation(LayerKind::tanh)}},
        {"sigmoid", {2, 4, 4}, {LayerSpec::linear(3), LayerSpec::activation(LayerKind::sigmoid)}},
    };
    for (const auto& p : probes) {
        NetworkSpec spec;
        spec.input = p.in;
        spec.layers = p.layers;
        auto params = init_parameters(spec, rng());
        const Tensor x = uniform_tensor(p.in, rng);
        const Tensor target = uniform_tensor(spec.output_shape(), rng);
        out.push_back({std::string("layer/") + p.name,
                       grad_check(spec, params, x, [&](const Tensor& o) { return mse_loss(target, o); }, opts)});
    }

    const std::size_t res = options.resolution;
    const Mask central = central_mask(res, res, 0.25);

    {
        auto ce = random_encoder(res, rng());
        const Image p = uniform_tensor({3, res, res}, rng);
        const Image in = apply_mask(p, central, ce.fill);
        out.push_back({"context_encoder/masked_rec_loss",
                       grad_check(ce.spec, ce.params, in,
                                  [&](const Tensor& o) { return masked_rec_loss(p, o, central); }, opts)});
    }

    const NetworkSpec disc_spec = discriminator_spec(res);
    auto disc = init_parameters(disc_spec, rng());
    const std::vector<Tensor> real{uniform_tensor({3, res, res}, rng), uniform_tensor({3, res, res}, rng)};
    const std::vector<Tensor> fake{uniform_tensor({3, res, res}, rng), uniform_tensor({3, res, res}, rng)};
    {
        GradCheckProblem problem;
        problem.evaluate = [&] {
            const auto r = adversarial_losses(disc_spec, disc, real, fake);
            return Evaluation{r.disc_loss, r.pattern};
        };
        problem.gradient = [&] { return adversarial_losses(disc_spec, disc, real, fake).disc_grads; };
        out.push_back({"discriminator/disc_loss", grad_check(disc_spec, disc, problem, opts)});
    }

    {
        // Joint loss on one sample, weights chosen so both terms matter.
        auto ce = random_encoder(res, rng());
        TrainConfig cfg = TrainConfig::with_adversarial(0.4);
        cfg.lambda_rec = 0.6;
        const Image p = real[0];
        const Image in = apply_mask(p, central, ce.fill);
        const std::vector<Tensor> real1{p};
        GradCheckProblem problem;
        problem.evaluate = [&] {
            auto fr = forward(ce.spec, ce.params, in);
            const std::vector<Tensor> fake1{fr.output};
            const auto adv = adversarial_losses(disc_spec, disc, real1, fake1);
            const double rec = masked_rec_loss(p, fr.output, central).loss;
            return Evaluation{joint_loss(rec, adv.gen_loss, cfg),
                              concat(activation_pattern(ce.spec, fr.tape), adv.pattern)};
        };
        problem.gradient = [&] {
            auto fr = forward(ce.spec, ce.params, in);
            const std::vector<Tensor> fake1{fr.output};
            const auto adv = adversarial_losses(disc_spec, disc, real1, fake1);
            Tensor g = masked_rec_loss(p, fr.output, central).gradient;
            for (std::size_t k = 0; k < g.size(); ++k) {
                g[k] = cfg.lambda_rec * g[k] + cfg.lambda_adv * adv.fake_grads[0][k];
            }
            return backward(ce.spec, ce.params, fr.tape, g).params;
        };
        out.push_back({"joint_loss", grad_check(ce.spec, ce.params, problem, opts)});
    }

    CascadeModel cascade{random_encoder(res / 2, rng()), random_encoder(res, rng())};
    {
        const Image p = uniform_tensor({3, res, res}, rng);
        GradCheckProblem problem;
        problem.evaluate = [&] {
            const auto r = cascade_rec_loss(cascade, p, central);
            return Evaluation{r.loss, activation_pattern(cascade.stage2.spec, r.tape)};
        };
        problem.gradient = [&] { return cascade_rec_loss(cascade, p, central).stage2_grads; };
        out.push_back({"cascade/rec_loss", grad_check(cascade.stage2.spec, cascade.stage2.params, problem, opts)});
    }

    {
        std::vector<Mask> masks{central};
        std::mt19937_64 mask_rng(rng());
        masks.push_back(random_blocks_mask(res, res, 0.25, {2, res / 4}, mask_rng));
        GradCheckProblem gen;
        gen.evaluate = [&] {
            const auto r = cascade_adv_loss(cascade, disc_spec, disc, real, masks);
            return Evaluation{r.gen_loss, r.pattern};
        };
        gen.gradient = [&] { return cascade_adv_loss(cascade, disc_spec, disc, real, masks).stage2_grads; };
        out.push_back({"cascade/adv_gen_loss", grad_check(cascade.stage2.spec, cascade.stage2.params, gen, opts)});

        GradCheckProblem dl;
        dl.evaluate = [&] {
            const auto r = cascade_adv_loss(cascade, disc_spec, disc, real, masks);
            return Evaluation{r.disc_loss, r.pattern};
        };
        dl.gradient = [&] { return cascade_adv_loss(cascade, disc_spec, disc, real, masks).disc_grads; };
        out.push_back({"cascade/adv_disc_loss", grad_check(disc_spec, disc, dl, opts)});
    }
    return out;
}

}  // namespace cce
