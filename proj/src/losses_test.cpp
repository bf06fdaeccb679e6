#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "cce/losses.hpp"

using namespace cce;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor t(s);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

// Discriminator D(x) = sigmoid(w * sum(x) + b) on a 1x1x2 input.
NetworkSpec tiny_disc() {
    NetworkSpec s;
    s.input = {1, 1, 2};
    s.layers = {LayerSpec::linear(1), LayerSpec::activation(LayerKind::sigmoid)};
    return s;
}

Parameters tiny_disc_params(double w, double b) { return Parameters{{LayerParams{{w, w}, {b}}, LayerParams{}}}; }

}  // namespace

TEST_CASE("masked reconstruction loss") {
    std::mt19937_64 rng(1);
    const Tensor p = random_tensor({3, 6, 6}, rng);
    const Mask m = central_mask(6, 6, 0.25);

    const auto same = masked_rec_loss(p, p, m);
    CHECK(same.loss == 0.0);
    for (double g : same.gradient.values()) CHECK(g == 0.0);

    Tensor one(Shape{1, 3, 3}, 0.0);
    one.at(0, 1, 1) = 1.0;
    Mask single(3, 3);
    single.set(1, 1, true);
    const auto hand = masked_rec_loss(one, Tensor(Shape{1, 3, 3}), single);
    CHECK(hand.loss == 1.0);
    CHECK(hand.gradient.at(0, 1, 1) == -2.0);

    const Tensor f = random_tensor({3, 6, 6}, rng);
    const auto lg = masked_rec_loss(p, f, m);
    double ref = 0.0;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 6; ++y)
            for (std::size_t x = 0; x < 6; ++x) {
                if (!m.missing(y, x)) {
                    CHECK(lg.gradient.at(c, y, x) == 0.0);
                    continue;
                }
                const double d = p.at(c, y, x) - f.at(c, y, x);
                ref += d * d;
            }
    CHECK(lg.loss == doctest::Approx(ref / (3.0 * m.missing_count())).epsilon(1e-14));

    double worst = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        Tensor a = f, b = f;
        const double h = 1e-6;
        a[k] += h;
        b[k] -= h;
        const double num = (masked_rec_loss(p, a, m).loss - masked_rec_loss(p, b, m).loss) / (2 * h);
        worst = std::max(worst, std::abs(num - lg.gradient[k]) / std::max({std::abs(num), std::abs(lg.gradient[k]), 1e-3}));
    }
    CHECK(worst < 1e-6);

    CHECK_THROWS_AS(masked_rec_loss(p, f, Mask(6, 6)), std::invalid_argument);
    CHECK_THROWS_AS(masked_rec_loss(p, Tensor(Shape{3, 6, 5}), m), std::invalid_argument);
}

TEST_CASE("adversarial loss endpoints") {
    const auto spec = tiny_disc();
    const std::vector<Tensor> real{Tensor(Shape{1, 1, 2}, 1.0)};
    const std::vector<Tensor> fake{Tensor(Shape{1, 1, 2}, -1.0)};

    const auto half = adversarial_losses(spec, tiny_disc_params(0.0, 0.0), real, fake);
    CHECK(half.disc_loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
    CHECK(half.gen_loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    const auto perfect = adversarial_losses(spec, tiny_disc_params(50.0, 0.0), real, fake);
    CHECK(perfect.real_probs[0] > 1.0 - 1e-7);
    CHECK(perfect.fake_probs[0] < 1e-7);
    CHECK(perfect.disc_loss < 1e-6);
    CHECK(perfect.gen_loss == doctest::Approx(-std::log(kProbabilityClamp)));
    for (double v : perfect.fake_grads[0].values()) CHECK(std::isfinite(v));

    const std::vector<Tensor> two{real[0], real[0]};
    CHECK_THROWS_AS(adversarial_losses(spec, tiny_disc_params(0, 0), two, fake), std::invalid_argument);
}

TEST_CASE("adversarial gradients match central differences") {
    std::mt19937_64 rng(3);
    const auto spec = discriminator_spec(8);
    auto params = init_parameters(spec, 4);
    const std::vector<Tensor> real{random_tensor({3, 8, 8}, rng), random_tensor({3, 8, 8}, rng)};
    std::vector<Tensor> fake{random_tensor({3, 8, 8}, rng), random_tensor({3, 8, 8}, rng)};

    const auto r = adversarial_losses(spec, params, real, fake);
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t k = 0; k < fake[b].size(); k += 7) {
            const double saved = fake[b][k];
            fake[b][k] = saved + h;
            const auto plus = adversarial_losses(spec, params, real, fake);
            fake[b][k] = saved - h;
            const auto minus = adversarial_losses(spec, params, real, fake);
            fake[b][k] = saved;
            if (plus.pattern != r.pattern || minus.pattern != r.pattern) continue;
            const double num = (plus.gen_loss - minus.gen_loss) / (2 * h);
            const double a = r.fake_grads[b][k];
            worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-4}));
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("joint loss and config") {
    TrainConfig cfg;
    CHECK(cfg.lambda_adv == 0.0);
    CHECK(joint_loss(3.0, 100.0, cfg) == cfg.lambda_rec * 3.0);

    TrainConfig both = TrainConfig::with_adversarial();
    CHECK(both.lambda_rec == 0.999);
    CHECK(both.lambda_adv == 0.001);
    CHECK(joint_loss(1.0, 2.0, both) == doctest::Approx(1.001).epsilon(1e-15));
    CHECK_NOTHROW(both.validate());

    TrainConfig bad;
    bad.lambda_adv = 0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = TrainConfig{};
    bad.lambda_rec = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = TrainConfig::with_adversarial(-1.0);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
