#include "cce/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cce {

namespace {

constexpr std::size_t kMaxDraws = 20;  // per requested coordinate, to replace kink crossings

}  // namespace

GradCheckReport grad_check(const NetworkSpec& spec, Parameters& params, const GradCheckProblem& problem,
                           const GradCheckOptions& options) {
    validate_parameters(spec, params);
    const Evaluation base = problem.evaluate();
    Gradients analytic = problem.gradient();
    if (options.flip_sign_layer && *options.flip_sign_layer < analytic.size()) {
        for (auto& w : analytic[*options.flip_sign_layer].weight) w = -w;
        for (auto& b : analytic[*options.flip_sign_layer].bias) b = -b;
    }

    std::mt19937_64 rng(options.seed);
    GradCheckReport report;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        auto& lp = params.layers[li];
        const std::size_t total = lp.weight.size() + lp.bias.size();
        if (total == 0) continue;

        LayerCheck check;
        check.layer = li;
        check.kind = spec.layers[li].kind;

        std::vector<std::size_t> order(total);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        const std::size_t wanted = std::min(options.coordinates_per_layer, total);
        const std::size_t budget = std::min(total, wanted * kMaxDraws);

        for (std::size_t pos = 0; pos < budget && check.checked < wanted; ++pos) {
            const std::size_t idx = order[pos];
            const bool is_weight = idx < lp.weight.size();
            double& coord = is_weight ? lp.weight[idx] : lp.bias[idx - lp.weight.size()];
            const double a = is_weight ? analytic[li].weight[idx] : analytic[li].bias[idx - lp.weight.size()];

            const double saved = coord;
            coord = saved + options.epsilon;
            const Evaluation plus = problem.evaluate();
            coord = saved - options.epsilon;
            const Evaluation minus = problem.evaluate();
            coord = saved;

            if (plus.pattern != base.pattern || minus.pattern != base.pattern) {
                ++check.skipped;
                continue;
            }
            const double numeric = (plus.loss - minus.loss) / (2.0 * options.epsilon);
            const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
            check.max_relative_error = std::max(check.max_relative_error, std::abs(a - numeric) / denom);
            ++check.checked;
        }
        report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
        report.layers.push_back(check);
    }
    return report;
}

GradCheckReport grad_check(const NetworkSpec& spec, Parameters& params, const Tensor& input,
                           const OutputLoss& loss_fn, const GradCheckOptions& options) {
    GradCheckProblem problem;
    problem.evaluate = [&] {
        auto fr = forward(spec, params, input);
        return Evaluation{loss_fn(fr.output).loss, activation_pattern(spec, fr.tape)};
    };
    problem.gradient = [&] {
        auto fr = forward(spec, params, input);
        const auto lg = loss_fn(fr.output);
        return backward(spec, params, fr.tape, lg.gradient).params;
    };
    return grad_check(spec, params, problem, options);
}

LossGradient mse_loss(const Tensor& target, const Tensor& prediction) {
    if (target.shape() != prediction.shape()) throw std::invalid_argument("mse_loss: shape mismatch");
    LossGradient out{0.0, Tensor(target.shape())};
    const double n = static_cast<double>(target.size());
    for (std::size_t k = 0; k < target.size(); ++k) {
        const double d = prediction[k] - target[k];
        out.loss += d * d / n;
        out.gradient[k] = 2.0 * d / n;
    }
    return out;
}

}  // namespace cce
