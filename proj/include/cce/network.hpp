#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cce/tensor.hpp"

namespace cce {

enum class LayerKind : std::uint32_t {
    conv = 0,
    conv_transpose = 1,
    channelwise_fc = 2,
    linear = 3,
    leaky_relu = 4,
    relu = 5,
    tanh = 6,
    sigmoid = 7,
};

std::string to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t out_channels = 0;  // conv, conv_transpose
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t out_features = 0;  // linear
    double slope = 0.2;            // leaky_relu

    static LayerSpec conv(std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t padding);
    static LayerSpec conv_transpose(std::size_t out_channels, std::size_t kernel, std::size_t stride,
                                    std::size_t padding);
    static LayerSpec channelwise_fc();
    static LayerSpec linear(std::size_t out_features);
    static LayerSpec activation(LayerKind kind, double slope = 0.2);

    bool has_parameters() const;
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Raised when a layer cannot consume the shape produced by its predecessor.
class ShapeError : public std::invalid_argument {
public:
    ShapeError(std::size_t layer, const std::string& what)
        : std::invalid_argument("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
    std::size_t layer() const { return layer_; }

private:
    std::size_t layer_;
};

struct NetworkSpec {
    Shape input;
    std::vector<LayerSpec> layers;
    // Layer whose output is the latent representation; encoders have exactly one.
    std::optional<std::size_t> bottleneck;

    // shapes()[0] is the input, shapes()[i + 1] the output of layer i.
    std::vector<Shape> shapes() const;
    Shape output_shape() const { return shapes().back(); }
    std::size_t latent_dim() const;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Desk-scale context encoder: stride-2 4x4 convolutions down to a 2x2 grid,
// a channel-wise fully-connected bottleneck, and mirrored transposed
// convolutions ending in tanh. latent_dim must be divisible by 4.
NetworkSpec context_encoder_spec(std::size_t resolution, std::size_t latent_dim = 256);

// Strided convolutions followed by a single sigmoid probability.
NetworkSpec discriminator_spec(std::size_t resolution);

struct LayerParams {
    std::vector<double> weight;
    std::vector<double> bias;

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

using Gradients = std::vector<LayerParams>;

struct AdamState {
    Gradients first_moment;
    Gradients second_moment;
    std::uint64_t step = 0;
};

struct Parameters {
    std::vector<LayerParams> layers;
    AdamState adam;
    // Bumped on every update; tapes recorded against an older version are stale.
    std::uint64_t version = 0;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
Parameters init_parameters(const NetworkSpec& spec, std::uint64_t seed);

// Weight and bias element counts for one layer given its input shape.
std::pair<std::size_t, std::size_t> parameter_counts(const LayerSpec& layer, const Shape& input);

Gradients zero_gradients(const Parameters& params);
void accumulate(Gradients& into, const Gradients& from, double scale = 1.0);
void scale(Gradients& grads, double factor);

struct Tape {
    std::vector<Tensor> activations;  // activations[i] is the input of layer i
    std::uint64_t params_version = 0;
};

struct ForwardResult {
    Tensor output;
    Tape tape;
};

ForwardResult forward(const NetworkSpec& spec, const Parameters& params, const Tensor& input);
Tensor infer(const NetworkSpec& spec, const Parameters& params, const Tensor& input);

struct BackwardResult {
    Gradients params;
    Tensor input;
};

BackwardResult backward(const NetworkSpec& spec, const Parameters& params, const Tape& tape,
                        const Tensor& output_gradient);

// Flattened output of the bottleneck layer for an already-masked input.
LatentVector encode(const NetworkSpec& spec, const Parameters& params, const Tensor& masked_input);

// One byte per rectifier unit recording which side of the kink it sits on.
std::vector<std::uint8_t> activation_pattern(const NetworkSpec& spec, const Tape& tape);

void validate_parameters(const NetworkSpec& spec, const Parameters& params);

}  // namespace cce
