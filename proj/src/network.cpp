#include "cce/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cce {

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::conv_transpose: return "conv_transpose";
        case LayerKind::channelwise_fc: return "channelwise_fc";
        case LayerKind::linear: return "linear";
        case LayerKind::leaky_relu: return "leaky_relu";
        case LayerKind::relu: return "relu";
        case LayerKind::tanh: return "tanh";
        case LayerKind::sigmoid: return "sigmoid";
    }
    return "unknown";
}

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t padding) {
    LayerSpec l;
    l.kind = LayerKind::conv;
    l.out_channels = out_channels;
    l.kernel = kernel;
    l.stride = stride;
    l.padding = padding;
    return l;
}

LayerSpec LayerSpec::conv_transpose(std::size_t out_channels, std::size_t kernel, std::size_t stride,
                                    std::size_t padding) {
    LayerSpec l = conv(out_channels, kernel, stride, padding);
    l.kind = LayerKind::conv_transpose;
    return l;
}

LayerSpec LayerSpec::channelwise_fc() {
    LayerSpec l;
    l.kind = LayerKind::channelwise_fc;
    return l;
}

LayerSpec LayerSpec::linear(std::size_t out_features) {
    LayerSpec l;
    l.kind = LayerKind::linear;
    l.out_features = out_features;
    return l;
}

LayerSpec LayerSpec::activation(LayerKind kind, double slope) {
    LayerSpec l;
    l.kind = kind;
    l.slope = slope;
    return l;
}

bool LayerSpec::has_parameters() const {
    return kind == LayerKind::conv || kind == LayerKind::conv_transpose || kind == LayerKind::channelwise_fc ||
           kind == LayerKind::linear;
}

namespace {

Shape layer_output_shape(const LayerSpec& layer, const Shape& in, std::size_t index) {
    switch (layer.kind) {
        case LayerKind::conv: {
            if (layer.kernel == 0 || layer.stride == 0 || layer.out_channels == 0) {
                throw ShapeError(index, "conv needs positive kernel, stride and channels");
            }
            const std::size_t ph = in.height + 2 * layer.padding;
            const std::size_t pw = in.width + 2 * layer.padding;
            if (ph < layer.kernel || pw < layer.kernel) {
                throw ShapeError(index, "conv kernel " + std::to_string(layer.kernel) + " exceeds padded input " +
                                            to_string(in));
            }
            return {layer.out_channels, (ph - layer.kernel) / layer.stride + 1, (pw - layer.kernel) / layer.stride + 1};
        }
        case LayerKind::conv_transpose: {
            if (layer.kernel == 0 || layer.stride == 0 || layer.out_channels == 0) {
                throw ShapeError(index, "conv_transpose needs positive kernel, stride and channels");
            }
            const std::size_t fh = (in.height - 1) * layer.stride + layer.kernel;
            const std::size_t fw = (in.width - 1) * layer.stride + layer.kernel;
            if (fh <= 2 * layer.padding || fw <= 2 * layer.padding) {
                throw ShapeError(index, "conv_transpose padding removes the whole output of " + to_string(in));
            }
            return {layer.out_channels, fh - 2 * layer.padding, fw - 2 * layer.padding};
        }
        case LayerKind::linear:
            if (layer.out_features == 0) throw ShapeError(index, "linear needs positive out_features");
            return {layer.out_features, 1, 1};
        case LayerKind::channelwise_fc:
        case LayerKind::leaky_relu:
        case LayerKind::relu:
        case LayerKind::tanh:
        case LayerKind::sigmoid:
            return in;
    }
    throw ShapeError(index, "unknown layer kind");
}

}  // namespace

std::vector<Shape> NetworkSpec::shapes() const {
    if (input.size() == 0) throw ShapeError(0, "network input shape is empty");
    std::vector<Shape> out;
    out.reserve(layers.size() + 1);
    out.push_back(input);
    for (std::size_t i = 0; i < layers.size(); ++i) out.push_back(layer_output_shape(layers[i], out.back(), i));
    return out;
}

std::size_t NetworkSpec::latent_dim() const {
    if (!bottleneck || *bottleneck >= layers.size()) {
        throw std::invalid_argument("network has no bottleneck layer");
    }
    return shapes()[*bottleneck + 1].size();
}

NetworkSpec context_encoder_spec(std::size_t resolution, std::size_t latent_dim) {
    if (resolution < 4 || (resolution & (resolution - 1)) != 0) {
        throw std::invalid_argument("context encoder resolution must be a power of two >= 4, got " +
                                    std::to_string(resolution));
    }
    if (latent_dim == 0 || latent_dim % 4 != 0) {
        throw std::invalid_argument("context encoder latent_dim must be a positive multiple of 4, got " +
                                    std::to_string(latent_dim));
    }
    std::vector<std::size_t> channels;
    for (std::size_t side = resolution; side > 2; side /= 2) {
        channels.push_back(std::min<std::size_t>(16u << channels.size(), 64));
    }
    channels.back() = latent_dim / 4;

    NetworkSpec spec;
    spec.input = {3, resolution, resolution};
    for (std::size_t c : channels) {
        spec.layers.push_back(LayerSpec::conv(c, 4, 2, 1));
        spec.layers.push_back(LayerSpec::activation(LayerKind::leaky_relu, 0.2));
    }
    spec.bottleneck = spec.layers.size();
    spec.layers.push_back(LayerSpec::channelwise_fc());
    spec.layers.push_back(LayerSpec::activation(LayerKind::relu));
    for (std::size_t i = channels.size() - 1; i > 0; --i) {
        spec.layers.push_back(LayerSpec::conv_transpose(channels[i - 1], 4, 2, 1));
        spec.layers.push_back(LayerSpec::activation(LayerKind::relu));
    }
    spec.layers.push_back(LayerSpec::conv_transpose(3, 4, 2, 1));
    spec.layers.push_back(LayerSpec::activation(LayerKind::tanh));
    return spec;
}

NetworkSpec discriminator_spec(std::size_t resolution) {
    if (resolution < 8 || (resolution & (resolution - 1)) != 0) {
        throw std::invalid_argument("discriminator resolution must be a power of two >= 8, got " +
                                    std::to_string(resolution));
    }
    NetworkSpec spec;
    spec.input = {3, resolution, resolution};
    std::size_t c = 16;
    for (std::size_t side = resolution; side > 4; side /= 2) {
        spec.layers.push_back(LayerSpec::conv(c, 4, 2, 1));
        spec.layers.push_back(LayerSpec::activation(LayerKind::leaky_relu, 0.2));
        c = std::min<std::size_t>(c * 2, 64);
    }
    spec.layers.push_back(LayerSpec::linear(1));
    spec.layers.push_back(LayerSpec::activation(LayerKind::sigmoid));
    return spec;
}

std::pair<std::size_t, std::size_t> parameter_counts(const LayerSpec& layer, const Shape& in) {
    switch (layer.kind) {
        case LayerKind::conv:
        case LayerKind::conv_transpose:
            return {layer.out_channels * in.channels * layer.kernel * layer.kernel, layer.out_channels};
        case LayerKind::channelwise_fc:
            return {in.channels * in.plane() * in.plane(), 0};
        case LayerKind::linear:
            return {layer.out_features * in.size(), layer.out_features};
        default:
            return {0, 0};
    }
}

namespace {

double fan_in(const LayerSpec& layer, const Shape& in) {
    switch (layer.kind) {
        case LayerKind::conv: return static_cast<double>(in.channels * layer.kernel * layer.kernel);
        case LayerKind::conv_transpose:
            return std::max(1.0, static_cast<double>(in.channels * layer.kernel * layer.kernel) /
                                     static_cast<double>(layer.stride * layer.stride));
        case LayerKind::channelwise_fc: return static_cast<double>(in.plane());
        case LayerKind::linear: return static_cast<double>(in.size());
        default: return 1.0;
    }
}

}  // namespace

Parameters init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
    const auto shapes = spec.shapes();
    std::mt19937_64 rng(seed);
    Parameters params;
    params.layers.resize(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto [nw, nb] = parameter_counts(spec.layers[i], shapes[i]);
        const double bound = 1.0 / std::sqrt(fan_in(spec.layers[i], shapes[i]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        auto& lp = params.layers[i];
        lp.weight.resize(nw);
        lp.bias.resize(nb);
        for (auto& w : lp.weight) w = dist(rng);
        for (auto& b : lp.bias) b = dist(rng);
    }
    params.adam.first_moment = zero_gradients(params);
    params.adam.second_moment = zero_gradients(params);
    return params;
}

Gradients zero_gradients(const Parameters& params) {
    Gradients g(params.layers.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i].weight.assign(params.layers[i].weight.size(), 0.0);
        g[i].bias.assign(params.layers[i].bias.size(), 0.0);
    }
    return g;
}

void accumulate(Gradients& into, const Gradients& from, double factor) {
    if (into.size() != from.size()) throw std::invalid_argument("accumulate: gradient layer count mismatch");
    for (std::size_t i = 0; i < into.size(); ++i) {
        if (into[i].weight.size() != from[i].weight.size() || into[i].bias.size() != from[i].bias.size()) {
            throw std::invalid_argument("accumulate: gradient shape mismatch at layer " + std::to_string(i));
        }
        for (std::size_t k = 0; k < into[i].weight.size(); ++k) into[i].weight[k] += factor * from[i].weight[k];
        for (std::size_t k = 0; k < into[i].bias.size(); ++k) into[i].bias[k] += factor * from[i].bias[k];
    }
}

void scale(Gradients& grads, double factor) {
    for (auto& l : grads) {
        for (auto& w : l.weight) w *= factor;
        for (auto& b : l.bias) b *= factor;
    }
}

void validate_parameters(const NetworkSpec& spec, const Parameters& params) {
    const auto shapes = spec.shapes();
    if (params.layers.size() != spec.layers.size()) {
        throw std::invalid_argument("parameters have " + std::to_string(params.layers.size()) +
                                    " layers, network has " + std::to_string(spec.layers.size()));
    }
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto [nw, nb] = parameter_counts(spec.layers[i], shapes[i]);
        if (params.layers[i].weight.size() != nw || params.layers[i].bias.size() != nb) {
            throw ShapeError(i, "parameter arrays do not match layer " + to_string(spec.layers[i].kind));
        }
    }
}

namespace {

// Output index range [lo, hi) for which o * stride + k - pad lands inside [0, n).
std::pair<std::size_t, std::size_t> valid_outputs(std::size_t n_out, std::size_t n_in, std::size_t stride,
                                                  std::size_t k, std::size_t pad) {
    const auto s = static_cast<std::ptrdiff_t>(stride);
    const auto off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(pad);
    std::ptrdiff_t lo = 0;
    while (lo < static_cast<std::ptrdiff_t>(n_out) && lo * s + off < 0) ++lo;
    std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(n_out);
    while (hi > lo && (hi - 1) * s + off >= static_cast<std::ptrdiff_t>(n_in)) --hi;
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Patch matrix of a C x H x W image for a k x k, stride s, padding pad
// sampling grid of gh x gw positions: cols[(c * k + ky) * k + kx][gy * gw + gx]
// holds image[c][gy * s + ky - pad][gx * s + kx - pad], zero in the padding.
void im2col(const double* img, std::size_t c_n, std::size_t h, std::size_t w, std::size_t k, std::size_t s,
            std::size_t pad, std::size_t gh, std::size_t gw, double* cols) {
    const std::size_t np = gh * gw;
    std::fill(cols, cols + c_n * k * k * np, 0.0);
    for (std::size_t c = 0; c < c_n; ++c) {
        const double* plane = img + c * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
            const auto [y0, y1] = valid_outputs(gh, h, s, ky, pad);
            for (std::size_t kx = 0; kx < k; ++kx) {
                const auto [x0, x1] = valid_outputs(gw, w, s, kx, pad);
                double* row = cols + ((c * k + ky) * k + kx) * np;
                for (std::size_t gy = y0; gy < y1; ++gy) {
                    const double* src = plane + (gy * s + ky - pad) * w;
                    std::size_t ix = x0 * s + kx - pad;
                    for (std::size_t gx = x0; gx < x1; ++gx, ix += s) row[gy * gw + gx] = src[ix];
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates each patch entry back into its pixel.
void col2im(const double* cols, std::size_t c_n, std::size_t h, std::size_t w, std::size_t k, std::size_t s,
            std::size_t pad, std::size_t gh, std::size_t gw, double* img) {
    const std::size_t np = gh * gw;
    for (std::size_t c = 0; c < c_n; ++c) {
        double* plane = img + c * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
            const auto [y0, y1] = valid_outputs(gh, h, s, ky, pad);
            for (std::size_t kx = 0; kx < k; ++kx) {
                const auto [x0, x1] = valid_outputs(gw, w, s, kx, pad);
                const double* row = cols + ((c * k + ky) * k + kx) * np;
                for (std::size_t gy = y0; gy < y1; ++gy) {
                    double* dst = plane + (gy * s + ky - pad) * w;
                    std::size_t ix = x0 * s + kx - pad;
                    for (std::size_t gx = x0; gx < x1; ++gx, ix += s) dst[ix] += row[gy * gw + gx];
                }
            }
        }
    }
}

// Strided read-only matrix view; element (i, j) is p[i * rs + j * cs].
struct View {
    const double* p;
    std::size_t rs, cs;
    double operator()(std::size_t i, std::size_t j) const { return p[i * rs + j * cs]; }
    View t() const { return {p, cs, rs}; }
};

// C[m x n] (row-major) += A[m x kk] * B[kk x n]. The inner loop is an axpy
// over the longer output dimension so it vectorises without reassociation.
void gemm(std::size_t m, std::size_t n, std::size_t kk, View a, View b, double* c) {
    if (n < m) {
        std::vector<double> ct(n * m, 0.0);
        gemm(n, m, kk, b.t(), a.t(), ct.data());
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) c[i * n + j] += ct[j * m + i];
        return;
    }
    std::vector<double> packed;
    const double* bp = b.p;
    if (b.cs != 1 || b.rs != n) {
        packed.resize(kk * n);
        for (std::size_t q = 0; q < kk; ++q)
            for (std::size_t j = 0; j < n; ++j) packed[q * n + j] = b(q, j);
        bp = packed.data();
    }
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t q = 0; q < kk; ++q) {
            const double av = a(i, q);
            const double* bq = bp + q * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bq[j];
        }
    }
}

void conv_forward(const LayerSpec& l, const LayerParams& p, const Tensor& in, Tensor& out) {
    const std::size_t rows = in.channels() * l.kernel * l.kernel, np = out.shape().plane();
    std::vector<double> cols(rows * np);
    im2col(in.storage().data(), in.channels(), in.height(), in.width(), l.kernel, l.stride, l.padding, out.height(),
           out.width(), cols.data());
    double* o = out.storage().data();
    for (std::size_t oc = 0; oc < out.channels(); ++oc) std::fill(o + oc * np, o + (oc + 1) * np, p.bias[oc]);
    gemm(out.channels(), np, rows, {p.weight.data(), rows, 1}, {cols.data(), np, 1}, o);
}

void conv_backward(const LayerSpec& l, const LayerParams& p, const Tensor& in, const Tensor& gout,
                   LayerParams& gp, Tensor& gin) {
    const std::size_t rows = in.channels() * l.kernel * l.kernel, np = gout.shape().plane();
    const double* g = gout.storage().data();
    for (std::size_t oc = 0; oc < gout.channels(); ++oc) {
        double bsum = 0.0;
        for (std::size_t i = 0; i < np; ++i) bsum += g[oc * np + i];
        gp.bias[oc] += bsum;
    }
    std::vector<double> cols(rows * np);
    im2col(in.storage().data(), in.channels(), in.height(), in.width(), l.kernel, l.stride, l.padding, gout.height(),
           gout.width(), cols.data());
    gemm(gout.channels(), rows, np, {g, np, 1}, {cols.data(), 1, np}, gp.weight.data());
    std::fill(cols.begin(), cols.end(), 0.0);
    gemm(rows, np, gout.channels(), {p.weight.data(), 1, rows}, {g, np, 1}, cols.data());
    col2im(cols.data(), in.channels(), in.height(), in.width(), l.kernel, l.stride, l.padding, gout.height(),
           gout.width(), gin.storage().data());
}

// Transposed convolution: input pixel (iy, ix) scatters into output
// (iy * stride + ky - pad, ix * stride + kx - pad). Weight layout [in][out][k][k].
void conv_transpose_forward(const LayerSpec& l, const LayerParams& p, const Tensor& in, Tensor& out) {
    const std::size_t rows = out.channels() * l.kernel * l.kernel, np = in.shape().plane();
    const std::size_t op = out.shape().plane();
    double* o = out.storage().data();
    for (std::size_t oc = 0; oc < out.channels(); ++oc) std::fill(o + oc * op, o + (oc + 1) * op, p.bias[oc]);
    std::vector<double> cols(rows * np, 0.0);
    gemm(rows, np, in.channels(), {p.weight.data(), 1, rows}, {in.storage().data(), np, 1}, cols.data());
    col2im(cols.data(), out.channels(), out.height(), out.width(), l.kernel, l.stride, l.padding, in.height(),
           in.width(), o);
}

void conv_transpose_backward(const LayerSpec& l, const LayerParams& p, const Tensor& in, const Tensor& gout,
                             LayerParams& gp, Tensor& gin) {
    const std::size_t rows = gout.channels() * l.kernel * l.kernel, np = in.shape().plane();
    const std::size_t op = gout.shape().plane();
    const double* g = gout.storage().data();
    for (std::size_t oc = 0; oc < gout.channels(); ++oc) {
        double bsum = 0.0;
        for (std::size_t i = 0; i < op; ++i) bsum += g[oc * op + i];
        gp.bias[oc] += bsum;
    }
    std::vector<double> cols(rows * np);
    im2col(g, gout.channels(), gout.height(), gout.width(), l.kernel, l.stride, l.padding, in.height(), in.width(),
           cols.data());
    gemm(in.channels(), rows, np, {in.storage().data(), np, 1}, {cols.data(), 1, np}, gp.weight.data());
    gemm(in.channels(), np, rows, {p.weight.data(), rows, 1}, {cols.data(), np, 1}, gin.storage().data());
}

// Per channel c: out[c][q] = sum_p W[c][q][p] * in[c][p]; no cross-channel terms.
void channelwise_fc_forward(const LayerParams& p, const Tensor& in, Tensor& out) {
    const std::size_t hw = in.shape().plane();
    for (std::size_t c = 0; c < in.channels(); ++c) {
        const double* x = in.storage().data() + c * hw;
        double* o = out.storage().data() + c * hw;
        const double* w = p.weight.data() + c * hw * hw;
        for (std::size_t q = 0; q < hw; ++q) {
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += w[q * hw + i] * x[i];
            o[q] = acc;
        }
    }
}

void channelwise_fc_backward(const LayerParams& p, const Tensor& in, const Tensor& gout, LayerParams& gp,
                             Tensor& gin) {
    const std::size_t hw = in.shape().plane();
    for (std::size_t c = 0; c < in.channels(); ++c) {
        const double* x = in.storage().data() + c * hw;
        const double* g = gout.storage().data() + c * hw;
        double* gx = gin.storage().data() + c * hw;
        const double* w = p.weight.data() + c * hw * hw;
        double* gw = gp.weight.data() + c * hw * hw;
        for (std::size_t q = 0; q < hw; ++q) {
            for (std::size_t i = 0; i < hw; ++i) {
                gw[q * hw + i] += g[q] * x[i];
                gx[i] += w[q * hw + i] * g[q];
            }
        }
    }
}

void linear_forward(const LayerParams& p, const Tensor& in, Tensor& out) {
    const std::size_t n_in = in.size();
    for (std::size_t o = 0; o < out.size(); ++o) {
        double acc = p.bias[o];
        const double* w = p.weight.data() + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * in[i];
        out[o] = acc;
    }
}

void linear_backward(const LayerParams& p, const Tensor& in, const Tensor& gout, LayerParams& gp, Tensor& gin) {
    const std::size_t n_in = in.size();
    for (std::size_t o = 0; o < gout.size(); ++o) {
        gp.bias[o] += gout[o];
        const double* w = p.weight.data() + o * n_in;
        double* gw = gp.weight.data() + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) {
            gw[i] += gout[o] * in[i];
            gin[i] += w[i] * gout[o];
        }
    }
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

ForwardResult forward(const NetworkSpec& spec, const Parameters& params, const Tensor& input) {
    const auto shapes = spec.shapes();
    if (input.shape() != spec.input) {
        throw ShapeError(0, "input shape " + to_string(input.shape()) + " does not match network input " +
                                to_string(spec.input));
    }
    if (params.layers.size() != spec.layers.size()) {
        throw std::invalid_argument("forward: parameters do not match network layer count");
    }

    ForwardResult result;
    auto& acts = result.tape.activations;
    acts.reserve(spec.layers.size() + 1);
    acts.push_back(input);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& layer = spec.layers[i];
        const auto& in = acts.back();
        Tensor out(shapes[i + 1]);
        switch (layer.kind) {
            case LayerKind::conv: conv_forward(layer, params.layers[i], in, out); break;
            case LayerKind::conv_transpose: conv_transpose_forward(layer, params.layers[i], in, out); break;
            case LayerKind::channelwise_fc: channelwise_fc_forward(params.layers[i], in, out); break;
            case LayerKind::linear: linear_forward(params.layers[i], in, out); break;
            case LayerKind::leaky_relu:
                for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] > 0.0 ? in[k] : layer.slope * in[k];
                break;
            case LayerKind::relu:
                for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] > 0.0 ? in[k] : 0.0;
                break;
            case LayerKind::tanh:
                for (std::size_t k = 0; k < in.size(); ++k) out[k] = std::tanh(in[k]);
                break;
            case LayerKind::sigmoid:
                for (std::size_t k = 0; k < in.size(); ++k) out[k] = sigmoid(in[k]);
                break;
        }
        acts.push_back(std::move(out));
    }
    result.output = std::move(acts.back());
    acts.pop_back();
    result.tape.params_version = params.version;
    return result;
}

Tensor infer(const NetworkSpec& spec, const Parameters& params, const Tensor& input) {
    return forward(spec, params, input).output;
}

BackwardResult backward(const NetworkSpec& spec, const Parameters& params, const Tape& tape,
                        const Tensor& output_gradient) {
    const auto shapes = spec.shapes();
    if (tape.activations.size() != spec.layers.size()) {
        throw std::invalid_argument("backward: tape has " + std::to_string(tape.activations.size()) +
                                    " activations for " + std::to_string(spec.layers.size()) + " layers");
    }
    if (tape.params_version != params.version) {
        throw std::invalid_argument("backward: stale tape (recorded at parameter version " +
                                    std::to_string(tape.params_version) + ", parameters are at " +
                                    std::to_string(params.version) + ")");
    }
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (tape.activations[i].shape() != shapes[i]) throw ShapeError(i, "tape activation shape mismatch");
    }
    if (output_gradient.shape() != shapes.back()) {
        throw ShapeError(spec.layers.size() - 1, "output gradient shape " + to_string(output_gradient.shape()) +
                                                     " does not match network output " + to_string(shapes.back()));
    }

    BackwardResult result;
    result.params = zero_gradients(params);
    Tensor grad = output_gradient;
    for (std::size_t li = spec.layers.size(); li-- > 0;) {
        const auto& layer = spec.layers[li];
        const Tensor& in = tape.activations[li];
        Tensor gin(in.shape());
        switch (layer.kind) {
            case LayerKind::conv: conv_backward(layer, params.layers[li], in, grad, result.params[li], gin); break;
            case LayerKind::conv_transpose:
                conv_transpose_backward(layer, params.layers[li], in, grad, result.params[li], gin);
                break;
            case LayerKind::channelwise_fc:
                channelwise_fc_backward(params.layers[li], in, grad, result.params[li], gin);
                break;
            case LayerKind::linear: linear_backward(params.layers[li], in, grad, result.params[li], gin); break;
            case LayerKind::leaky_relu:
                for (std::size_t k = 0; k < in.size(); ++k) gin[k] = in[k] > 0.0 ? grad[k] : layer.slope * grad[k];
                break;
            case LayerKind::relu:
                for (std::size_t k = 0; k < in.size(); ++k) gin[k] = in[k] > 0.0 ? grad[k] : 0.0;
                break;
            case LayerKind::tanh:
                for (std::size_t k = 0; k < in.size(); ++k) {
                    const double t = std::tanh(in[k]);
                    gin[k] = grad[k] * (1.0 - t * t);
                }
                break;
            case LayerKind::sigmoid:
                for (std::size_t k = 0; k < in.size(); ++k) {
                    const double sg = sigmoid(in[k]);
                    gin[k] = grad[k] * sg * (1.0 - sg);
                }
                break;
        }
        grad = std::move(gin);
    }
    result.input = std::move(grad);
    return result;
}

LatentVector encode(const NetworkSpec& spec, const Parameters& params, const Tensor& masked_input) {
    if (!spec.bottleneck) throw std::invalid_argument("encode: network has no bottleneck layer");
    const std::size_t stop = *spec.bottleneck + 1;
    NetworkSpec head = spec;
    head.layers.resize(stop);
    head.bottleneck.reset();
    Parameters head_params;
    head_params.layers.assign(params.layers.begin(), params.layers.begin() + static_cast<std::ptrdiff_t>(stop));
    const Tensor latent = infer(head, head_params, masked_input);
    return latent.storage();
}

std::vector<std::uint8_t> activation_pattern(const NetworkSpec& spec, const Tape& tape) {
    std::vector<std::uint8_t> pattern;
    for (std::size_t i = 0; i < spec.layers.size() && i < tape.activations.size(); ++i) {
        const auto kind = spec.layers[i].kind;
        if (kind != LayerKind::relu && kind != LayerKind::leaky_relu) continue;
        for (double v : tape.activations[i].storage()) pattern.push_back(v > 0.0 ? 1 : 0);
    }
    return pattern;
}

}  // namespace cce
