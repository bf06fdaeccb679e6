#include "cce/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace cce {

namespace {

constexpr char kCepkMagic[4] = {'C', 'E', 'P', 'K'};
constexpr char kCcpkMagic[4] = {'C', 'C', 'P', 'K'};

class Writer {
public:
    void magic(const char (&m)[4]) { bytes_.insert(bytes_.end(), m, m + 4); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
    void text(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }
    Bytes take() { return std::move(bytes_); }

private:
    Bytes bytes_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    void expect_magic(const char (&m)[4]) {
        need(4);
        if (std::memcmp(bytes_.data() + pos_, m, 4) != 0) throw std::runtime_error(what_ + ": bad magic");
        pos_ += 4;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    double f64() { return std::bit_cast<double>(u64()); }
    Bytes raw(std::uint64_t n) {
        need(n);
        Bytes out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }
    std::string text() {
        const auto n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void finish() const {
        if (pos_ != bytes_.size()) throw std::runtime_error(what_ + ": trailing bytes");
    }

private:
    void need(std::uint64_t n) const {
        if (pos_ + n > bytes_.size()) throw std::runtime_error(what_ + ": truncated");
    }

    std::span<const std::uint8_t> bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

void write_spec(Writer& w, const NetworkSpec& spec) {
    w.u32(static_cast<std::uint32_t>(spec.input.channels));
    w.u32(static_cast<std::uint32_t>(spec.input.height));
    w.u32(static_cast<std::uint32_t>(spec.input.width));
    w.u32(spec.bottleneck ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(spec.bottleneck.value_or(0)));
    w.u32(static_cast<std::uint32_t>(spec.layers.size()));
    for (const auto& l : spec.layers) {
        w.u32(static_cast<std::uint32_t>(l.kind));
        w.u32(static_cast<std::uint32_t>(l.out_channels));
        w.u32(static_cast<std::uint32_t>(l.kernel));
        w.u32(static_cast<std::uint32_t>(l.stride));
        w.u32(static_cast<std::uint32_t>(l.padding));
        w.u32(static_cast<std::uint32_t>(l.out_features));
        w.f64(l.slope);
    }
}

NetworkSpec read_spec(Reader& r) {
    NetworkSpec spec;
    spec.input.channels = r.u32();
    spec.input.height = r.u32();
    spec.input.width = r.u32();
    const bool has_bottleneck = r.u32() != 0;
    const std::uint32_t bottleneck = r.u32();
    if (has_bottleneck) spec.bottleneck = bottleneck;
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        LayerSpec l;
        const auto kind = r.u32();
        if (kind > static_cast<std::uint32_t>(LayerKind::sigmoid)) {
            throw std::runtime_error("checkpoint: unknown layer kind " + std::to_string(kind));
        }
        l.kind = static_cast<LayerKind>(kind);
        l.out_channels = r.u32();
        l.kernel = r.u32();
        l.stride = r.u32();
        l.padding = r.u32();
        l.out_features = r.u32();
        l.slope = r.f64();
        spec.layers.push_back(l);
    }
    return spec;
}

}  // namespace

void round_to_float(Parameters& params) {
    for (auto& l : params.layers) {
        for (auto& w : l.weight) w = static_cast<double>(static_cast<float>(w));
        for (auto& b : l.bias) b = static_cast<double>(static_cast<float>(b));
    }
}

Bytes serialize_checkpoint(const Checkpoint& checkpoint) {
    const auto& model = checkpoint.model;
    validate_parameters(model.spec, model.params);
    Writer w;
    w.magic(kCepkMagic);
    w.u32(kCheckpointVersion);
    write_spec(w, model.spec);
    for (double f : model.fill) w.f64(f);
    w.u64(checkpoint.seed);
    w.text(checkpoint.config);
    for (const auto& l : model.params.layers) {
        w.u32(static_cast<std::uint32_t>(l.weight.size()));
        for (double v : l.weight) w.f32(v);
        w.u32(static_cast<std::uint32_t>(l.bias.size()));
        for (double v : l.bias) w.f32(v);
    }
    return w.take();
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "checkpoint");
    r.expect_magic(kCepkMagic);
    const auto version = r.u32();
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    Checkpoint cp;
    cp.model.spec = read_spec(r);
    for (auto& f : cp.model.fill) f = r.f64();
    cp.seed = r.u64();
    cp.config = r.text();
    cp.model.params.layers.resize(cp.model.spec.layers.size());
    for (auto& l : cp.model.params.layers) {
        l.weight.resize(r.u32());
        for (auto& v : l.weight) v = r.f32();
        l.bias.resize(r.u32());
        for (auto& v : l.bias) v = r.f32();
    }
    r.finish();
    try {
        validate_parameters(cp.model.spec, cp.model.params);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("checkpoint: inconsistent contents: ") + e.what());
    }
    cp.model.params.adam.first_moment = zero_gradients(cp.model.params);
    cp.model.params.adam.second_moment = zero_gradients(cp.model.params);
    return cp;
}

CascadeModel CascadeCheckpoint::model() const {
    CascadeModel m{parse_checkpoint(stage1).model, parse_checkpoint(stage2).model};
    m.validate();
    return m;
}

Bytes serialize_cascade(const CascadeCheckpoint& checkpoint) {
    Writer w;
    w.magic(kCcpkMagic);
    w.u32(kCheckpointVersion);
    w.text(checkpoint.manifest);
    w.u64(checkpoint.stage1.size());
    w.raw(checkpoint.stage1);
    w.u64(checkpoint.stage2.size());
    w.raw(checkpoint.stage2);
    return w.take();
}

CascadeCheckpoint parse_cascade(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "cascade checkpoint");
    r.expect_magic(kCcpkMagic);
    const auto version = r.u32();
    if (version != kCheckpointVersion) {
        throw std::runtime_error("cascade checkpoint: unsupported version " + std::to_string(version));
    }
    CascadeCheckpoint cp;
    cp.manifest = r.text();
    cp.stage1 = r.raw(r.u64());
    cp.stage2 = r.raw(r.u64());
    r.finish();
    return cp;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

LoadedModel load_model(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kCcpkMagic, 4) == 0) return parse_cascade(bytes).model();
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kCepkMagic, 4) == 0) return parse_checkpoint(bytes).model;
    throw std::runtime_error("'" + path.string() + "' is neither a CEPK nor a CCPK checkpoint");
}

std::size_t latent_dim(const LoadedModel& model) {
    if (const auto* single = std::get_if<ContextEncoder>(&model)) return single->spec.latent_dim();
    return std::get<CascadeModel>(model).stage2.spec.latent_dim();
}

}  // namespace cce
