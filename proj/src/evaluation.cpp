#include "cce/evaluation.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "cce/cascade.hpp"

namespace cce {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t& pos) {
    if (pos + 4 > b.size()) throw std::runtime_error("latent dump: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_latents(const LatentSet& set) {
    std::vector<std::uint8_t> out{'L', 'T', 'N', 'T'};
    put_u32(out, kLatentDumpVersion);
    put_u32(out, static_cast<std::uint32_t>(set.dim()));
    put_u32(out, static_cast<std::uint32_t>(set.count()));
    put_u32(out, static_cast<std::uint32_t>(set.image_id().size()));
    out.insert(out.end(), set.image_id().begin(), set.image_id().end());
    for (double v : set.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

LatentSet parse_latents(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "LTNT", 4) != 0) throw std::runtime_error("latent dump: bad magic");
    std::size_t pos = 4;
    const auto version = get_u32(bytes, pos);
    if (version != kLatentDumpVersion) throw std::runtime_error("latent dump: unsupported version " + std::to_string(version));
    const auto dim = get_u32(bytes, pos);
    const auto n = get_u32(bytes, pos);
    const auto id_len = get_u32(bytes, pos);
    if (pos + id_len > bytes.size()) throw std::runtime_error("latent dump: truncated image id");
    std::string id(reinterpret_cast<const char*>(bytes.data() + pos), id_len);
    pos += id_len;
    const std::size_t count = static_cast<std::size_t>(dim) * n;
    if (bytes.size() - pos != count * 4) throw std::runtime_error("latent dump '" + id + "': payload size mismatch");
    std::vector<double> values(count);
    for (auto& v : values) v = static_cast<double>(std::bit_cast<float>(get_u32(bytes, pos)));
    return LatentSet(std::move(id), dim, std::move(values));
}

void write_latent_dump(const LatentSet& set, const std::filesystem::path& path) {
    write_file(path, serialize_latents(set));
}

LatentSet read_latent_dump(const std::filesystem::path& path) { return parse_latents(read_file(path)); }

void write_latent_manifest(const std::vector<std::filesystem::path>& dumps, const std::filesystem::path& manifest) {
    std::ofstream out(manifest);
    if (!out) throw std::runtime_error("cannot write latent manifest '" + manifest.string() + "'");
    const auto base = manifest.parent_path();
    for (const auto& p : dumps) out << std::filesystem::proximate(p, base.empty() ? "." : base).generic_string() << "\n";
}

std::vector<LatentSet> read_latent_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw std::runtime_error("cannot read latent manifest '" + manifest.string() + "'");
    std::vector<LatentSet> sets;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::filesystem::path p(line);
        if (p.is_relative()) p = manifest.parent_path() / p;
        sets.push_back(read_latent_dump(p));
    }
    return sets;
}

void EvalProtocol::validate() const {
    if (masks < 2) throw std::invalid_argument("eval protocol: n (masks per image) must be at least 2");
    if (images < 1) throw std::invalid_argument("eval protocol: k (images) must be at least 1");
}

EvalSelection select_protocol(const Dataset& dataset, const EvalProtocol& protocol) {
    protocol.validate();
    if (dataset.items.empty()) throw std::invalid_argument("eval: dataset is empty");
    auto pool = dataset.indices(Split::val);
    if (pool.size() < protocol.images) {
        pool.resize(dataset.items.size());
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(protocol.seed), static_cast<std::uint32_t>(protocol.seed >> 32), 0x5E1Eu};
    std::mt19937_64 rng(seq);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(pool.size(), protocol.images));
    std::sort(pool.begin(), pool.end());

    EvalSelection sel;
    sel.images = std::move(pool);
    const auto& first = dataset.items[sel.images.front()];
    for (std::size_t i = 0; i < protocol.masks; ++i) {
        sel.masks.push_back(make_mask(protocol.mask_config, first.height(), first.width(), rng));
    }
    return sel;
}

LatentEncoder model_encoder(const LoadedModel& model) {
    return std::visit(
        [](const auto& m) -> LatentEncoder {
            return [&m](const Image& image, const Mask& mask, std::size_t, std::size_t) {
                return encode_latent(m, image, mask);
            };
        },
        model);
}

std::string image_id(const Dataset& dataset, std::size_t index) {
    if (index < dataset.names.size()) return std::filesystem::path(dataset.names[index]).stem().string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "img_%05zu", index);
    return buf;
}

std::vector<LatentSet> collect_latents(const LatentEncoder& encoder, const Dataset& dataset,
                                       const EvalSelection& selection, unsigned threads) {
    std::vector<LatentSet> sets(selection.images.size());
    parallel_for(selection.images.size(), threads, [&](std::size_t j) {
        const std::size_t idx = selection.images[j];
        const Image& image = dataset.items[idx];
        std::vector<double> values;
        std::size_t dim = 0;
        for (std::size_t i = 0; i < selection.masks.size(); ++i) {
            LatentVector z = encoder(image, selection.masks[i], idx, i);
            if (i == 0) dim = z.size();
            if (z.size() != dim || dim == 0) throw std::runtime_error("eval: encoder returned inconsistent latent sizes");
            for (double v : z) values.push_back(static_cast<double>(static_cast<float>(v)));
        }
        sets[j] = LatentSet(image_id(dataset, idx), dim, std::move(values));
    });
    return sets;
}

DistortionReport report_from_latents(std::vector<LatentSet> sets, const EvalProtocol& protocol) {
    if (sets.empty()) throw std::invalid_argument("eval: no latent sets");
    if (protocol.standardize) sets = standardize_latents(sets).sets;
    auto report = nsd_estimate(sets, sets.front().dim(), protocol.threads);
    report.standardized = protocol.standardize;
    report.mask_strategy = to_string(protocol.mask_config.kind);
    return report;
}

DistortionReport evaluate_nsd(const LatentEncoder& encoder, const Dataset& dataset, const EvalProtocol& protocol) {
    const auto selection = select_protocol(dataset, protocol);
    return report_from_latents(collect_latents(encoder, dataset, selection, protocol.threads), protocol);
}

std::string format_nsd(const DistortionReport& r) {
    // Raw latents of small networks can sit far below 1; keep them visible.
    const char* pattern = (r.nsd_mean == 0.0 || r.nsd_mean >= 1e-3)
                              ? "nsd = %.4f ± %.4f (D=%zu, n=%zu, k=%zu, masks=%s, standardized=%s)"
                              : "nsd = %.3e ± %.3e (D=%zu, n=%zu, k=%zu, masks=%s, standardized=%s)";
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, r.nsd_mean, r.nsd_std, r.dim, r.masks, r.images,
                  r.mask_strategy.empty() ? "unknown" : r.mask_strategy.c_str(), r.standardized ? "yes" : "no");
    return buf;
}

std::string format_report_text(const std::string& model_name, const DistortionReport& r) {
    std::ostringstream out;
    out << "# model: " << model_name << "\n";
    out << "# ± is the sample standard deviation (k-1) of per-image NSD over the k images\n";
    out << format_nsd(r) << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", r.dataset_dist2);
    out << "dataset_dist2 = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", r.nsd_mean);
    out << "nsd_mean = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", r.nsd_std);
    out << "nsd_std = " << buf << "\n";
    return out.str();
}

std::string format_report_records(const DistortionReport& r) {
    std::ostringstream out;
    for (std::size_t j = 0; j < r.per_image_dist2.size(); ++j) {
        nlohmann::json rec;
        rec["image_id"] = j < r.image_ids.size() ? r.image_ids[j] : std::to_string(j);
        rec["dist2"] = r.per_image_dist2[j];
        rec["nsd"] = r.per_image_nsd(j);
        out << rec.dump() << "\n";
    }
    return out.str();
}

std::string format_comparison(const std::vector<std::string>& names, const std::vector<DistortionReport>& reports) {
    std::size_t width = 5;
    for (const auto& n : names) width = std::max(width, n.size());
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s  %10s  %10s  %6s  %5s  %5s\n", static_cast<int>(width), "model", "nsd_mean",
                  "nsd_std", "D", "n", "k");
    out << buf;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        std::snprintf(buf, sizeof buf, "%-*s  %10.4g  %10.4g  %6zu  %5zu  %5zu\n", static_cast<int>(width),
                      names[i].c_str(), r.nsd_mean, r.nsd_std, r.dim, r.masks, r.images);
        out << buf;
    }
    return out.str();
}

}  // namespace cce
