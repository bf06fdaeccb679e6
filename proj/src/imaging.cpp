#include "cce/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"

#include "cce/synth.hpp"

namespace cce {

std::uint8_t quantize_pixel(double value) {
    const double v = std::round((value - kPixelOffset) * kPixelScale);
    return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

double dequantize_pixel(std::uint8_t value) { return static_cast<double>(value) / kPixelScale + kPixelOffset; }

Image load_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw std::runtime_error("cannot read PNG '" + path.string() + "': " + img.message);
    }
    if ((img.format & PNG_FORMAT_FLAG_COLOR) == 0 || (img.format & PNG_FORMAT_FLAG_ALPHA) != 0) {
        png_image_free(&img);
        throw std::runtime_error("PNG '" + path.string() + "' is not an RGB image (grayscale and alpha are rejected)");
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        throw std::runtime_error("cannot decode PNG '" + path.string() + "': " + img.message);
    }
    Image out(Shape{3, img.height, img.width});
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = dequantize_pixel(buf[(y * img.width + x) * 3 + c]);
        }
    }
    return out;
}

void save_png(const Image& image, const std::filesystem::path& path) {
    if (image.channels() != 3) throw std::invalid_argument("save_png: expected 3 channels, got " + to_string(image.shape()));
    std::vector<std::uint8_t> buf(image.size());
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            for (std::size_t c = 0; c < 3; ++c) buf[(y * image.width() + x) * 3 + c] = quantize_pixel(image.at(c, y, x));
        }
    }
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
        throw std::runtime_error("cannot write PNG '" + path.string() + "': " + img.message);
    }
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

// Nothing with a destructor lives in this frame, so longjmp is safe.
void write_gray1(const png_byte* packed, std::size_t row_bytes, std::size_t width, std::size_t height, std::FILE* fp,
                 const char* name) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error(std::string("cannot allocate PNG writer for '") + name + "'");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error(std::string("cannot allocate PNG info for '") + name + "'");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error(std::string("libpng failed while writing '") + name + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 1, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < height; ++y) png_write_row(png, packed + y * row_bytes);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void save_mask_png(const Mask& mask, const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    const std::size_t row_bytes = (mask.width() + 7) / 8;
    std::vector<png_byte> packed(row_bytes * mask.height(), 0);
    for (std::size_t y = 0; y < mask.height(); ++y) {
        for (std::size_t x = 0; x < mask.width(); ++x) {
            if (mask.missing(y, x)) packed[y * row_bytes + x / 8] |= static_cast<png_byte>(0x80u >> (x % 8));
        }
    }
    const std::string name = path.string();
    write_gray1(packed.data(), row_bytes, mask.width(), mask.height(), fp.get(), name.c_str());
}

Mask load_mask_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw std::runtime_error("cannot read mask PNG '" + path.string() + "': " + img.message);
    }
    img.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        throw std::runtime_error("cannot decode mask PNG '" + path.string() + "': " + img.message);
    }
    Mask mask(img.height, img.width);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) mask.set(y, x, buf[y * img.width + x] > 127);
    }
    return mask;
}

Image hconcat(const std::vector<Image>& images) {
    if (images.empty()) throw std::invalid_argument("hconcat: no images");
    const Shape s = images.front().shape();
    for (const auto& im : images) {
        if (im.shape() != s) throw std::invalid_argument("hconcat: images differ in shape");
    }
    Image out(Shape{s.channels, s.height, s.width * images.size()});
    for (std::size_t i = 0; i < images.size(); ++i) {
        for (std::size_t c = 0; c < s.channels; ++c) {
            for (std::size_t y = 0; y < s.height; ++y) {
                for (std::size_t x = 0; x < s.width; ++x) out.at(c, y, i * s.width + x) = images[i].at(c, y, x);
            }
        }
    }
    return out;
}

std::vector<std::size_t> Dataset::indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (split[i] == which) out.push_back(i);
    }
    return out;
}

Dataset synth_dataset(std::size_t count, std::size_t size, std::uint64_t seed, std::size_t val_count) {
    if (count == 0) throw std::invalid_argument("synth_dataset: count must be at least 1");
    if (size < 4 || size % 2 != 0) {
        throw std::invalid_argument("synth_dataset: size must be even and at least 4, got " + std::to_string(size));
    }
    if (val_count >= count) throw std::invalid_argument("synth_dataset: val_count must leave at least one train image");
    Dataset ds;
    ds.seed = seed;
    ds.items.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        ds.items[i] = synth_sample(size, seed, i).image;
        ds.split.push_back(i + val_count >= count ? Split::val : Split::train);
        char name[32];
        std::snprintf(name, sizeof name, "img_%05zu.png", i);
        ds.names.emplace_back(name);
    }
    return ds;
}

std::vector<std::size_t> epoch_order(const Dataset& dataset, Split which, std::uint64_t seed, std::size_t epoch) {
    auto idx = dataset.indices(which);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(which)};
    std::mt19937_64 rng(seq);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

std::array<double, 3> dataset_mean_color(const Dataset& dataset) {
    const auto train = dataset.indices(Split::train);
    if (train.empty()) throw std::invalid_argument("dataset_mean_color: dataset has no train images");
    std::array<CompensatedSum, 3> sums;
    std::size_t pixels = 0;
    for (std::size_t i : train) {
        const Image& im = dataset.items[i];
        if (im.channels() != 3) throw std::invalid_argument("dataset_mean_color: expected RGB images");
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t k = 0; k < im.shape().plane(); ++k) sums[c].add(im[c * im.shape().plane() + k]);
        }
        pixels += im.shape().plane();
    }
    std::array<double, 3> mean{};
    for (std::size_t c = 0; c < 3; ++c) mean[c] = sums[c].value() / static_cast<double>(pixels);
    return mean;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "train");
    fs::create_directories(dir / "val");
    nlohmann::json manifest;
    manifest["format"] = "cce-dataset";
    manifest["version"] = 1;
    manifest["seed"] = dataset.seed;
    manifest["normalization"] = {{"scale", kPixelScale}, {"offset", kPixelOffset}};
    if (!dataset.items.empty()) manifest["size"] = dataset.items.front().height();
    auto& files = manifest["files"] = nlohmann::json::array();
    for (std::size_t i = 0; i < dataset.items.size(); ++i) {
        const std::string sub = dataset.split[i] == Split::train ? "train" : "val";
        const std::string rel = sub + "/" + dataset.names[i];
        save_png(dataset.items[i], dir / rel);
        files.push_back({{"path", rel}, {"split", sub}});
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("dataset manifest not found: " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed dataset manifest: " + std::string(e.what()));
    }
    const auto& norm = manifest.at("normalization");
    if (norm.at("scale").get<double>() != kPixelScale || norm.at("offset").get<double>() != kPixelOffset) {
        throw std::runtime_error("dataset uses a different pixel normalization");
    }
    Dataset ds;
    ds.seed = manifest.value("seed", std::uint64_t{0});
    for (const auto& f : manifest.at("files")) {
        const auto rel = f.at("path").get<std::string>();
        ds.items.push_back(load_png(dir / rel));
        ds.split.push_back(f.at("split").get<std::string>() == "val" ? Split::val : Split::train);
        ds.names.push_back(std::filesystem::path(rel).filename().string());
    }
    return ds;
}

}  // namespace cce
