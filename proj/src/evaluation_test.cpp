#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "cce/evaluation.hpp"
#include "cce/training.hpp"

using namespace cce;
namespace fs = std::filesystem;

namespace {

LatentEncoder constant_encoder(std::size_t dim) {
    return [dim](const Image&, const Mask&, std::size_t, std::size_t) { return LatentVector(dim, 0.37); };
}

// Fresh N(0, 1) draws per (image, mask) pair; scale and shift are undone by standardisation.
LatentEncoder noise_encoder(std::size_t dim) {
    return [dim](const Image&, const Mask&, std::size_t image, std::size_t mask) {
        std::seed_seq seq{static_cast<std::uint32_t>(image), static_cast<std::uint32_t>(mask), 0xA5u};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> n(0.0, 1.0);
        LatentVector v(dim);
        for (std::size_t d = 0; d < dim; ++d) v[d] = 3.0 * n(rng) + 0.5 * static_cast<double>(d);
        return v;
    };
}

EvalProtocol small_protocol(std::size_t n, std::size_t k) {
    EvalProtocol p;
    p.masks = n;
    p.images = k;
    p.mask_config.sides = {2, 6};
    return p;
}

}  // namespace

TEST_CASE("latent dumps round trip") {
    const fs::path dir = fs::temp_directory_path() / "cce_evaluation_test";
    fs::remove_all(dir);
    fs::create_directories(dir / "dumps");
    LatentSet a("img_a", 3, {1.5, -2.0, 0.25, 4.0, 5.0, 6.0});
    LatentSet b("img_b", 3, {0.0, 0.0, 1.0});
    CHECK(parse_latents(serialize_latents(a)).values() == a.values());
    write_latent_dump(a, dir / "dumps" / "a.ltnt");
    write_latent_dump(b, dir / "dumps" / "b.ltnt");
    const LatentSet back = read_latent_dump(dir / "dumps" / "a.ltnt");
    CHECK(back.image_id() == "img_a");
    CHECK(back.dim() == 3);
    CHECK(back.count() == 2);
    CHECK(back.values() == a.values());

    write_latent_manifest({dir / "dumps" / "a.ltnt", dir / "dumps" / "b.ltnt"}, dir / "list.txt");
    const auto sets = read_latent_manifest(dir / "list.txt");
    REQUIRE(sets.size() == 2);
    CHECK(sets[1].image_id() == "img_b");

    auto bytes = serialize_latents(a);
    bytes.pop_back();
    CHECK_THROWS_AS(parse_latents(bytes), std::runtime_error);
    bytes = serialize_latents(a);
    bytes[1] = 'X';
    CHECK_THROWS_AS(parse_latents(bytes), std::runtime_error);
}

TEST_CASE("protocol selection") {
    const Dataset ds = synth_dataset(40, 16, 2, 10);
    const auto p = small_protocol(5, 8);
    const auto sel = select_protocol(ds, p);
    CHECK(sel.images.size() == 8);
    CHECK(sel.masks.size() == 5);
    for (std::size_t i : sel.images) CHECK(ds.split[i] == Split::val);
    CHECK(std::is_sorted(sel.images.begin(), sel.images.end()));
    CHECK(select_protocol(ds, p).masks == sel.masks);

    // Not enough validation images: draw from the whole set, clamped to its size.
    const auto all = select_protocol(ds, small_protocol(5, 100));
    CHECK(all.images.size() == 40);

    CHECK_THROWS_AS(small_protocol(1, 8).validate(), std::invalid_argument);
    CHECK_THROWS_AS(small_protocol(5, 0).validate(), std::invalid_argument);
}

TEST_CASE("constant encoder scores exactly zero") {
    const Dataset ds = synth_dataset(30, 16, 3, 20);
    const auto r = evaluate_nsd(constant_encoder(16), ds, small_protocol(10, 20));
    CHECK(r.nsd_mean == 0.0);
    CHECK(r.nsd_std == 0.0);
    CHECK(r.dataset_dist2 == 0.0);
    CHECK(r.images == 20);
    CHECK(r.masks == 10);
    CHECK(r.dim == 16);
}

TEST_CASE("independent standardized noise scores one") {
    const Dataset ds = synth_dataset(60, 16, 4, 50);
    auto p = small_protocol(100, 50);
    p.standardize = true;
    const auto r = evaluate_nsd(noise_encoder(64), ds, p);
    CHECK(r.standardized);
    CHECK(r.nsd_mean == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("evaluation is reproducible and thread independent") {
    const Dataset ds = synth_dataset(24, 16, 5, 12);
    TrainOptions o;
    o.latent_dim = 32;
    const LoadedModel model = untrained_single(ds, o);
    auto p = small_protocol(6, 12);
    const auto a = evaluate_nsd(model_encoder(model), ds, p);
    const auto b = evaluate_nsd(model_encoder(model), ds, p);
    p.threads = 4;
    const auto c = evaluate_nsd(model_encoder(model), ds, p);
    CHECK(a.per_image_dist2 == b.per_image_dist2);
    CHECK(a.per_image_dist2 == c.per_image_dist2);
    CHECK(format_report_text("m", a) == format_report_text("m", c));
    CHECK(format_report_records(a) == format_report_records(c));
    CHECK(a.dim == 32);
    CHECK(a.nsd_mean > 0.0);

    // Recomputing from the f32 latents gives the identical report.
    const auto sel = select_protocol(ds, p);
    const auto sets = collect_latents(model_encoder(model), ds, sel, 1);
    CHECK(report_from_latents(sets, p).per_image_dist2 == a.per_image_dist2);
    for (const auto& s : sets) CHECK(parse_latents(serialize_latents(s)).values() == s.values());
}

TEST_CASE("mismatched latent dimensions are rejected") {
    std::vector<LatentSet> sets{LatentSet("a", 2, {0, 1, 2, 3}), LatentSet("b", 3, {0, 1, 2, 3, 4, 5})};
    CHECK_THROWS_AS(report_from_latents(sets, small_protocol(2, 2)), std::invalid_argument);
}

TEST_CASE("report formatting") {
    DistortionReport r;
    r.image_ids = {"x", "y"};
    r.per_image_dist2 = {1.0, 3.0};
    r.dim = 2;
    r.masks = 4;
    r.images = 2;
    r.nsd_mean = 0.5;
    r.nsd_std = 0.3535533905932738;
    r.mask_strategy = "random_blocks";
    CHECK(format_nsd(r) == "nsd = 0.5000 ± 0.3536 (D=2, n=4, k=2, masks=random_blocks, standardized=no)");
    const std::string records = format_report_records(r);
    CHECK(records.find("\"image_id\":\"y\"") != std::string::npos);
    CHECK(std::count(records.begin(), records.end(), '\n') == 2);
    const std::string table = format_comparison({"cascade", "single"}, {r, r});
    CHECK(table.find("cascade") != std::string::npos);
    CHECK(table.find("single") != std::string::npos);
}
