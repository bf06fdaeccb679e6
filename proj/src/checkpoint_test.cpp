#include "doctest.h"

#include <filesystem>
#include <stdexcept>

#include "cce/checkpoint.hpp"

using namespace cce;
namespace fs = std::filesystem;

namespace {

Checkpoint sample_checkpoint(std::size_t res, std::uint64_t seed) {
    Checkpoint cp;
    cp.model.spec = context_encoder_spec(res, 64);
    cp.model.params = init_parameters(cp.model.spec, seed);
    round_to_float(cp.model.params);
    cp.model.fill = {0.25, -0.5, 0.125};
    cp.seed = seed;
    cp.config = "resolution = " + std::to_string(res) + "\nseed = " + std::to_string(seed) + "\n";
    return cp;
}

}  // namespace

TEST_CASE("single checkpoint round trip is exact") {
    const Checkpoint cp = sample_checkpoint(16, 4);
    const Bytes bytes = serialize_checkpoint(cp);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CEPK");
    const Checkpoint back = parse_checkpoint(bytes);
    CHECK(back.model.spec == cp.model.spec);
    CHECK(back.model.params.layers == cp.model.params.layers);
    CHECK(back.model.fill == cp.model.fill);
    CHECK(back.seed == 4);
    CHECK(back.config == cp.config);
    CHECK(serialize_checkpoint(back) == bytes);
    CHECK(back.model.spec.latent_dim() == 64);
}

TEST_CASE("round_to_float is idempotent and matches a reload") {
    Checkpoint cp;
    cp.model.spec = context_encoder_spec(16, 64);
    cp.model.params = init_parameters(cp.model.spec, 8);
    const Checkpoint reloaded = parse_checkpoint(serialize_checkpoint(cp));
    round_to_float(cp.model.params);
    CHECK(cp.model.params.layers == reloaded.model.params.layers);
    auto again = cp.model.params;
    round_to_float(again);
    CHECK(again.layers == cp.model.params.layers);
}

TEST_CASE("corrupt single checkpoints are rejected") {
    const Bytes bytes = serialize_checkpoint(sample_checkpoint(16, 1));
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
        CHECK_THROWS_AS(parse_checkpoint(std::span(bytes).first(cut)), std::runtime_error);
    }
    Bytes bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(parse_checkpoint(bad), std::runtime_error);
    Bytes version = bytes;
    version[4] = 99;
    CHECK_THROWS_AS(parse_checkpoint(version), std::runtime_error);
    Bytes trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(parse_checkpoint(trailing), std::runtime_error);
}

TEST_CASE("cascade container embeds stage bytes verbatim") {
    CascadeCheckpoint cc;
    cc.manifest = "stage1 = 8\nstage2 = 16\n";
    cc.stage1 = serialize_checkpoint(sample_checkpoint(8, 2));
    cc.stage2 = serialize_checkpoint(sample_checkpoint(16, 3));
    const Bytes bytes = serialize_cascade(cc);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CCPK");
    const CascadeCheckpoint back = parse_cascade(bytes);
    CHECK(back.manifest == cc.manifest);
    CHECK(back.stage1 == cc.stage1);
    CHECK(back.stage2 == cc.stage2);
    const CascadeModel m = back.model();
    CHECK(m.stage1.resolution() == 8);
    CHECK(m.stage2.resolution() == 16);

    CHECK_THROWS_AS(parse_cascade(std::span(bytes).first(bytes.size() - 7)), std::runtime_error);
    CascadeCheckpoint mismatched = cc;
    mismatched.stage1 = serialize_checkpoint(sample_checkpoint(16, 2));
    CHECK_THROWS_AS(mismatched.model(), std::invalid_argument);
}

TEST_CASE("load_model dispatches on magic") {
    const fs::path dir = fs::temp_directory_path() / "cce_checkpoint_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file(dir / "single.cepk", serialize_checkpoint(sample_checkpoint(16, 5)));
    CascadeCheckpoint cc{"m", serialize_checkpoint(sample_checkpoint(8, 6)), serialize_checkpoint(sample_checkpoint(16, 7))};
    write_file(dir / "cascade.ccpk", serialize_cascade(cc));
    const Bytes junk{'J', 'U', 'N', 'K', 0, 0};
    write_file(dir / "junk.bin", junk);

    const LoadedModel single = load_model(dir / "single.cepk");
    CHECK(std::holds_alternative<ContextEncoder>(single));
    CHECK(latent_dim(single) == 64);
    const LoadedModel cascade = load_model(dir / "cascade.ccpk");
    CHECK(std::holds_alternative<CascadeModel>(cascade));
    CHECK(latent_dim(cascade) == 64);
    CHECK_THROWS_AS(load_model(dir / "junk.bin"), std::runtime_error);
    CHECK_THROWS_AS(load_model(dir / "absent.cepk"), std::runtime_error);
}
