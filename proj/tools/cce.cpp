// Command-line front end: gen-data, train, eval-nsd, inpaint, grad-check, mask-preview.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "cce/checkpoint.hpp"
#include "cce/config.hpp"
#include "cce/evaluation.hpp"
#include "cce/grad_suite.hpp"
#include "cce/imaging.hpp"
#include "cce/training.hpp"

using namespace cce;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kRuntime = 2, kThreshold = 3 };

// Flag values are collected as (key, value) pairs and applied after the config file.
struct Overrides {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<std::string> raw;  // --set key=value

    void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::string>(
            flag, [this, key](const std::string& v) { pairs.emplace_back(key, v); }, help + " [" + key + "]");
    }
    void bind_flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_flag_callback(flag, [this, key] { pairs.emplace_back(key, "true"); }, help + " [" + key + "]");
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c;
        if (!config_file.empty()) c.load_file(config_file);
        for (const auto& [k, v] : pairs) c.set(k, v);
        for (const auto& kv : raw) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            c.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        c.validate();
        return c;
    }
};

void add_common(CLI::App* app, Overrides& ov) {
    app->add_option("--config", ov.config_file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--set", ov.raw, "override any config key (key=value), repeatable");
    ov.bind(app, "--threads", "threads", "worker threads; 1 is bit-reproducible");
    ov.bind(app, "--out", "output", "output directory");
}

void add_data(CLI::App* app, Overrides& ov) {
    ov.bind(app, "--data", "data", "dataset directory written by gen-data");
    ov.bind(app, "--synth-count", "synth.count", "synthetic images when no --data");
    ov.bind(app, "--synth-size", "synth.size", "synthetic image size");
    ov.bind(app, "--synth-val", "synth.val", "synthetic validation images");
    ov.bind(app, "--synth-seed", "synth.seed", "synthetic dataset seed");
}

std::string stem_name(const fs::path& p) { return p.stem().string(); }

// Latent manifests are all called latents.txt; name them after their directory.
std::string source_name(const fs::path& p) {
    const fs::path abs = fs::absolute(p);
    if (p.stem() == "latents" && abs.has_parent_path()) return abs.parent_path().filename().string();
    return stem_name(p);
}

class ThresholdFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::mt19937_64 item_rng(std::uint64_t seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), 0xC11u};
    return std::mt19937_64(seq);
}

// ---------------------------------------------------------------- gen-data

int run_gen_data(const ExperimentConfig& cfg) {
    if (!cfg.data.empty()) throw ConfigError("gen-data writes a synthetic dataset; drop --data");
    const fs::path out = cfg.output_dir("gen-data");
    const Dataset ds = load_experiment_data(cfg);
    save_dataset(ds, out);
    write_resolved_config(cfg, out);
    std::printf("wrote %zu images (%zu train, %zu val) of %zux%zu to %s\n", ds.size(), ds.indices(Split::train).size(),
                ds.indices(Split::val).size(), cfg.synth_size, cfg.synth_size, out.string().c_str());
    return kOk;
}

// ---------------------------------------------------------------- train

bool has_stage(const ExperimentConfig& cfg, const char* s) {
    return std::find(cfg.stages.begin(), cfg.stages.end(), s) != cfg.stages.end();
}

int run_train(const ExperimentConfig& cfg) {
    const fs::path out = cfg.output_dir("train");
    fs::create_directories(out);
    write_resolved_config(cfg, out);
    const Dataset ds = load_experiment_data(cfg);
    // Checkpoints carry the config minus run-only fields, so bytes depend only on what shapes the weights.
    ExperimentConfig embedded = cfg;
    embedded.output.clear();
    embedded.threads = 1;
    embedded.stages.clear();
    embedded.stage1.clear();
    const std::string config_text = embedded.to_text();

    std::ofstream log(out / "train_log.jsonl");
    if (!log) throw std::runtime_error("cannot write " + (out / "train_log.jsonl").string());
    TrainOptions opts = cfg.train_options();
    opts.on_epoch = [&](const EpochRecord& r) {
        nlohmann::json j{{"stage", r.stage},         {"epoch", r.epoch},         {"rec_loss", r.rec_loss},
                         {"adv_loss", r.adv_loss},   {"disc_loss", r.disc_loss}, {"seconds", r.seconds}};
        log << j.dump() << "\n" << std::flush;
        std::printf("%s epoch %zu/%zu rec_loss=%.6f adv_loss=%.6f (%.1fs)\n", r.stage.c_str(), r.epoch + 1,
                    cfg.train.epochs, r.rec_loss, r.adv_loss, r.seconds);
        std::fflush(stdout);
    };
    const bool have_val = !ds.indices(Split::val).empty();

    Bytes stage1_bytes;
    ContextEncoder stage1;
    if (has_stage(cfg, "1")) {
        stage1 = train_stage1(ds, opts);
        stage1_bytes = serialize_checkpoint({stage1, cfg.seed, config_text});
        write_file(out / "stage1.cepk", stage1_bytes);
        std::printf("stage1 checkpoint %s (fnv1a64 %s)\n", (out / "stage1.cepk").string().c_str(),
                    hex64(fnv1a64(stage1_bytes)).c_str());
        if (have_val) {
            std::printf("stage1 held-out masked MSE: untrained %.6f, trained %.6f\n",
                        heldout_loss_stage1(untrained_stage1(ds, opts), ds, opts.masks, cfg.seed),
                        heldout_loss_stage1(stage1, ds, opts.masks, cfg.seed));
        }
    } else if (has_stage(cfg, "2")) {
        try {
            stage1_bytes = read_file(cfg.stage1);
            stage1 = parse_checkpoint(stage1_bytes).model;
        } catch (const std::exception& e) {
            throw std::runtime_error("stage-1 checkpoint '" + cfg.stage1 + "': " + e.what());
        }
    }

    if (has_stage(cfg, "2")) {
        const CascadeModel cascade = train_stage2(stage1, ds, opts);
        CascadeCheckpoint cc;
        cc.manifest = "stage1.resolution = " + std::to_string(cascade.stage1.resolution()) +
                      "\nstage2.resolution = " + std::to_string(cascade.stage2.resolution()) + "\n" + config_text;
        cc.stage1 = stage1_bytes;
        cc.stage2 = serialize_checkpoint({cascade.stage2, cfg.seed, config_text});
        const Bytes bytes = serialize_cascade(cc);
        write_file(out / "cascade.ccpk", bytes);
        std::printf("cascade checkpoint %s (embedded stage1 fnv1a64 %s)\n", (out / "cascade.ccpk").string().c_str(),
                    hex64(fnv1a64(cc.stage1)).c_str());
        if (have_val) {
            std::printf("cascade held-out masked MSE: untrained %.6f, trained %.6f\n",
                        heldout_loss(untrained_cascade(stage1, ds, opts), ds, opts.masks, cfg.seed),
                        heldout_loss(cascade, ds, opts.masks, cfg.seed));
        }
    }

    if (has_stage(cfg, "single")) {
        const ContextEncoder single = train_single(ds, opts);
        const Bytes bytes = serialize_checkpoint({single, cfg.seed, config_text});
        write_file(out / "single.cepk", bytes);
        std::printf("single checkpoint %s (fnv1a64 %s)\n", (out / "single.cepk").string().c_str(),
                    hex64(fnv1a64(bytes)).c_str());
        if (have_val) {
            std::printf("single held-out masked MSE: untrained %.6f, trained %.6f\n",
                        heldout_loss(untrained_single(ds, opts), ds, opts.masks, cfg.seed),
                        heldout_loss(single, ds, opts.masks, cfg.seed));
        }
    }
    return kOk;
}

// ---------------------------------------------------------------- eval-nsd

std::vector<std::string> model_names(const std::vector<std::string>& paths, std::vector<std::string> names) {
    if (!names.empty() && names.size() != paths.size()) {
        throw ConfigError("--names needs one name per checkpoint (" + std::to_string(paths.size()) + ")");
    }
    if (names.empty()) {
        std::map<std::string, int> seen;
        for (const auto& p : paths) {
            std::string n = source_name(p);
            if (seen[n]++) n += "_" + std::to_string(seen[n]);
            names.push_back(n);
        }
    }
    return names;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

int run_eval_nsd(const ExperimentConfig& cfg, const std::vector<std::string>& checkpoints,
                 const std::vector<std::string>& latent_manifests, const std::vector<std::string>& given_names) {
    if (checkpoints.empty() == latent_manifests.empty()) {
        throw ConfigError("eval-nsd needs either checkpoints or --from-latents manifests");
    }
    const auto& sources = checkpoints.empty() ? latent_manifests : checkpoints;
    const auto names = model_names(sources, given_names);
    const fs::path out = cfg.output_dir("eval-nsd");
    const EvalProtocol protocol = cfg.eval_protocol();

    std::vector<DistortionReport> reports;
    if (!latent_manifests.empty()) {
        std::size_t dim = 0;
        for (std::size_t m = 0; m < latent_manifests.size(); ++m) {
            auto sets = read_latent_manifest(latent_manifests[m]);
            const std::size_t d = sets.empty() ? 0 : sets.front().dim();
            if (m > 0 && d != dim) throw ConfigError("latent dimension differs across compared models");
            dim = d;
            reports.push_back(report_from_latents(std::move(sets), protocol));
        }
    } else {
        std::vector<LoadedModel> models;
        for (const auto& p : checkpoints) models.push_back(load_model(p));
        for (std::size_t m = 1; m < models.size(); ++m) {
            if (latent_dim(models[m]) != latent_dim(models[0])) {
                throw ConfigError("incompatible latent dimensions: " + names[0] + " has D=" +
                                  std::to_string(latent_dim(models[0])) + ", " + names[m] + " has D=" +
                                  std::to_string(latent_dim(models[m])));
            }
        }
        const Dataset ds = load_experiment_data(cfg);
        const EvalSelection selection = select_protocol(ds, protocol);
        for (std::size_t m = 0; m < models.size(); ++m) {
            const fs::path dir = out / names[m];
            fs::create_directories(dir / "latents");
            auto sets = collect_latents(model_encoder(models[m]), ds, selection, protocol.threads);
            std::vector<fs::path> dumps;
            for (const auto& s : sets) {
                dumps.push_back(dir / "latents" / (s.image_id() + ".ltnt"));
                write_latent_dump(s, dumps.back());
            }
            write_latent_manifest(dumps, dir / "latents.txt");
            reports.push_back(report_from_latents(std::move(sets), protocol));
        }
    }

    fs::create_directories(out);
    write_resolved_config(cfg, out);
    for (std::size_t m = 0; m < reports.size(); ++m) {
        const fs::path dir = out / names[m];
        fs::create_directories(dir);
        write_text(dir / "report.txt", format_report_text(names[m], reports[m]));
        write_text(dir / "records.jsonl", format_report_records(reports[m]));
        std::printf("%s: %s\n", names[m].c_str(), format_nsd(reports[m]).c_str());
    }
    const std::string table = format_comparison(names, reports);
    write_text(out / "comparison.txt", table);
    std::printf("\n%s", table.c_str());
    return kOk;
}

// ---------------------------------------------------------------- inpaint

int run_inpaint(const ExperimentConfig& cfg, const std::string& checkpoint, const std::vector<std::string>& images,
                std::size_t count, const std::string& mask_png) {
    const LoadedModel model = load_model(checkpoint);
    const std::size_t res = std::visit([](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, CascadeModel>) return m.stage2.resolution();
        else return m.resolution();
    }, model);

    std::vector<Image> inputs;
    std::vector<std::string> ids;
    if (!images.empty()) {
        for (const auto& p : images) {
            inputs.push_back(load_png(p));
            ids.push_back(stem_name(p));
        }
    } else {
        const Dataset ds = load_experiment_data(cfg);
        auto pool = ds.indices(Split::val);
        if (pool.empty()) pool = ds.indices(Split::train);
        for (std::size_t i = 0; i < std::min(count, pool.size()); ++i) {
            inputs.push_back(ds.items[pool[i]]);
            ids.push_back(image_id(ds, pool[i]));
        }
    }
    std::optional<Mask> fixed;
    if (!mask_png.empty()) fixed = load_mask_png(mask_png);

    const fs::path out = cfg.output_dir("inpaint");
    fs::create_directories(out);
    write_resolved_config(cfg, out);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Image& p = inputs[i];
        if (p.height() != res || p.width() != res) {
            throw std::runtime_error("image '" + ids[i] + "' is " + std::to_string(p.width()) + "x" +
                                     std::to_string(p.height()) + " but the model expects " + std::to_string(res) +
                                     "x" + std::to_string(res));
        }
        auto rng = item_rng(cfg.seed, i);
        const Mask m = fixed ? *fixed : make_mask(cfg.train_mask, res, res, rng);
        std::vector<Image> columns{p};
        if (const auto* single = std::get_if<ContextEncoder>(&model)) {
            columns.push_back(apply_mask(p, m, single->fill));
            const Image final_image = inpaint(*single, p, m);
            columns.push_back(final_image);
            columns.push_back(final_image);
        } else {
            const auto& cascade = std::get<CascadeModel>(model);
            columns.push_back(apply_mask(p, m, cascade.stage2.fill));
            columns.push_back(cascade_fill(cascade, p, m).stage2_input);
            columns.push_back(inpaint(cascade, p, m));
        }
        const fs::path file = out / (ids[i] + "_inpaint.png");
        save_png(hconcat(columns), file);
        std::printf("%s  mask coverage %.3f\n", file.string().c_str(), coverage(m));
    }
    return kOk;
}

// ---------------------------------------------------------------- grad-check

int run_grad_check(const ExperimentConfig& cfg, bool mutate, std::size_t resolution) {
    GradSuiteOptions opts;
    opts.mutate = mutate;
    opts.resolution = resolution;
    opts.seed = cfg.seed;
    const auto entries = run_grad_suite(opts);
    constexpr double kThresholdError = 1e-5;
    std::string report;
    double worst = 0.0;
    char line[256];
    for (const auto& e : entries) {
        std::size_t checked = 0, skipped = 0;
        for (const auto& l : e.report.layers) checked += l.checked, skipped += l.skipped;
        std::snprintf(line, sizeof line, "%-34s max_rel_err=%.3e checked=%zu skipped=%zu %s\n", e.component.c_str(),
                      e.report.max_relative_error, checked, skipped,
                      e.report.max_relative_error < kThresholdError ? "ok" : "FAIL");
        report += line;
        worst = std::max(worst, e.report.max_relative_error);
    }
    std::snprintf(line, sizeof line, "worst max_rel_err=%.3e (threshold %.0e)%s\n", worst, kThresholdError,
                  mutate ? " [mutated backward]" : "");
    report += line;
    std::fputs(report.c_str(), stdout);

    const fs::path out = cfg.output_dir("grad-check");
    fs::create_directories(out);
    write_resolved_config(cfg, out);
    write_text(out / "grad_check.txt", report);
    if (!(worst < kThresholdError)) throw ThresholdFailure("gradient check exceeded the error threshold");
    return kOk;
}

// ---------------------------------------------------------------- mask-preview

int run_mask_preview(const ExperimentConfig& cfg, std::size_t count, std::size_t size) {
    const fs::path out = cfg.output_dir("mask-preview");
    fs::create_directories(out);
    write_resolved_config(cfg, out);
    for (std::size_t i = 0; i < count; ++i) {
        auto rng = item_rng(cfg.seed, i);
        const Mask m = make_mask(cfg.train_mask, size, size, rng);
        char name[32];
        std::snprintf(name, sizeof name, "mask_%03zu.png", i);
        save_mask_png(m, out / name);
        std::printf("%s  coverage %.4f\n", (out / name).string().c_str(), coverage(m));
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Context encoder toolkit: training, cascade inpainting and the NSD metric"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cce 0.1.0");

    Overrides gen_ov, train_ov, eval_ov, inpaint_ov, grad_ov, mask_ov;

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset (PNGs + manifest)");
    add_common(gen, gen_ov);
    gen_ov.bind(gen, "--count", "synth.count", "number of images");
    gen_ov.bind(gen, "--size", "synth.size", "image side length (even)");
    gen_ov.bind(gen, "--val", "synth.val", "images in the validation split");
    gen_ov.bind(gen, "--seed", "synth.seed", "generator seed");

    auto* train = app.add_subcommand("train", "train stage 1, the cascade stage 2 and/or a single-stage CE");
    add_common(train, train_ov);
    add_data(train, train_ov);
    train_ov.bind(train, "--stages", "stages", "comma list of 1, 2, single");
    train_ov.bind(train, "--stage1", "stage1", "existing stage-1 checkpoint for --stages 2");
    train_ov.bind(train, "--epochs", "train.epochs", "epochs per stage");
    train_ov.bind(train, "--batch-size", "train.batch_size", "minibatch size");
    train_ov.bind(train, "--lr", "train.learning_rate", "Adam learning rate");
    train_ov.bind(train, "--latent-dim", "latent_dim", "bottleneck size D");
    train_ov.bind(train, "--mask", "train.mask", "central or random_blocks");
    train_ov.bind(train, "--seed", "seed", "training seed");
    train_ov.bind_flag(train, "--adversarial", "train.adversarial", "add the adversarial term");
    train_ov.bind(train, "--lambda-adv", "train.lambda_adv", "adversarial weight");

    auto* eval = app.add_subcommand("eval-nsd", "normalized squared-distortion of one or more checkpoints");
    add_common(eval, eval_ov);
    add_data(eval, eval_ov);
    std::vector<std::string> eval_checkpoints, eval_latents, eval_names;
    eval->add_option("checkpoints", eval_checkpoints, "CEPK or CCPK checkpoints")->check(CLI::ExistingFile);
    eval->add_option("--from-latents", eval_latents, "recompute from latent manifests instead")
        ->check(CLI::ExistingFile);
    eval->add_option("--names", eval_names, "display name per checkpoint (comma list or repeated)")->delimiter(',');
    eval_ov.bind(eval, "--masks", "eval.masks", "masks per image (n)");
    eval_ov.bind(eval, "--images", "eval.images", "images (k)");
    eval_ov.bind(eval, "--mask", "eval.mask", "central or random_blocks");
    eval_ov.bind(eval, "--seed", "eval.seed", "selection and mask seed");
    eval_ov.bind_flag(eval, "--standardize", "eval.standardize", "z-score latent dimensions first");

    auto* inp = app.add_subcommand("inpaint", "four-column PNGs: original | masked | coarse fill | final");
    add_common(inp, inpaint_ov);
    add_data(inp, inpaint_ov);
    std::string inp_checkpoint, inp_mask_png;
    std::vector<std::string> inp_images;
    std::size_t inp_count = 10;
    inp->add_option("checkpoint", inp_checkpoint, "CEPK or CCPK checkpoint")->required()->check(CLI::ExistingFile);
    inp->add_option("--images", inp_images, "PNG inputs (default: dataset validation images)")
        ->check(CLI::ExistingFile);
    inp->add_option("--count", inp_count, "dataset images to inpaint when no --images")->capture_default_str();
    inp->add_option("--mask-png", inp_mask_png, "use this mask for every image")->check(CLI::ExistingFile);
    inpaint_ov.bind(inp, "--mask", "train.mask", "central or random_blocks");
    inpaint_ov.bind(inp, "--seed", "seed", "mask seed");

    auto* grad = app.add_subcommand("grad-check", "finite-difference check of every layer and loss");
    add_common(grad, grad_ov);
    bool grad_mutate = false;
    std::size_t grad_res = 16;
    grad->add_flag("--mutate", grad_mutate, "negate one backward gradient (self-test; must fail)");
    grad->add_option("--resolution", grad_res, "model resolution for the loss checks")->capture_default_str();
    grad_ov.bind(grad, "--seed", "seed", "probe seed");

    auto* mp = app.add_subcommand("mask-preview", "write sample masks as PNGs");
    add_common(mp, mask_ov);
    std::size_t mp_count = 8, mp_size = 32;
    mp->add_option("--count", mp_count, "masks to draw")->capture_default_str();
    mp->add_option("--size", mp_size, "mask side length")->capture_default_str();
    mask_ov.bind(mp, "--mask", "train.mask", "central or random_blocks");
    mask_ov.bind(mp, "--max-coverage", "train.max_coverage", "random-blocks budget");
    mask_ov.bind(mp, "--seed", "seed", "mask seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (gen->parsed()) return run_gen_data(gen_ov.resolve());
        if (train->parsed()) return run_train(train_ov.resolve());
        if (eval->parsed()) return run_eval_nsd(eval_ov.resolve(), eval_checkpoints, eval_latents, eval_names);
        if (inp->parsed()) return run_inpaint(inpaint_ov.resolve(), inp_checkpoint, inp_images, inp_count, inp_mask_png);
        if (grad->parsed()) return run_grad_check(grad_ov.resolve(), grad_mutate, grad_res);
        if (mp->parsed()) return run_mask_preview(mask_ov.resolve(), mp_count, mp_size);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    } catch (const ThresholdFailure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kThreshold;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntime;
    }
    return kUsage;
}
