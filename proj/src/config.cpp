#include "cce/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cce {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& expected) {
    throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) bad(key, v, "a non-negative integer");
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) bad(key, v, "a number");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    bad(key, v, "true or false");
}

std::vector<std::string> parse_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

struct Field {
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string& key, const std::string&)> put;
};

template <typename T>
Field uint_field(T ExperimentConfig::*m) {
    return {[m](const ExperimentConfig& c) { return fmt(static_cast<std::uint64_t>(c.*m)); },
            [m](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.*m = static_cast<T>(parse_uint(k, v));
            }};
}

// Field accessors addressed through a projection, for nested structs.
template <typename Get>
Field uint_at(Get get) {
    return {[get](const ExperimentConfig& c) {
                return fmt(static_cast<std::uint64_t>(get(const_cast<ExperimentConfig&>(c))));
            },
            [get](ExperimentConfig& c, const std::string& k, const std::string& v) {
                auto& ref = get(c);
                ref = static_cast<std::remove_reference_t<decltype(ref)>>(parse_uint(k, v));
            }};
}

template <typename Get>
Field double_at(Get get) {
    return {[get](const ExperimentConfig& c) { return fmt(get(const_cast<ExperimentConfig&>(c))); },
            [get](ExperimentConfig& c, const std::string& k, const std::string& v) { get(c) = parse_double(k, v); }};
}

template <typename Get>
Field bool_at(Get get) {
    return {[get](const ExperimentConfig& c) { return fmt(get(const_cast<ExperimentConfig&>(c))); },
            [get](ExperimentConfig& c, const std::string& k, const std::string& v) { get(c) = parse_bool(k, v); }};
}

template <typename Get>
Field mask_kind_at(Get get) {
    return {[get](const ExperimentConfig& c) { return to_string(get(const_cast<ExperimentConfig&>(c))); },
            [get](ExperimentConfig& c, const std::string& k, const std::string& v) {
                try {
                    get(c) = parse_mask_kind(v);
                } catch (const std::invalid_argument&) {
                    bad(k, v, "central or random_blocks");
                }
            }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table{
        {"data", {[](const ExperimentConfig& c) { return c.data; },
                  [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data = v; }}},
        {"synth.count", uint_field(&ExperimentConfig::synth_count)},
        {"synth.size", uint_field(&ExperimentConfig::synth_size)},
        {"synth.val", uint_field(&ExperimentConfig::synth_val)},
        {"synth.seed", uint_field(&ExperimentConfig::synth_seed)},
        {"normalization", {[](const ExperimentConfig&) { return std::string("x/127.5-1"); },
                           [](ExperimentConfig&, const std::string& k, const std::string& v) {
                               if (v != "x/127.5-1") bad(k, v, "x/127.5-1 (the only supported normalization)");
                           }}},
        {"latent_dim", uint_field(&ExperimentConfig::latent_dim)},
        {"stages", {[](const ExperimentConfig& c) { return join(c.stages); },
                    [](ExperimentConfig& c, const std::string&, const std::string& v) { c.stages = parse_list(v); }}},
        {"stage1", {[](const ExperimentConfig& c) { return c.stage1; },
                    [](ExperimentConfig& c, const std::string&, const std::string& v) { c.stage1 = v; }}},
        {"seed", uint_field(&ExperimentConfig::seed)},
        {"threads", uint_field(&ExperimentConfig::threads)},
        {"output", {[](const ExperimentConfig& c) { return c.output; },
                    [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output = v; }}},

        {"train.mask", mask_kind_at([](ExperimentConfig& c) -> MaskKind& { return c.train_mask.kind; })},
        {"train.mask_fraction", double_at([](ExperimentConfig& c) -> double& { return c.train_mask.fraction; })},
        {"train.max_coverage", double_at([](ExperimentConfig& c) -> double& { return c.train_mask.max_coverage; })},
        {"train.min_side", uint_at([](ExperimentConfig& c) -> std::size_t& { return c.train_mask.sides.min_side; })},
        {"train.max_side", uint_at([](ExperimentConfig& c) -> std::size_t& { return c.train_mask.sides.max_side; })},
        {"train.epochs", uint_at([](ExperimentConfig& c) -> std::size_t& { return c.train.epochs; })},
        {"train.batch_size", uint_at([](ExperimentConfig& c) -> std::size_t& { return c.train.batch_size; })},
        {"train.learning_rate", double_at([](ExperimentConfig& c) -> double& { return c.train.learning_rate; })},
        {"train.lambda_rec", double_at([](ExperimentConfig& c) -> double& { return c.train.lambda_rec; })},
        {"train.lambda_adv", double_at([](ExperimentConfig& c) -> double& { return c.train.lambda_adv; })},
        // Switching the adversarial term on without a weight picks the usual 0.001; switching it off clears it.
        {"train.adversarial",
         {[](const ExperimentConfig& c) { return fmt(c.train.adversarial_enabled); },
          [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.train.adversarial_enabled = parse_bool(k, v);
              if (!c.train.adversarial_enabled) c.train.lambda_adv = 0.0;
              else if (c.train.lambda_adv == 0.0) c.train.lambda_adv = TrainConfig::with_adversarial().lambda_adv;
          }}},

        {"eval.masks", uint_at([](ExperimentConfig& c) -> std::size_t& { return c.eval.masks; })},
        {"eval.images", uint_at([](ExperimentConfig& c) -> std::size_t& { return c.eval.images; })},
        {"eval.mask", mask_kind_at([](ExperimentConfig& c) -> MaskKind& { return c.eval.mask_config.kind; })},
        {"eval.mask_fraction", double_at([](ExperimentConfig& c) -> double& { return c.eval.mask_config.fraction; })},
        {"eval.max_coverage",
         double_at([](ExperimentConfig& c) -> double& { return c.eval.mask_config.max_coverage; })},
        {"eval.min_side", uint_at([](ExperimentConfig& c) -> std::size_t& { return c.eval.mask_config.sides.min_side; })},
        {"eval.max_side", uint_at([](ExperimentConfig& c) -> std::size_t& { return c.eval.mask_config.sides.max_side; })},
        {"eval.standardize", bool_at([](ExperimentConfig& c) -> bool& { return c.eval.standardize; })},
        {"eval.seed", uint_at([](ExperimentConfig& c) -> std::uint64_t& { return c.eval.seed; })},
    };
    return table;
}

const Field* find_field(const std::string& key) {
    for (const auto& [name, f] : fields()) {
        if (name == key) return &f;
    }
    return nullptr;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
    train.epochs = 50;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    const Field* f = find_field(trim(key));
    if (!f) throw ConfigError("unknown config key '" + trim(key) + "'");
    f->put(*this, trim(key), trim(value));
}

void ExperimentConfig::load_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
        }
        try {
            set(line.substr(0, eq), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void ExperimentConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    load_text(ss.str(), path.string());
}

std::string ExperimentConfig::to_text() const {
    std::string out;
    for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
    return out;
}

std::vector<std::string> ExperimentConfig::keys() {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (data.empty()) {
        if (synth_size < 4 || synth_size % 2 != 0) {
            fail("synth.size must be even and at least 4, got " + std::to_string(synth_size));
        }
        if (synth_count == 0) fail("synth.count must be at least 1");
        if (synth_val > synth_count) fail("synth.val cannot exceed synth.count");
    }
    if (latent_dim == 0 || latent_dim % 4 != 0) fail("latent_dim must be a positive multiple of 4");
    if (stages.empty()) fail("stages must list at least one of 1, 2, single");
    for (const auto& s : stages) {
        if (s != "1" && s != "2" && s != "single") fail("stages: unknown stage '" + s + "' (use 1, 2 or single)");
    }
    const bool has2 = std::count(stages.begin(), stages.end(), "2") > 0;
    const bool has1 = std::count(stages.begin(), stages.end(), "1") > 0;
    if (has2 && !has1 && stage1.empty()) fail("stages: stage 2 needs stage 1 in the same run or a stage1 checkpoint");
    if (threads == 0) fail("threads must be at least 1");
    try {
        train.validate();
        eval.validate();
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
    for (const MaskConfig* m : {&train_mask, &eval.mask_config}) {
        if (!(m->fraction > 0.0 && m->fraction <= 1.0)) fail("mask fraction must be in (0, 1]");
        if (!(m->max_coverage > 0.0 && m->max_coverage <= 1.0)) fail("mask max_coverage must be in (0, 1]");
        if (m->sides.min_side == 0 || m->sides.min_side > m->sides.max_side) {
            fail("mask sides need 1 <= min_side <= max_side");
        }
    }
}

TrainOptions ExperimentConfig::train_options() const {
    TrainOptions o;
    o.config = train;
    o.config.seed = seed;
    o.masks = train_mask;
    o.latent_dim = latent_dim;
    o.threads = threads;
    return o;
}

EvalProtocol ExperimentConfig::eval_protocol() const {
    EvalProtocol p = eval;
    p.threads = threads;
    return p;
}

std::filesystem::path ExperimentConfig::output_dir(const std::string& command) const {
    if (!output.empty()) return output;
    const char* root = std::getenv("CCE_OUTPUT_ROOT");
    return std::filesystem::path(root && *root ? root : "runs") / command;
}

Dataset load_experiment_data(const ExperimentConfig& config) {
    if (!config.data.empty()) return load_dataset(config.data);
    return synth_dataset(config.synth_count, config.synth_size, config.synth_seed, config.synth_val);
}

void write_resolved_config(const ExperimentConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "config.txt");
    if (!out) throw std::runtime_error("cannot write " + (dir / "config.txt").string());
    out << config.to_text();
}

}  // namespace cce
