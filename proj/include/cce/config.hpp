#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cce/evaluation.hpp"
#include "cce/losses.hpp"
#include "cce/mask.hpp"
#include "cce/training.hpp"

namespace cce {

// Bad key, malformed value or violated invariant in an experiment config.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Flat, typed experiment settings. Text form is one "key = value" per line;
// '#' starts a comment and lists are comma separated.
struct ExperimentConfig {
    // Dataset directory; empty means generate synthetic data in memory.
    std::string data;
    std::size_t synth_count = 576;
    std::size_t synth_size = 32;
    std::size_t synth_val = 64;
    std::uint64_t synth_seed = 1;

    std::size_t latent_dim = 256;
    std::vector<std::string> stages{"1", "2"};  // any of "1", "2", "single"
    std::string stage1;                         // existing stage-1 checkpoint for stage 2

    MaskConfig train_mask;  // central quarter by default
    TrainConfig train;

    EvalProtocol eval;

    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::string output;  // empty: $CCE_OUTPUT_ROOT/<command>, or runs/<command>

    ExperimentConfig();

    // Throws ConfigError naming the key.
    void set(const std::string& key, const std::string& value);
    void load_file(const std::filesystem::path& path);
    void load_text(const std::string& text, const std::string& origin = "config");

    // Every key with its resolved value, in a stable order.
    std::string to_text() const;
    static std::vector<std::string> keys();

    void validate() const;

    // Options handed to the trainers and the evaluator; seeds are folded in.
    TrainOptions train_options() const;
    EvalProtocol eval_protocol() const;

    std::filesystem::path output_dir(const std::string& command) const;
};

// Loads `data` if set, otherwise builds the synthetic dataset.
Dataset load_experiment_data(const ExperimentConfig& config);

// Writes config.txt into `dir`, creating it if needed.
void write_resolved_config(const ExperimentConfig& config, const std::filesystem::path& dir);

}  // namespace cce
