#pragma once

#include <string>
#include <vector>

#include "qlrnn/cells.hpp"
#include "qlrnn/training.hpp"

namespace qlrnn {

enum class DataSource { distant_token, adding, jsonl };

// Flat key = value run configuration. Unknown keys are rejected and every
// validation error names the offending key.
struct RunConfig {
    ModelSpec model;
    TrainConfig train;
    bool forget_bias_one = false;

    DataSource data = DataSource::distant_token;
    std::string data_path;        // jsonl source
    std::size_t n_examples = 0;   // synthetic generators
    std::size_t seq_len = 0;      // synthetic sequence length
    std::size_t gap = 0;          // distant_token marker offset from the end
    double split_ratio = 0.8;

    std::string out_dir = "out";
    std::vector<Arch> bench_archs;   // bench: architectures to time
    std::size_t bench_examples = 64;

    // gradflow options
    double clamp_forget = -1.0;      // > 0: clamp gates to this forget value
    std::string clamp_style = "dead";    // dead: input shut off; live: candidate driven by x
    bool analytic_column = false;    // emit the f^distance column
    std::string gradflow_norm = "cell";  // cell | input
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);

// Materialize the configured dataset (already split into train/val).
std::pair<std::vector<Example>, std::vector<Example>> load_dataset(const RunConfig& cfg);

}  // namespace qlrnn
