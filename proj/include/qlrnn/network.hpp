#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qlrnn/cells.hpp"
#include "qlrnn/matrix.hpp"
#include "qlrnn/rng.hpp"

namespace qlrnn {

enum class Mode { train, eval };

struct InitRecord {
    std::uint64_t seed = 0;
    std::string scheme = "uniform_fanin_v1";
    bool forget_bias_one = false;
};

// Embedding -> one recurrent layer -> dropout -> linear head.
struct Model {
    ModelSpec spec;
    InitRecord init;
    Matrix embedding;  // vocab_size x d_emb
    CellParams cell;
    std::optional<SkipParams> skip;  // summary-variant block projection
    Matrix head_w;  // head_out x head_in
    Matrix head_b;  // head_out x 1
};

// Gradient storage mirroring Model's tensors (same enumeration order).
struct Gradients {
    Matrix embedding;
    CellParams cell;
    std::optional<SkipParams> skip;
    Matrix head_w, head_b;
};

Model make_model(const ModelSpec& spec, std::uint64_t init_seed, bool forget_bias_one = false);
Gradients zero_gradients(const Model& m);

// Visit every tensor in a fixed, documented order: embedding, cell tensors,
// skip projection, head. Checkpoints, optimizers, counting and clipping all
// share this enumeration.
void for_each_tensor(Model& m, const std::function<void(const std::string&, Matrix&)>& fn);
void for_each_tensor(const Model& m,
                     const std::function<void(const std::string&, const Matrix&)>& fn);
void for_each_tensor(Gradients& g, const std::function<void(const std::string&, Matrix&)>& fn);
void for_each_tensor(const Gradients& g,
                     const std::function<void(const std::string&, const Matrix&)>& fn);

std::size_t count_params(const Model& m);
double model_size_mb(std::size_t params, std::size_t bytes_per_param);

// Rough peak working-set estimate for one forward+backward at length L.
// Reported for orientation only; no accounting claim is attached to it.
std::size_t approx_peak_bytes(const Model& m, std::size_t L);

// Everything the backward pass needs from one sequence.
struct SequenceCache {
    std::vector<int> tokens;
    Mode mode = Mode::eval;
    std::vector<StepCache> steps;        // lstm/psug/ql family
    std::vector<GruStepCache> gru_steps; // gru
    std::vector<StepCache> bwd_steps;    // bilstm reverse direction
    std::vector<Matrix> outputs;         // emitted recurrent output per position
    Matrix readout;                      // head input before dropout
    Matrix dropout_mask;                 // scale mask applied to the head input
    std::vector<Matrix> lm_dropout_masks;
    std::vector<Matrix> lm_logits;       // per-position logits (lm task)
    Matrix logits;                       // classify logits
};

// Optional initial recurrent state (defaults to zeros). Exposed so decay
// experiments can differentiate the final cell state against c_0.
struct InitialState {
    Matrix h0, c0;  // empty -> zeros
};

// Runs the architecture-appropriate step loop over token_ids. Dropout fires
// only in train mode and draws from rng; eval mode is a pure function of
// (model, token_ids).
Matrix forward(const Model& m, const std::vector<int>& token_ids, Mode mode, Rng& rng,
               SequenceCache& cache, const InitialState& init = {});

// BPTT. dlogits matches the classify logits shape; for the lm task pass
// per-position gradients via dlogits_lm. Returns gradients for every tensor;
// per-step input gradients are appended to dx_out when provided.
void backward(const Model& m, const SequenceCache& cache, const Matrix& dlogits,
              Gradients& grads, const std::vector<Matrix>* dlogits_lm = nullptr,
              std::vector<Matrix>* dx_out = nullptr);

// Gradient norms by temporal distance from the loss (classification loss at
// the final position): dx_norm[d] = ||dLoss/dx_{T-d}||_2, and
// cell_ratio[d] = ||dc_T/dc_{T-d}||_F / ||dc_T/dc_T||_F via one exact
// reverse-mode pass per cell coordinate.
struct GradientFlowProfile {
    std::vector<double> dx_norm;     // indexed by distance 0..T-1
    std::vector<double> cell_ratio;  // indexed by distance 0..T-1
};

GradientFlowProfile gradient_flow_profile(const Model& m, const std::vector<int>& token_ids,
                                          int target);

// Gates clamped through biases only: all weights zero, b_f = logit(f_value),
// b_i = -50 (input gate shut), b_o = b_g = 0. Under this construction the
// cell chain contracts by exactly f_value per step.
void clamp_gates(Model& m, double f_value);
// Same clamp but with the input path left alive: input gate saturated open,
// candidate driven by x through random g-rows, W_p = identity.
void clamp_gates_live_input(Model& m, double f_value, Rng& rng);

// Per-step multiply-accumulate count of the cell's affine maps, and the
// amortized per-step cost of the block summary path.
struct StepCost {
    std::size_t cell_macs = 0;
    std::size_t skip_macs_amortized = 0;
};
StepCost analytic_step_cost(const ModelSpec& spec);

}  // namespace qlrnn
