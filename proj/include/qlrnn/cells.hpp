#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "qlrnn/matrix.hpp"
#include "qlrnn/rng.hpp"

namespace qlrnn {

enum class Arch { lstm, gru, bilstm, ql_full, psug_only, hgr_only };
enum class Pooling { mean, max, mean_max };
enum class SkipVariant { summary, carry };
enum class Task { classify, lm };
enum class Readout { last, mean };

const char* to_string(Arch a);
const char* to_string(Pooling p);
const char* to_string(SkipVariant v);
const char* to_string(Task t);
const char* to_string(Readout r);
Arch arch_from_string(const std::string& s);
Pooling pooling_from_string(const std::string& s);
SkipVariant skip_variant_from_string(const std::string& s);
Task task_from_string(const std::string& s);
Readout readout_from_string(const std::string& s);

// Architecture plus every hyperparameter needed to derive tensor shapes.
struct ModelSpec {
    Arch arch = Arch::lstm;
    std::size_t d_emb = 0;
    std::size_t d_h = 0;
    std::size_t K = 1;  // leap interval: block skips fire when t % K == 0
    Pooling pooling = Pooling::mean;
    SkipVariant skip_variant = SkipVariant::summary;
    std::size_t vocab_size = 0;
    std::size_t n_classes = 2;
    double dropout = 0.0;
    Task task = Task::classify;
    Readout readout = Readout::last;
    bool flush_partial = false;  // pool a trailing partial block at sequence end

    bool has_skip_machinery() const { return arch == Arch::ql_full || arch == Arch::hgr_only; }
    bool has_skip_params() const {
        return has_skip_machinery() && skip_variant == SkipVariant::summary;
    }
    // Pooled vector length fed to the block projection.
    std::size_t pooled_dim() const { return pooling == Pooling::mean_max ? 2 * d_h : d_h; }
    std::size_t head_in_dim() const { return arch == Arch::bilstm ? 2 * d_h : d_h; }
    std::size_t head_out_dim() const { return task == Task::classify ? n_classes : vocab_size; }

    void validate() const;  // throws ConfigError naming the offending field
};

// ---------------------------------------------------------------------------
// Per-cell parameter bundles. Weight shapes follow the convention
// W[d_h x d_x] acting on column vectors: pre = W*x + U*h_prev + b.
// ---------------------------------------------------------------------------

struct LstmParams {
    Matrix W_i, W_f, W_o, W_g;  // d_h x d_x
    Matrix U_i, U_f, U_o, U_g;  // d_h x d_h
    Matrix b_i, b_f, b_o, b_g;  // d_h x 1
};

// Unified gating: one stacked transform produces all four gate
// pre-activations; the 4*d_h rows are ordered (i, f, o, g).
struct PsugParams {
    Matrix W;  // 4*d_h x d_x
    Matrix U;  // 4*d_h x d_h
    Matrix b;  // 4*d_h x 1, concatenation [b_i; b_f; b_o; b_g]
};

struct GruParams {
    Matrix W_z, W_r, W_h;  // d_h x d_x
    Matrix U_z, U_r, U_h;  // d_h x d_h
    Matrix b_z, b_r, b_h;  // d_h x 1
};

struct BiLstmParams {
    LstmParams fwd, bwd;
};

// Block-summary projection: s_k = W_p * pool(H_k) + b_p.
struct SkipParams {
    Matrix W_p;  // d_h x p   (p = d_h, or 2*d_h for mean_max pooling)
    Matrix b_p;  // d_h x 1
};

using CellParams = std::variant<LstmParams, GruParams, PsugParams, BiLstmParams>;

LstmParams make_lstm_params(std::size_t d_h, std::size_t d_x);
GruParams make_gru_params(std::size_t d_h, std::size_t d_x);
PsugParams make_psug_params(std::size_t d_h, std::size_t d_x);
SkipParams make_skip_params(std::size_t d_h, std::size_t p);

// Stack per-gate matrices into the unified form. The stacked parameters
// reproduce the per-gate cell's trajectories bit-exactly.
PsugParams stack_lstm_params(const LstmParams& p);

// ---------------------------------------------------------------------------
// Single-step forward computations
// ---------------------------------------------------------------------------

struct GateActs {
    Matrix i, f, o, g;  // i,f,o in (0,1); g in (-1,1)
};

// Shared pre-activation helper: (W*x + U*h) + b, in exactly that
// association order for both the per-gate and the stacked path.
Matrix affine_gate_pre(const Matrix& W, const Matrix& U, const Matrix& b, const Matrix& x,
                       const Matrix& h_prev);

// z = W*x + U*h + b, split into four d_h blocks in order (i, f, o, g);
// sigmoid on the first three, tanh on the last.
GateActs psug_gates(const PsugParams& p, const Matrix& x_t, const Matrix& h_prev);
GateActs lstm_gates(const LstmParams& p, const Matrix& x_t, const Matrix& h_prev);

// What the backward pass needs from one step. x/h_prev/c_prev are stored by
// value; at desk scale cache size is irrelevant next to correctness.
struct StepCache {
    Matrix x, h_prev, c_prev;
    GateActs gates;
    Matrix c_pre;  // f.c_prev + i.g, before any skip
    Matrix h_pre;  // o.tanh(c_pre), the value appended to the block buffer
    // summary-variant boundary bookkeeping
    bool boundary = false;
    std::size_t block_rows = 0;  // rows pooled (== K except for a partial flush)
    Matrix H_k;                  // block_rows x d_h, buffered hidden states
    Matrix pooled, s_k, c_post;
    // carry-variant bookkeeping
    Matrix c_star;
};

struct GruStepCache {
    Matrix x, h_prev;
    Matrix z, r, h_tilde;
};

// Classical four-gate step. Returns (h_t, c_t) and fills the cache.
void lstm_step(const LstmParams& p, const Matrix& x_t, const Matrix& h_prev, const Matrix& c_prev,
               Matrix& h_t, Matrix& c_t, StepCache& cache);

// Standard GRU step: z and r gates, candidate with reset applied to h_prev.
void gru_step(const GruParams& p, const Matrix& x_t, const Matrix& h_prev, Matrix& h_t,
              GruStepCache& cache);

// Column-wise pool over the rows of H_k (one buffered hidden state per row).
// mean_max concatenates [mean; max].
Matrix pool_block(const Matrix& H_k, Pooling method);
Matrix block_summary(const SkipParams& sp, const Matrix& pooled);

// Per-sequence recurrent state for the leap-interval variants.
struct QLState {
    Matrix h, c;                      // d_h x 1
    Matrix C_L;                       // d_h x 1 long-term carry, zero at t == 0
    std::vector<Matrix> block_buffer; // < K entries between boundaries
    std::size_t t = 0;                // steps processed so far

    static QLState initial(std::size_t d_h);
};

// One step of the summary variant: gated update, buffer append, and at block
// boundaries pool -> project -> add to the cell state -> refresh h.
// Advances st in place and fills cache; st.h is the emitted hidden state.
void ql_step_summary(const PsugParams& p, const SkipParams& sp, QLState& st, const Matrix& x_t,
                     std::size_t K, Pooling pooling, StepCache& cache);
// Same loop driven by per-gate parameters (block machinery without unified gating).
void ql_step_summary_pergate(const LstmParams& p, const SkipParams& sp, QLState& st,
                             const Matrix& x_t, std::size_t K, Pooling pooling, StepCache& cache);

// One step of the carry variant: the carried cell state is the plain gated
// update; at boundaries the long-term state is folded into c* and replaced by
// it, and h is computed from c*. No pooling or projection.
void ql_step_carry(const PsugParams& p, QLState& st, const Matrix& x_t, std::size_t K,
                   StepCache& cache);
void ql_step_carry_pergate(const LstmParams& p, QLState& st, const Matrix& x_t, std::size_t K,
                           StepCache& cache);

// Pool a trailing partial block at sequence end (flush_partial). No-op when
// the buffer is empty. Only meaningful for the summary variant.
void ql_flush_partial(const SkipParams& sp, QLState& st, Pooling pooling, StepCache& last_cache);

// Two independent direction passes; output at t is [h_fwd(t); h_bwd(t)] with
// the backward pass re-aligned to original positions.
std::vector<Matrix> bilstm_forward(const LstmParams& fwd, const LstmParams& bwd,
                                   const std::vector<Matrix>& xs);

// ---------------------------------------------------------------------------
// Single-step backward computations (used by the BPTT driver)
// ---------------------------------------------------------------------------

// Given gradients w.r.t. the four gate activations, push through the
// nonlinearities and the affine transform, accumulating parameter gradients
// and returning gradients w.r.t. x_t and h_prev.
void gates_backward(const PsugParams& p, PsugParams& grads, const StepCache& c, const Matrix& di,
                    const Matrix& df, const Matrix& do_, const Matrix& dg, Matrix& dx,
                    Matrix& dh_prev);
void gates_backward(const LstmParams& p, LstmParams& grads, const StepCache& c, const Matrix& di,
                    const Matrix& df, const Matrix& do_, const Matrix& dg, Matrix& dx,
                    Matrix& dh_prev);

void gru_step_backward(const GruParams& p, GruParams& grads, const GruStepCache& c,
                       const Matrix& dh, Matrix& dx, Matrix& dh_prev);

// Scatter d(pooled) back onto the pooled rows. Max pooling routes each
// column's gradient to the first row attaining the maximum.
Matrix pool_block_backward(const Matrix& H_k, Pooling method, const Matrix& dpooled);

// ---------------------------------------------------------------------------
// Parameter counting
// ---------------------------------------------------------------------------

struct CellParamCount {
    std::size_t enumerated = 0;   // sum of tensor sizes, tensor by tensor
    std::size_t closed_form = 0;  // 4(nm+n^2+n) LSTM, 3(nm+n^2+n) GRU, ...
};

// Scalar parameter count of the recurrent cell (plus skip projection when the
// spec has one). Throws if the enumeration and the closed form ever disagree.
CellParamCount count_cell_params(const ModelSpec& spec);

}  // namespace qlrnn
