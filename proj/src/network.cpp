#include "qlrnn/network.hpp"

#include <cmath>
#include <cstring>

#include "qlrnn/errors.hpp"

namespace qlrnn {

namespace {

bool is_bias_name(const std::string& name) {
    auto pos = name.rfind('.');
    std::string last = pos == std::string::npos ? name : name.substr(pos + 1);
    return !last.empty() && last[0] == 'b';
}

template <class LstmT, class FN>
void visit_lstm(const char* prefix, LstmT& p, FN&& fn) {
    std::string pre(prefix);
    fn(pre + "W_i", p.W_i);
    fn(pre + "U_i", p.U_i);
    fn(pre + "b_i", p.b_i);
    fn(pre + "W_f", p.W_f);
    fn(pre + "U_f", p.U_f);
    fn(pre + "b_f", p.b_f);
    fn(pre + "W_o", p.W_o);
    fn(pre + "U_o", p.U_o);
    fn(pre + "b_o", p.b_o);
    fn(pre + "W_g", p.W_g);
    fn(pre + "U_g", p.U_g);
    fn(pre + "b_g", p.b_g);
}

// Shared tensor enumeration for Model and Gradients. The order here is the
// checkpoint order; the skip projection comes last so that models differing
// only in the skip machinery draw identical values for every shared tensor
// from the same init seed.
template <class EmbT, class CellT, class SkipT, class HeadT, class FN>
void visit_tensors(EmbT& embedding, CellT& cell, SkipT& skip, HeadT& head_w, HeadT& head_b,
                   FN&& fn) {
    fn("embedding", embedding);
    std::visit(
        [&](auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, LstmParams>) {
                visit_lstm("cell.", c, fn);
            } else if constexpr (std::is_same_v<T, GruParams>) {
                fn("cell.W_z", c.W_z);
                fn("cell.U_z", c.U_z);
                fn("cell.b_z", c.b_z);
                fn("cell.W_r", c.W_r);
                fn("cell.U_r", c.U_r);
                fn("cell.b_r", c.b_r);
                fn("cell.W_h", c.W_h);
                fn("cell.U_h", c.U_h);
                fn("cell.b_h", c.b_h);
            } else if constexpr (std::is_same_v<T, PsugParams>) {
                fn("cell.W", c.W);
                fn("cell.U", c.U);
                fn("cell.b", c.b);
            } else {
                visit_lstm("cell.fwd.", c.fwd, fn);
                visit_lstm("cell.bwd.", c.bwd, fn);
            }
        },
        cell);
    fn("head.w", head_w);
    fn("head.b", head_b);
    if (skip.has_value()) {
        fn("skip.W_p", skip->W_p);
        fn("skip.b_p", skip->b_p);
    }
}

CellParams make_cell(const ModelSpec& spec) {
    switch (spec.arch) {
        case Arch::lstm: return make_lstm_params(spec.d_h, spec.d_emb);
        case Arch::gru: return make_gru_params(spec.d_h, spec.d_emb);
        case Arch::bilstm:
            return BiLstmParams{make_lstm_params(spec.d_h, spec.d_emb),
                                make_lstm_params(spec.d_h, spec.d_emb)};
        case Arch::ql_full:
        case Arch::psug_only: return make_psug_params(spec.d_h, spec.d_emb);
        case Arch::hgr_only: return make_lstm_params(spec.d_h, spec.d_emb);
    }
    throw ConfigError("make_cell: bad arch");
}

enum class SkipMode { none, summary, carry };

SkipMode skip_mode(const ModelSpec& spec) {
    if (!spec.has_skip_machinery()) return SkipMode::none;
    return spec.skip_variant == SkipVariant::summary ? SkipMode::summary : SkipMode::carry;
}

Matrix embed_token(const Model& m, int id) {
    if (id < 0 || static_cast<std::size_t>(id) >= m.spec.vocab_size)
        throw DataError("token id " + std::to_string(id) + " out of range for vocab " +
                        std::to_string(m.spec.vocab_size));
    Matrix x(m.spec.d_emb, 1);
    for (std::size_t j = 0; j < m.spec.d_emb; ++j) x.data[j] = m.embedding(id, j);
    return x;
}

Matrix draw_dropout_mask(std::size_t n, double p, Rng& rng) {
    Matrix mask(n, 1);
    const double keep = 1.0 - p;
    for (std::size_t i = 0; i < n; ++i) mask.data[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
    return mask;
}

}  // namespace

Model make_model(const ModelSpec& spec, std::uint64_t init_seed, bool forget_bias_one) {
    spec.validate();
    Model m;
    m.spec = spec;
    m.init.seed = init_seed;
    m.init.forget_bias_one = forget_bias_one;
    m.embedding = Matrix(spec.vocab_size, spec.d_emb);
    m.cell = make_cell(spec);
    if (spec.has_skip_params()) m.skip = make_skip_params(spec.d_h, spec.pooled_dim());
    m.head_w = Matrix(spec.head_out_dim(), spec.head_in_dim());
    m.head_b = Matrix(spec.head_out_dim(), 1);

    Rng rng(init_seed);
    const double emb_bound = 1.0 / std::sqrt(static_cast<double>(spec.d_emb));
    const double cell_bound = 1.0 / std::sqrt(static_cast<double>(spec.d_h));
    const double head_bound = 1.0 / std::sqrt(static_cast<double>(spec.head_in_dim()));
    for_each_tensor(m, [&](const std::string& name, Matrix& t) {
        if (is_bias_name(name)) return;  // biases start at zero
        double bound = cell_bound;
        if (name == "embedding") bound = emb_bound;
        if (name == "head.w") bound = head_bound;
        for (double& v : t.data) v = rng.uniform(-bound, bound);
    });
    if (forget_bias_one) {
        std::visit(
            [&](auto& c) {
                using T = std::decay_t<decltype(c)>;
                if constexpr (std::is_same_v<T, LstmParams>) {
                    c.b_f.fill(1.0);
                } else if constexpr (std::is_same_v<T, PsugParams>) {
                    for (std::size_t k = spec.d_h; k < 2 * spec.d_h; ++k) c.b.data[k] = 1.0;
                } else if constexpr (std::is_same_v<T, BiLstmParams>) {
                    c.fwd.b_f.fill(1.0);
                    c.bwd.b_f.fill(1.0);
                }
            },
            m.cell);
    }
    return m;
}

Gradients zero_gradients(const Model& m) {
    Gradients g;
    g.embedding = Matrix(m.embedding.rows, m.embedding.cols);
    g.cell = make_cell(m.spec);
    if (m.skip) g.skip = make_skip_params(m.spec.d_h, m.spec.pooled_dim());
    g.head_w = Matrix(m.head_w.rows, m.head_w.cols);
    g.head_b = Matrix(m.head_b.rows, m.head_b.cols);
    return g;
}

void for_each_tensor(Model& m, const std::function<void(const std::string&, Matrix&)>& fn) {
    visit_tensors(m.embedding, m.cell, m.skip, m.head_w, m.head_b,
                  [&](const std::string& n, Matrix& t) { fn(n, t); });
}
void for_each_tensor(const Model& m,
                     const std::function<void(const std::string&, const Matrix&)>& fn) {
    visit_tensors(m.embedding, m.cell, m.skip, m.head_w, m.head_b,
                  [&](const std::string& n, const Matrix& t) { fn(n, t); });
}
void for_each_tensor(Gradients& g, const std::function<void(const std::string&, Matrix&)>& fn) {
    visit_tensors(g.embedding, g.cell, g.skip, g.head_w, g.head_b,
                  [&](const std::string& n, Matrix& t) { fn(n, t); });
}
void for_each_tensor(const Gradients& g,
                     const std::function<void(const std::string&, const Matrix&)>& fn) {
    visit_tensors(g.embedding, g.cell, g.skip, g.head_w, g.head_b,
                  [&](const std::string& n, const Matrix& t) { fn(n, t); });
}

std::size_t count_params(const Model& m) {
    std::size_t n = 0;
    for_each_tensor(m, [&](const std::string&, const Matrix& t) { n += t.size(); });
    return n;
}

double model_size_mb(std::size_t params, std::size_t bytes_per_param) {
    return static_cast<double>(bytes_per_param) * static_cast<double>(params) / (1024.0 * 1024.0);
}

std::size_t approx_peak_bytes(const Model& m, std::size_t L) {
    const std::size_t d_h = m.spec.d_h, d_e = m.spec.d_emb;
    // params + grads + two optimizer moments, plus the step caches.
    std::size_t per_step = d_e + 10 * d_h;
    std::size_t boundary_extra = 0;
    if (m.spec.has_skip_params())
        boundary_extra = (m.spec.K * d_h + 3 * d_h + m.spec.pooled_dim()) * (L / m.spec.K + 1);
    return 8 * (4 * count_params(m) + per_step * L + boundary_extra);
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

Matrix forward(const Model& m, const std::vector<int>& token_ids, Mode mode, Rng& rng,
               SequenceCache& cache, const InitialState& init) {
    if (token_ids.empty()) throw DataError("forward: empty sequence");
    const ModelSpec& spec = m.spec;
    const std::size_t L = token_ids.size(), d_h = spec.d_h;
    cache = SequenceCache{};
    cache.tokens = token_ids;
    cache.mode = mode;
    cache.outputs.resize(L);

    const SkipMode smode = skip_mode(spec);
    if (spec.arch == Arch::gru) {
        cache.gru_steps.resize(L);
        Matrix h = init.h0.empty() ? Matrix(d_h, 1) : init.h0;
        const GruParams& p = std::get<GruParams>(m.cell);
        for (std::size_t t = 0; t < L; ++t) {
            Matrix x = embed_token(m, token_ids[t]);
            Matrix hn;
            gru_step(p, x, h, hn, cache.gru_steps[t]);
            h = hn;
            cache.outputs[t] = h;
        }
    } else if (spec.arch == Arch::bilstm) {
        const BiLstmParams& p = std::get<BiLstmParams>(m.cell);
        cache.steps.resize(L);
        cache.bwd_steps.resize(L);
        std::vector<Matrix> hf(L), hb(L);
        Matrix h(d_h, 1), c(d_h, 1), hn, cn;
        for (std::size_t t = 0; t < L; ++t) {
            Matrix x = embed_token(m, token_ids[t]);
            lstm_step(p.fwd, x, h, c, hn, cn, cache.steps[t]);
            h = hn;
            c = cn;
            hf[t] = h;
        }
        h.fill(0.0);
        c.fill(0.0);
        for (std::size_t j = 0; j < L; ++j) {  // execution order: positions L-1..0
            const std::size_t t = L - 1 - j;
            Matrix x = embed_token(m, token_ids[t]);
            lstm_step(p.bwd, x, h, c, hn, cn, cache.bwd_steps[j]);
            h = hn;
            c = cn;
            hb[t] = h;
        }
        for (std::size_t t = 0; t < L; ++t) cache.outputs[t] = vcat({&hf[t], &hb[t]});
    } else {
        cache.steps.resize(L);
        QLState st = QLState::initial(d_h);
        if (!init.h0.empty()) st.h = init.h0;
        if (!init.c0.empty()) st.c = init.c0;
        for (std::size_t t = 0; t < L; ++t) {
            Matrix x = embed_token(m, token_ids[t]);
            switch (smode) {
                case SkipMode::none: {
                    // plain gated step, no block machinery
                    Matrix hn, cn;
                    if (spec.arch == Arch::lstm)
                        lstm_step(std::get<LstmParams>(m.cell), x, st.h, st.c, hn, cn,
                                  cache.steps[t]);
                    else {
                        const PsugParams& p = std::get<PsugParams>(m.cell);
                        GateActs a = psug_gates(p, x, st.h);
                        cache.steps[t].x = x;
                        cache.steps[t].h_prev = st.h;
                        cache.steps[t].c_prev = st.c;
                        cache.steps[t].gates = a;
                        cache.steps[t].c_pre = hadamard(a.f, st.c) + hadamard(a.i, a.g);
                        cache.steps[t].h_pre =
                            hadamard(a.o, tanh_(cache.steps[t].c_pre));
                        hn = cache.steps[t].h_pre;
                        cn = cache.steps[t].c_pre;
                    }
                    st.h = hn;
                    st.c = cn;
                    st.t += 1;
                    break;
                }
                case SkipMode::summary:
                    if (spec.arch == Arch::hgr_only)
                        ql_step_summary_pergate(std::get<LstmParams>(m.cell), *m.skip, st, x,
                                                spec.K, spec.pooling, cache.steps[t]);
                    else
                        ql_step_summary(std::get<PsugParams>(m.cell), *m.skip, st, x, spec.K,
                                        spec.pooling, cache.steps[t]);
                    break;
                case SkipMode::carry:
                    if (spec.arch == Arch::hgr_only)
                        ql_step_carry_pergate(std::get<LstmParams>(m.cell), st, x, spec.K,
                                              cache.steps[t]);
                    else
                        ql_step_carry(std::get<PsugParams>(m.cell), st, x, spec.K,
                                      cache.steps[t]);
                    break;
            }
            cache.outputs[t] = st.h;
        }
        if (smode == SkipMode::summary && spec.flush_partial && !st.block_buffer.empty()) {
            ql_flush_partial(*m.skip, st, spec.pooling, cache.steps.back());
            cache.outputs.back() = st.h;
        }
    }

    const bool use_dropout = mode == Mode::train && spec.dropout > 0.0;
    if (spec.task == Task::classify) {
        if (spec.readout == Readout::last) {
            cache.readout = cache.outputs.back();
        } else {
            cache.readout = Matrix(spec.head_in_dim(), 1);
            for (const Matrix& h : cache.outputs) add_in_place(cache.readout, h);
            cache.readout = scale(cache.readout, 1.0 / static_cast<double>(L));
        }
        cache.dropout_mask = use_dropout ? draw_dropout_mask(cache.readout.rows, spec.dropout, rng)
                                         : Matrix();
        Matrix r = cache.dropout_mask.empty() ? cache.readout
                                              : hadamard(cache.readout, cache.dropout_mask);
        cache.logits = matmul(m.head_w, r) + m.head_b;
        return cache.logits;
    }
    // lm: per-position logits over the vocabulary
    cache.lm_logits.resize(L);
    cache.lm_dropout_masks.resize(L);
    for (std::size_t t = 0; t < L; ++t) {
        if (use_dropout)
            cache.lm_dropout_masks[t] = draw_dropout_mask(cache.outputs[t].rows, spec.dropout, rng);
        Matrix r = cache.lm_dropout_masks[t].empty()
                       ? cache.outputs[t]
                       : hadamard(cache.outputs[t], cache.lm_dropout_masks[t]);
        cache.lm_logits[t] = matmul(m.head_w, r) + m.head_b;
    }
    return cache.lm_logits.back();
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

namespace {

struct SkipGradTarget {
    SkipParams* grads = nullptr;
    const SkipParams* params = nullptr;
    Pooling pooling = Pooling::mean;
};

// BPTT over the lstm/psug/ql step family. dh_seeds[t] (when non-empty) is the
// external gradient on the emitted hidden state at position t; dc_terminal
// optionally seeds the final cell state. Per-position input gradients land in
// dx_out; dc_records captures ||d c_pre_t|| for the flow profiler.
template <class Params>
void lstmish_bptt(const Params& p, Params& grads, const std::vector<StepCache>& steps,
                  SkipMode mode, const SkipGradTarget& skip,
                  const std::vector<Matrix>* dh_seeds, const Matrix* dc_terminal,
                  std::vector<Matrix>* dx_out, std::vector<double>* dc_records) {
    const std::size_t L = steps.size();
    const std::size_t d_h = steps.front().gates.i.rows;
    Matrix dh_next(d_h, 1), dc_next(d_h, 1), dCL(d_h, 1);
    std::vector<Matrix> dh_pre_extra;
    if (mode == SkipMode::summary) dh_pre_extra.assign(L, Matrix());
    if (dx_out) dx_out->assign(L, Matrix());
    if (dc_records) dc_records->assign(L, 0.0);

    for (std::size_t t = L; t-- > 0;) {
        const StepCache& s = steps[t];
        Matrix dh_t = dh_next;
        if (dh_seeds && !(*dh_seeds)[t].empty()) add_in_place(dh_t, (*dh_seeds)[t]);
        Matrix dc_t = dc_next;
        if (dc_terminal && t == L - 1) add_in_place(dc_t, *dc_terminal);

        Matrix do_(d_h, 1), dc_pre(d_h, 1), dh_pre(d_h, 1);
        const Matrix& o = s.gates.o;

        if (mode == SkipMode::carry) {
            const Matrix tstar = tanh_(s.c_star);
            Matrix dcstar(d_h, 1);
            for (std::size_t k = 0; k < d_h; ++k) {
                do_.data[k] = dh_t.data[k] * tstar.data[k];
                dcstar.data[k] =
                    dh_t.data[k] * o.data[k] * (1.0 - tstar.data[k] * tstar.data[k]);
            }
            if (s.boundary) {
                add_in_place(dcstar, dCL);  // long-term state was replaced by c_star
                dCL = dcstar;
            }
            dc_pre = dc_t + dcstar;
        } else if (mode == SkipMode::summary && s.boundary) {
            const Matrix tpost = tanh_(s.c_post);
            for (std::size_t k = 0; k < d_h; ++k) {
                do_.data[k] = dh_t.data[k] * tpost.data[k];
                dc_t.data[k] += dh_t.data[k] * o.data[k] * (1.0 - tpost.data[k] * tpost.data[k]);
            }
            // c_post = c_pre + s_k: the skip payload sees dc_t unattenuated
            const Matrix& ds_k = dc_t;
            add_in_place(skip.grads->W_p, matmul(ds_k, transpose(s.pooled)));
            add_in_place(skip.grads->b_p, ds_k);
            Matrix dpooled = matmul(transpose(skip.params->W_p), ds_k);
            Matrix dH = pool_block_backward(s.H_k, skip.pooling, dpooled);
            const std::size_t base = t + 1 - s.block_rows;
            for (std::size_t r = 0; r < s.block_rows; ++r) {
                Matrix row(d_h, 1);
                for (std::size_t j = 0; j < d_h; ++j) row.data[j] = dH(r, j);
                if (dh_pre_extra[base + r].empty())
                    dh_pre_extra[base + r] = std::move(row);
                else
                    add_in_place(dh_pre_extra[base + r], row);
            }
            dc_pre = dc_t;
            // the buffered h_pre of this step is consumed by this same skip
            if (!dh_pre_extra[t].empty()) dh_pre = dh_pre_extra[t];
        } else {
            dh_pre = dh_t;
            if (mode == SkipMode::summary && !dh_pre_extra[t].empty())
                add_in_place(dh_pre, dh_pre_extra[t]);
            dc_pre = dc_t;
        }

        if (mode != SkipMode::carry) {
            // h_pre = o . tanh(c_pre)
            const Matrix tpre = tanh_(s.c_pre);
            for (std::size_t k = 0; k < d_h; ++k) {
                do_.data[k] += dh_pre.data[k] * tpre.data[k];
                dc_pre.data[k] +=
                    dh_pre.data[k] * o.data[k] * (1.0 - tpre.data[k] * tpre.data[k]);
            }
        }
        if (dc_records) (*dc_records)[t] = l2_norm(dc_pre);

        // c_pre = f.c_prev + i.g
        Matrix df = hadamard(dc_pre, s.c_prev);
        Matrix di = hadamard(dc_pre, s.gates.g);
        Matrix dg = hadamard(dc_pre, s.gates.i);
        dc_next = hadamard(dc_pre, s.gates.f);

        Matrix dx;
        gates_backward(p, grads, s, di, df, do_, dg, dx, dh_next);
        if (dx_out) (*dx_out)[t] = std::move(dx);
    }
}

void gru_bptt(const GruParams& p, GruParams& grads, const std::vector<GruStepCache>& steps,
              const std::vector<Matrix>* dh_seeds, const Matrix* dh_terminal,
              std::vector<Matrix>* dx_out, std::vector<double>* dh_records) {
    const std::size_t L = steps.size();
    const std::size_t d_h = steps.front().z.rows;
    Matrix dh_next(d_h, 1);
    if (dx_out) dx_out->assign(L, Matrix());
    if (dh_records) dh_records->assign(L, 0.0);
    for (std::size_t t = L; t-- > 0;) {
        Matrix dh_t = dh_next;
        if (dh_seeds && !(*dh_seeds)[t].empty()) add_in_place(dh_t, (*dh_seeds)[t]);
        if (dh_terminal && t == L - 1) add_in_place(dh_t, *dh_terminal);
        if (dh_records) (*dh_records)[t] = l2_norm(dh_t);
        Matrix dx;
        gru_step_backward(p, grads, steps[t], dh_t, dx, dh_next);
        if (dx_out) (*dx_out)[t] = std::move(dx);
    }
}

}  // namespace

void backward(const Model& m, const SequenceCache& cache, const Matrix& dlogits,
              Gradients& grads, const std::vector<Matrix>* dlogits_lm,
              std::vector<Matrix>* dx_out) {
    const ModelSpec& spec = m.spec;
    const std::size_t L = cache.tokens.size();
    if (L == 0) throw DataError("backward: empty cache");

    // Head backward -> per-position seeds on the recurrent outputs.
    std::vector<Matrix> dh_seeds(L);
    if (spec.task == Task::classify) {
        require_shape(dlogits, m.head_b.rows, 1, "backward dlogits");
        Matrix r = cache.dropout_mask.empty() ? cache.readout
                                              : hadamard(cache.readout, cache.dropout_mask);
        add_in_place(grads.head_w, matmul(dlogits, transpose(r)));
        add_in_place(grads.head_b, dlogits);
        Matrix dr = matmul(transpose(m.head_w), dlogits);
        if (!cache.dropout_mask.empty()) dr = hadamard(dr, cache.dropout_mask);
        if (spec.readout == Readout::last) {
            dh_seeds[L - 1] = dr;
        } else {
            Matrix share = scale(dr, 1.0 / static_cast<double>(L));
            for (std::size_t t = 0; t < L; ++t) dh_seeds[t] = share;
        }
    } else {
        if (!dlogits_lm) throw NumericError("backward: lm task needs per-position dlogits");
        for (std::size_t t = 0; t < L; ++t) {
            const Matrix& dl = (*dlogits_lm)[t];
            if (dl.empty()) continue;
            Matrix r = cache.lm_dropout_masks[t].empty()
                           ? cache.outputs[t]
                           : hadamard(cache.outputs[t], cache.lm_dropout_masks[t]);
            add_in_place(grads.head_w, matmul(dl, transpose(r)));
            add_in_place(grads.head_b, dl);
            Matrix dr = matmul(transpose(m.head_w), dl);
            if (!cache.lm_dropout_masks[t].empty())
                dr = hadamard(dr, cache.lm_dropout_masks[t]);
            dh_seeds[t] = dr;
        }
    }

    std::vector<Matrix> dx(L);
    if (spec.arch == Arch::gru) {
        gru_bptt(std::get<GruParams>(m.cell), std::get<GruParams>(grads.cell), cache.gru_steps,
                 &dh_seeds, nullptr, &dx, nullptr);
    } else if (spec.arch == Arch::bilstm) {
        const BiLstmParams& p = std::get<BiLstmParams>(m.cell);
        BiLstmParams& g = std::get<BiLstmParams>(grads.cell);
        const std::size_t d_h = spec.d_h;
        std::vector<Matrix> seeds_f(L), seeds_b(L);
        for (std::size_t t = 0; t < L; ++t) {
            if (dh_seeds[t].empty()) continue;
            seeds_f[t] = slice_rows(dh_seeds[t], 0, d_h);
            // reverse direction ran positions L-1..0; execution index of t is L-1-t
            seeds_b[L - 1 - t] = slice_rows(dh_seeds[t], d_h, 2 * d_h);
        }
        std::vector<Matrix> dx_f, dx_b;
        lstmish_bptt(p.fwd, g.fwd, cache.steps, SkipMode::none, {}, &seeds_f, nullptr, &dx_f,
                     nullptr);
        lstmish_bptt(p.bwd, g.bwd, cache.bwd_steps, SkipMode::none, {}, &seeds_b, nullptr, &dx_b,
                     nullptr);
        for (std::size_t t = 0; t < L; ++t) {
            dx[t] = dx_f[t];
            add_in_place(dx[t], dx_b[L - 1 - t]);
        }
    } else {
        const SkipMode mode = skip_mode(spec);
        SkipGradTarget skip;
        if (mode == SkipMode::summary) {
            skip.grads = &*grads.skip;
            skip.params = &*m.skip;
            skip.pooling = spec.pooling;
        }
        if (std::holds_alternative<PsugParams>(m.cell))
            lstmish_bptt(std::get<PsugParams>(m.cell), std::get<PsugParams>(grads.cell),
                         cache.steps, mode, skip, &dh_seeds, nullptr, &dx, nullptr);
        else
            lstmish_bptt(std::get<LstmParams>(m.cell), std::get<LstmParams>(grads.cell),
                         cache.steps, mode, skip, &dh_seeds, nullptr, &dx, nullptr);
    }

    for (std::size_t t = 0; t < L; ++t) {
        const int id = cache.tokens[t];
        for (std::size_t j = 0; j < spec.d_emb; ++j)
            grads.embedding(static_cast<std::size_t>(id), j) += dx[t].data[j];
    }
    if (dx_out) *dx_out = std::move(dx);
}

// ---------------------------------------------------------------------------
// Gradient-flow profiler
// ---------------------------------------------------------------------------

GradientFlowProfile gradient_flow_profile(const Model& m, const std::vector<int>& token_ids,
                                          int target) {
    if (m.spec.task != Task::classify)
        throw ConfigError("gradient_flow_profile expects a classify model");
    Rng rng(0);
    SequenceCache cache;
    Matrix logits = forward(m, token_ids, Mode::eval, rng, cache);
    const std::size_t L = token_ids.size(), d_h = m.spec.d_h;

    // dLoss/dlogits of cross-entropy at the final position
    Matrix dlogits(logits.rows, 1);
    {
        double mx = logits.data[0];
        for (double v : logits.data) mx = std::max(mx, v);
        double z = 0.0;
        for (double v : logits.data) z += std::exp(v - mx);
        for (std::size_t k = 0; k < logits.size(); ++k)
            dlogits.data[k] = std::exp(logits.data[k] - mx) / z;
        dlogits.data[static_cast<std::size_t>(target)] -= 1.0;
    }
    Gradients grads = zero_gradients(m);
    std::vector<Matrix> dx;
    backward(m, cache, dlogits, grads, nullptr, &dx);

    GradientFlowProfile prof;
    prof.dx_norm.resize(L);
    for (std::size_t t = 0; t < L; ++t) prof.dx_norm[L - 1 - t] = l2_norm(dx[t]);

    // ||dc_T/dc_t||_F by seeding each terminal cell coordinate in turn.
    std::vector<std::vector<double>> rows(d_h);
    for (std::size_t j = 0; j < d_h; ++j) {
        Gradients scratch = zero_gradients(m);
        Matrix seed(d_h, 1);
        seed.data[j] = 1.0;
        std::vector<double> rec;
        if (m.spec.arch == Arch::gru) {
            gru_bptt(std::get<GruParams>(m.cell), std::get<GruParams>(scratch.cell),
                     cache.gru_steps, nullptr, &seed, nullptr, &rec);
        } else if (m.spec.arch == Arch::bilstm) {
            lstmish_bptt(std::get<BiLstmParams>(m.cell).fwd,
                         std::get<BiLstmParams>(scratch.cell).fwd, cache.steps, SkipMode::none,
                         {}, nullptr, &seed, nullptr, &rec);
        } else {
            const SkipMode mode = skip_mode(m.spec);
            SkipGradTarget skip;
            if (mode == SkipMode::summary) {
                skip.grads = &*scratch.skip;
                skip.params = &*m.skip;
                skip.pooling = m.spec.pooling;
            }
            if (std::holds_alternative<PsugParams>(m.cell))
                lstmish_bptt(std::get<PsugParams>(m.cell), std::get<PsugParams>(scratch.cell),
                             cache.steps, mode, skip, nullptr, &seed, nullptr, &rec);
            else
                lstmish_bptt(std::get<LstmParams>(m.cell), std::get<LstmParams>(scratch.cell),
                             cache.steps, mode, skip, nullptr, &seed, nullptr, &rec);
        }
        rows[j] = std::move(rec);
    }
    prof.cell_ratio.resize(L);
    double base = 0.0;
    for (std::size_t j = 0; j < d_h; ++j) base += rows[j][L - 1] * rows[j][L - 1];
    base = std::sqrt(base);
    for (std::size_t t = 0; t < L; ++t) {
        double fro = 0.0;
        for (std::size_t j = 0; j < d_h; ++j) fro += rows[j][t] * rows[j][t];
        prof.cell_ratio[L - 1 - t] = base > 0.0 ? std::sqrt(fro) / base : 0.0;
    }
    return prof;
}

// ---------------------------------------------------------------------------
// Clamped-gate constructions
// ---------------------------------------------------------------------------

namespace {

double forget_bias_for(double f_value) {
    if (f_value >= 1.0) return 50.0;  // saturated regime
    return std::log(f_value / (1.0 - f_value));
}

void clamp_lstm(LstmParams& p, double bf, double bi) {
    p.W_i.fill(0.0);
    p.W_f.fill(0.0);
    p.W_o.fill(0.0);
    p.W_g.fill(0.0);
    p.U_i.fill(0.0);
    p.U_f.fill(0.0);
    p.U_o.fill(0.0);
    p.U_g.fill(0.0);
    p.b_i.fill(bi);
    p.b_f.fill(bf);
    p.b_o.fill(0.0);
    p.b_g.fill(0.0);
}

void clamp_psug(PsugParams& p, std::size_t d_h, double bf, double bi) {
    p.W.fill(0.0);
    p.U.fill(0.0);
    for (std::size_t k = 0; k < d_h; ++k) {
        p.b.data[k] = bi;
        p.b.data[d_h + k] = bf;
        p.b.data[2 * d_h + k] = 0.0;
        p.b.data[3 * d_h + k] = 0.0;
    }
}

}  // namespace

void clamp_gates(Model& m, double f_value) {
    const double bf = forget_bias_for(f_value);
    std::visit(
        [&](auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, LstmParams>) {
                clamp_lstm(c, bf, -50.0);
            } else if constexpr (std::is_same_v<T, PsugParams>) {
                clamp_psug(c, m.spec.d_h, bf, -50.0);
            } else if constexpr (std::is_same_v<T, BiLstmParams>) {
                clamp_lstm(c.fwd, bf, -50.0);
                clamp_lstm(c.bwd, bf, -50.0);
            } else {
                throw ConfigError("clamp_gates: gru has no forget gate");
            }
        },
        m.cell);
    if (m.skip) {
        m.skip->W_p.fill(0.0);
        m.skip->b_p.fill(0.0);
    }
}

void clamp_gates_live_input(Model& m, double f_value, Rng& rng) {
    const double bf = forget_bias_for(f_value);
    const std::size_t d_h = m.spec.d_h;
    std::visit(
        [&](auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, LstmParams>) {
                clamp_lstm(c, bf, +50.0);
                for (double& v : c.W_g.data) v = rng.uniform(-0.5, 0.5);
            } else if constexpr (std::is_same_v<T, PsugParams>) {
                clamp_psug(c, d_h, bf, +50.0);
                for (std::size_t r = 3 * d_h; r < 4 * d_h; ++r)
                    for (std::size_t j = 0; j < c.W.cols; ++j)
                        c.W(r, j) = rng.uniform(-0.5, 0.5);
            } else {
                throw ConfigError("clamp_gates_live_input: lstm-family cells only");
            }
        },
        m.cell);
    if (m.skip) {
        m.skip->W_p.fill(0.0);
        const std::size_t p = m.skip->W_p.cols;
        for (std::size_t k = 0; k < d_h; ++k) m.skip->W_p(k, k % p) = 1.0;
        m.skip->b_p.fill(0.0);
    }
}

StepCost analytic_step_cost(const ModelSpec& spec) {
    const std::size_t n = spec.d_h, mdim = spec.d_emb;
    StepCost c;
    switch (spec.arch) {
        case Arch::lstm: c.cell_macs = 4 * (n * mdim + n * n); break;
        case Arch::gru: c.cell_macs = 3 * (n * mdim + n * n); break;
        case Arch::bilstm: c.cell_macs = 2 * 4 * (n * mdim + n * n); break;
        case Arch::ql_full:
        case Arch::psug_only:
        case Arch::hgr_only:
            c.cell_macs = spec.arch == Arch::hgr_only ? 4 * (n * mdim + n * n)
                                                      : 4 * n * mdim + 4 * n * n;
            break;
    }
    if (spec.has_skip_params()) c.skip_macs_amortized = n * spec.pooled_dim() / spec.K;
    return c;
}

}  // namespace qlrnn
