#include "qlrnn/cells.hpp"

#include <cmath>

#include "qlrnn/errors.hpp"

namespace qlrnn {

const char* to_string(Arch a) {
    switch (a) {
        case Arch::lstm: return "lstm";
        case Arch::gru: return "gru";
        case Arch::bilstm: return "bilstm";
        case Arch::ql_full: return "ql_full";
        case Arch::psug_only: return "psug_only";
        case Arch::hgr_only: return "hgr_only";
    }
    return "?";
}
const char* to_string(Pooling p) {
    switch (p) {
        case Pooling::mean: return "mean";
        case Pooling::max: return "max";
        case Pooling::mean_max: return "mean_max";
    }
    return "?";
}
const char* to_string(SkipVariant v) { return v == SkipVariant::summary ? "summary" : "carry"; }
const char* to_string(Task t) { return t == Task::classify ? "classify" : "lm"; }
const char* to_string(Readout r) { return r == Readout::last ? "last" : "mean"; }

Arch arch_from_string(const std::string& s) {
    if (s == "lstm") return Arch::lstm;
    if (s == "gru") return Arch::gru;
    if (s == "bilstm") return Arch::bilstm;
    if (s == "ql_full") return Arch::ql_full;
    if (s == "psug_only") return Arch::psug_only;
    if (s == "hgr_only") return Arch::hgr_only;
    throw ConfigError("unknown arch '" + s + "'");
}
Pooling pooling_from_string(const std::string& s) {
    if (s == "mean") return Pooling::mean;
    if (s == "max") return Pooling::max;
    if (s == "mean_max") return Pooling::mean_max;
    throw ConfigError("unknown pooling '" + s + "'");
}
SkipVariant skip_variant_from_string(const std::string& s) {
    if (s == "summary") return SkipVariant::summary;
    if (s == "carry") return SkipVariant::carry;
    throw ConfigError("unknown skip_variant '" + s + "'");
}
Task task_from_string(const std::string& s) {
    if (s == "classify") return Task::classify;
    if (s == "lm") return Task::lm;
    throw ConfigError("unknown task '" + s + "'");
}
Readout readout_from_string(const std::string& s) {
    if (s == "last") return Readout::last;
    if (s == "mean") return Readout::mean;
    throw ConfigError("unknown readout '" + s + "'");
}

void ModelSpec::validate() const {
    if (d_emb < 1) throw ConfigError("d_emb must be >= 1");
    if (d_h < 1) throw ConfigError("d_h must be >= 1");
    if (K < 1) throw ConfigError("K must be >= 1");
    if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
    if (task == Task::classify && n_classes < 2) throw ConfigError("n_classes must be >= 2");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0,1)");
}

LstmParams make_lstm_params(std::size_t d_h, std::size_t d_x) {
    LstmParams p;
    p.W_i = p.W_f = p.W_o = p.W_g = Matrix(d_h, d_x);
    p.U_i = p.U_f = p.U_o = p.U_g = Matrix(d_h, d_h);
    p.b_i = p.b_f = p.b_o = p.b_g = Matrix(d_h, 1);
    return p;
}

GruParams make_gru_params(std::size_t d_h, std::size_t d_x) {
    GruParams p;
    p.W_z = p.W_r = p.W_h = Matrix(d_h, d_x);
    p.U_z = p.U_r = p.U_h = Matrix(d_h, d_h);
    p.b_z = p.b_r = p.b_h = Matrix(d_h, 1);
    return p;
}

PsugParams make_psug_params(std::size_t d_h, std::size_t d_x) {
    PsugParams p;
    p.W = Matrix(4 * d_h, d_x);
    p.U = Matrix(4 * d_h, d_h);
    p.b = Matrix(4 * d_h, 1);
    return p;
}

SkipParams make_skip_params(std::size_t d_h, std::size_t p_dim) {
    SkipParams sp;
    sp.W_p = Matrix(d_h, p_dim);
    sp.b_p = Matrix(d_h, 1);
    return sp;
}

PsugParams stack_lstm_params(const LstmParams& p) {
    PsugParams out;
    out.W = vcat({&p.W_i, &p.W_f, &p.W_o, &p.W_g});
    out.U = vcat({&p.U_i, &p.U_f, &p.U_o, &p.U_g});
    out.b = vcat({&p.b_i, &p.b_f, &p.b_o, &p.b_g});
    return out;
}

Matrix affine_gate_pre(const Matrix& W, const Matrix& U, const Matrix& b, const Matrix& x,
                       const Matrix& h_prev) {
    return (matmul(W, x) + matmul(U, h_prev)) + b;
}

GateActs psug_gates(const PsugParams& p, const Matrix& x_t, const Matrix& h_prev) {
    const std::size_t d_h = p.U.cols;
    require_shape(x_t, p.W.cols, 1, "psug_gates x_t");
    require_shape(h_prev, d_h, 1, "psug_gates h_prev");
    Matrix z = affine_gate_pre(p.W, p.U, p.b, x_t, h_prev);
    GateActs a;
    a.i = sigmoid(slice_rows(z, 0, d_h));
    a.f = sigmoid(slice_rows(z, d_h, 2 * d_h));
    a.o = sigmoid(slice_rows(z, 2 * d_h, 3 * d_h));
    a.g = tanh_(slice_rows(z, 3 * d_h, 4 * d_h));
    return a;
}

GateActs lstm_gates(const LstmParams& p, const Matrix& x_t, const Matrix& h_prev) {
    require_shape(x_t, p.W_i.cols, 1, "lstm_gates x_t");
    require_shape(h_prev, p.U_i.cols, 1, "lstm_gates h_prev");
    GateActs a;
    a.i = sigmoid(affine_gate_pre(p.W_i, p.U_i, p.b_i, x_t, h_prev));
    a.f = sigmoid(affine_gate_pre(p.W_f, p.U_f, p.b_f, x_t, h_prev));
    a.o = sigmoid(affine_gate_pre(p.W_o, p.U_o, p.b_o, x_t, h_prev));
    a.g = tanh_(affine_gate_pre(p.W_g, p.U_g, p.b_g, x_t, h_prev));
    return a;
}

namespace {

// c_pre = f.c_prev + i.g ; h_pre = o.tanh(c_pre)
void cell_update(const GateActs& a, const Matrix& c_prev, Matrix& c_pre, Matrix& h_pre) {
    c_pre = hadamard(a.f, c_prev) + hadamard(a.i, a.g);
    h_pre = hadamard(a.o, tanh_(c_pre));
}

void fill_step_cache(StepCache& cache, const Matrix& x, const Matrix& h_prev,
                     const Matrix& c_prev, GateActs a, Matrix c_pre, Matrix h_pre) {
    cache.x = x;
    cache.h_prev = h_prev;
    cache.c_prev = c_prev;
    cache.gates = std::move(a);
    cache.c_pre = std::move(c_pre);
    cache.h_pre = std::move(h_pre);
    cache.boundary = false;
    cache.block_rows = 0;
}

Matrix rows_from_buffer(const std::vector<Matrix>& buffer) {
    Matrix H(buffer.size(), buffer.front().rows);
    for (std::size_t r = 0; r < buffer.size(); ++r)
        for (std::size_t j = 0; j < H.cols; ++j) H(r, j) = buffer[r].data[j];
    return H;
}

// Shared body of the summary-variant step, parameterized over the gate source.
template <class Gates>
void ql_summary_step_impl(Gates&& gates, const SkipParams& sp, QLState& st, const Matrix& x_t,
                          std::size_t K, Pooling pooling, StepCache& cache) {
    if (K < 1) throw ShapeError("leap interval K must be >= 1");
    GateActs a = gates(x_t, st.h);
    Matrix c_pre, h_pre;
    cell_update(a, st.c, c_pre, h_pre);
    fill_step_cache(cache, x_t, st.h, st.c, std::move(a), c_pre, h_pre);
    st.t += 1;
    st.block_buffer.push_back(h_pre);
    if (st.t % K == 0) {
        cache.boundary = true;
        cache.block_rows = st.block_buffer.size();
        cache.H_k = rows_from_buffer(st.block_buffer);
        cache.pooled = pool_block(cache.H_k, pooling);
        cache.s_k = block_summary(sp, cache.pooled);
        cache.c_post = c_pre + cache.s_k;
        st.c = cache.c_post;
        st.h = hadamard(cache.gates.o, tanh_(cache.c_post));
        st.block_buffer.clear();
    } else {
        st.c = c_pre;
        st.h = h_pre;
    }
}

template <class Gates>
void ql_carry_step_impl(Gates&& gates, QLState& st, const Matrix& x_t, std::size_t K,
                        StepCache& cache) {
    if (K < 1) throw ShapeError("leap interval K must be >= 1");
    GateActs a = gates(x_t, st.h);
    Matrix c_pre, h_pre;
    cell_update(a, st.c, c_pre, h_pre);
    fill_step_cache(cache, x_t, st.h, st.c, std::move(a), c_pre, h_pre);
    st.t += 1;
    if (st.t % K == 0) {
        cache.boundary = true;
        cache.c_star = c_pre + st.C_L;  // fold long-term state in at the boundary
        st.C_L = cache.c_star;
    } else {
        cache.c_star = c_pre;
    }
    st.c = c_pre;  // the carried short-term state stays the plain gated update
    st.h = hadamard(cache.gates.o, tanh_(cache.c_star));
}

}  // namespace

void lstm_step(const LstmParams& p, const Matrix& x_t, const Matrix& h_prev, const Matrix& c_prev,
               Matrix& h_t, Matrix& c_t, StepCache& cache) {
    GateActs a = lstm_gates(p, x_t, h_prev);
    Matrix c_pre, h_pre;
    cell_update(a, c_prev, c_pre, h_pre);
    fill_step_cache(cache, x_t, h_prev, c_prev, std::move(a), c_pre, h_pre);
    c_t = cache.c_pre;
    h_t = cache.h_pre;
}

void gru_step(const GruParams& p, const Matrix& x_t, const Matrix& h_prev, Matrix& h_t,
              GruStepCache& cache) {
    require_shape(x_t, p.W_z.cols, 1, "gru_step x_t");
    require_shape(h_prev, p.U_z.cols, 1, "gru_step h_prev");
    cache.x = x_t;
    cache.h_prev = h_prev;
    cache.z = sigmoid(affine_gate_pre(p.W_z, p.U_z, p.b_z, x_t, h_prev));
    cache.r = sigmoid(affine_gate_pre(p.W_r, p.U_r, p.b_r, x_t, h_prev));
    cache.h_tilde = tanh_(affine_gate_pre(p.W_h, p.U_h, p.b_h, x_t, hadamard(cache.r, h_prev)));
    // h = (1-z).h_prev + z.h_tilde
    h_t = h_prev;
    for (std::size_t k = 0; k < h_t.size(); ++k) {
        const double z = cache.z.data[k];
        h_t.data[k] = (1.0 - z) * h_prev.data[k] + z * cache.h_tilde.data[k];
    }
}

Matrix pool_block(const Matrix& H_k, Pooling method) {
    if (H_k.rows == 0) throw ShapeError("pool_block: empty block");
    const std::size_t K = H_k.rows, d = H_k.cols;
    Matrix mean(d, 1), mx(d, 1);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0, m = H_k(0, j);
        for (std::size_t r = 0; r < K; ++r) {
            s += H_k(r, j);
            if (H_k(r, j) > m) m = H_k(r, j);
        }
        mean.data[j] = s / static_cast<double>(K);
        mx.data[j] = m;
    }
    switch (method) {
        case Pooling::mean: return mean;
        case Pooling::max: return mx;
        case Pooling::mean_max: return vcat({&mean, &mx});
    }
    throw ShapeError("pool_block: bad method");
}

Matrix block_summary(const SkipParams& sp, const Matrix& pooled) {
    require_shape(pooled, sp.W_p.cols, 1, "block_summary pooled");
    return matmul(sp.W_p, pooled) + sp.b_p;
}

QLState QLState::initial(std::size_t d_h) {
    QLState st;
    st.h = Matrix(d_h, 1);
    st.c = Matrix(d_h, 1);
    st.C_L = Matrix(d_h, 1);
    st.t = 0;
    return st;
}

void ql_step_summary(const PsugParams& p, const SkipParams& sp, QLState& st, const Matrix& x_t,
                     std::size_t K, Pooling pooling, StepCache& cache) {
    ql_summary_step_impl([&](const Matrix& x, const Matrix& h) { return psug_gates(p, x, h); },
                         sp, st, x_t, K, pooling, cache);
}

void ql_step_summary_pergate(const LstmParams& p, const SkipParams& sp, QLState& st,
                             const Matrix& x_t, std::size_t K, Pooling pooling, StepCache& cache) {
    ql_summary_step_impl([&](const Matrix& x, const Matrix& h) { return lstm_gates(p, x, h); },
                         sp, st, x_t, K, pooling, cache);
}

void ql_step_carry(const PsugParams& p, QLState& st, const Matrix& x_t, std::size_t K,
                   StepCache& cache) {
    ql_carry_step_impl([&](const Matrix& x, const Matrix& h) { return psug_gates(p, x, h); }, st,
                       x_t, K, cache);
}

void ql_step_carry_pergate(const LstmParams& p, QLState& st, const Matrix& x_t, std::size_t K,
                           StepCache& cache) {
    ql_carry_step_impl([&](const Matrix& x, const Matrix& h) { return lstm_gates(p, x, h); }, st,
                       x_t, K, cache);
}

void ql_flush_partial(const SkipParams& sp, QLState& st, Pooling pooling, StepCache& last_cache) {
    if (st.block_buffer.empty()) return;
    last_cache.boundary = true;
    last_cache.block_rows = st.block_buffer.size();
    last_cache.H_k = rows_from_buffer(st.block_buffer);
    last_cache.pooled = pool_block(last_cache.H_k, pooling);
    last_cache.s_k = block_summary(sp, last_cache.pooled);
    last_cache.c_post = last_cache.c_pre + last_cache.s_k;
    st.c = last_cache.c_post;
    st.h = hadamard(last_cache.gates.o, tanh_(last_cache.c_post));
    st.block_buffer.clear();
}

std::vector<Matrix> bilstm_forward(const LstmParams& fwd, const LstmParams& bwd,
                                   const std::vector<Matrix>& xs) {
    if (xs.empty()) throw ShapeError("bilstm_forward: empty sequence");
    const std::size_t L = xs.size(), d_h = fwd.U_i.cols;
    std::vector<Matrix> hf(L), hb(L);
    Matrix h(d_h, 1), c(d_h, 1), hn, cn;
    StepCache scratch;
    for (std::size_t t = 0; t < L; ++t) {
        lstm_step(fwd, xs[t], h, c, hn, cn, scratch);
        h = hn;
        c = cn;
        hf[t] = h;
    }
    h.fill(0.0);
    c.fill(0.0);
    for (std::size_t t = L; t-- > 0;) {
        lstm_step(bwd, xs[t], h, c, hn, cn, scratch);
        h = hn;
        c = cn;
        hb[t] = h;  // state after consuming x_t..x_L, aligned to position t
    }
    std::vector<Matrix> out(L);
    for (std::size_t t = 0; t < L; ++t) out[t] = vcat({&hf[t], &hb[t]});
    return out;
}

void gates_backward(const PsugParams& p, PsugParams& grads, const StepCache& c, const Matrix& di,
                    const Matrix& df, const Matrix& do_, const Matrix& dg, Matrix& dx,
                    Matrix& dh_prev) {
    const GateActs& a = c.gates;
    const std::size_t d_h = a.i.rows;
    Matrix dz(4 * d_h, 1);
    for (std::size_t k = 0; k < d_h; ++k) {
        dz.data[k] = di.data[k] * a.i.data[k] * (1.0 - a.i.data[k]);
        dz.data[d_h + k] = df.data[k] * a.f.data[k] * (1.0 - a.f.data[k]);
        dz.data[2 * d_h + k] = do_.data[k] * a.o.data[k] * (1.0 - a.o.data[k]);
        dz.data[3 * d_h + k] = dg.data[k] * (1.0 - a.g.data[k] * a.g.data[k]);
    }
    add_in_place(grads.W, matmul(dz, transpose(c.x)));
    add_in_place(grads.U, matmul(dz, transpose(c.h_prev)));
    add_in_place(grads.b, dz);
    dx = matmul(transpose(p.W), dz);
    dh_prev = matmul(transpose(p.U), dz);
}

void gates_backward(const LstmParams& p, LstmParams& grads, const StepCache& c, const Matrix& di,
                    const Matrix& df, const Matrix& do_, const Matrix& dg, Matrix& dx,
                    Matrix& dh_prev) {
    const GateActs& a = c.gates;
    const std::size_t d_h = a.i.rows;
    Matrix dpre_i(d_h, 1), dpre_f(d_h, 1), dpre_o(d_h, 1), dpre_g(d_h, 1);
    for (std::size_t k = 0; k < d_h; ++k) {
        dpre_i.data[k] = di.data[k] * a.i.data[k] * (1.0 - a.i.data[k]);
        dpre_f.data[k] = df.data[k] * a.f.data[k] * (1.0 - a.f.data[k]);
        dpre_o.data[k] = do_.data[k] * a.o.data[k] * (1.0 - a.o.data[k]);
        dpre_g.data[k] = dg.data[k] * (1.0 - a.g.data[k] * a.g.data[k]);
    }
    const Matrix xT = transpose(c.x), hT = transpose(c.h_prev);
    add_in_place(grads.W_i, matmul(dpre_i, xT));
    add_in_place(grads.W_f, matmul(dpre_f, xT));
    add_in_place(grads.W_o, matmul(dpre_o, xT));
    add_in_place(grads.W_g, matmul(dpre_g, xT));
    add_in_place(grads.U_i, matmul(dpre_i, hT));
    add_in_place(grads.U_f, matmul(dpre_f, hT));
    add_in_place(grads.U_o, matmul(dpre_o, hT));
    add_in_place(grads.U_g, matmul(dpre_g, hT));
    add_in_place(grads.b_i, dpre_i);
    add_in_place(grads.b_f, dpre_f);
    add_in_place(grads.b_o, dpre_o);
    add_in_place(grads.b_g, dpre_g);
    dx = matmul(transpose(p.W_i), dpre_i);
    add_in_place(dx, matmul(transpose(p.W_f), dpre_f));
    add_in_place(dx, matmul(transpose(p.W_o), dpre_o));
    add_in_place(dx, matmul(transpose(p.W_g), dpre_g));
    dh_prev = matmul(transpose(p.U_i), dpre_i);
    add_in_place(dh_prev, matmul(transpose(p.U_f), dpre_f));
    add_in_place(dh_prev, matmul(transpose(p.U_o), dpre_o));
    add_in_place(dh_prev, matmul(transpose(p.U_g), dpre_g));
}

void gru_step_backward(const GruParams& p, GruParams& grads, const GruStepCache& c,
                       const Matrix& dh, Matrix& dx, Matrix& dh_prev) {
    const std::size_t d_h = c.z.rows;
    Matrix dz(d_h, 1), dh_tilde(d_h, 1);
    dh_prev = Matrix(d_h, 1);
    for (std::size_t k = 0; k < d_h; ++k) {
        const double z = c.z.data[k];
        dh_tilde.data[k] = dh.data[k] * z;
        dz.data[k] = dh.data[k] * (c.h_tilde.data[k] - c.h_prev.data[k]);
        dh_prev.data[k] = dh.data[k] * (1.0 - z);
    }
    Matrix dpre_h(d_h, 1), dpre_z(d_h, 1);
    for (std::size_t k = 0; k < d_h; ++k) {
        dpre_h.data[k] = dh_tilde.data[k] * (1.0 - c.h_tilde.data[k] * c.h_tilde.data[k]);
        dpre_z.data[k] = dz.data[k] * c.z.data[k] * (1.0 - c.z.data[k]);
    }
    const Matrix rh = hadamard(c.r, c.h_prev);
    add_in_place(grads.W_h, matmul(dpre_h, transpose(c.x)));
    add_in_place(grads.U_h, matmul(dpre_h, transpose(rh)));
    add_in_place(grads.b_h, dpre_h);
    const Matrix drh = matmul(transpose(p.U_h), dpre_h);
    Matrix dr(d_h, 1);
    for (std::size_t k = 0; k < d_h; ++k) {
        dr.data[k] = drh.data[k] * c.h_prev.data[k];
        dh_prev.data[k] += drh.data[k] * c.r.data[k];
    }
    Matrix dpre_r(d_h, 1);
    for (std::size_t k = 0; k < d_h; ++k)
        dpre_r.data[k] = dr.data[k] * c.r.data[k] * (1.0 - c.r.data[k]);
    add_in_place(grads.W_z, matmul(dpre_z, transpose(c.x)));
    add_in_place(grads.U_z, matmul(dpre_z, transpose(c.h_prev)));
    add_in_place(grads.b_z, dpre_z);
    add_in_place(grads.W_r, matmul(dpre_r, transpose(c.x)));
    add_in_place(grads.U_r, matmul(dpre_r, transpose(c.h_prev)));
    add_in_place(grads.b_r, dpre_r);
    dx = matmul(transpose(p.W_z), dpre_z);
    add_in_place(dx, matmul(transpose(p.W_r), dpre_r));
    add_in_place(dx, matmul(transpose(p.W_h), dpre_h));
    add_in_place(dh_prev, matmul(transpose(p.U_z), dpre_z));
    add_in_place(dh_prev, matmul(transpose(p.U_r), dpre_r));
}

Matrix pool_block_backward(const Matrix& H_k, Pooling method, const Matrix& dpooled) {
    const std::size_t K = H_k.rows, d = H_k.cols;
    Matrix dH(K, d);
    auto mean_part = [&](std::size_t off) {
        for (std::size_t j = 0; j < d; ++j) {
            const double share = dpooled.data[off + j] / static_cast<double>(K);
            for (std::size_t r = 0; r < K; ++r) dH(r, j) += share;
        }
    };
    auto max_part = [&](std::size_t off) {
        for (std::size_t j = 0; j < d; ++j) {
            std::size_t arg = 0;
            for (std::size_t r = 1; r < K; ++r)
                if (H_k(r, j) > H_k(arg, j)) arg = r;
            dH(arg, j) += dpooled.data[off + j];
        }
    };
    switch (method) {
        case Pooling::mean: mean_part(0); break;
        case Pooling::max: max_part(0); break;
        case Pooling::mean_max:
            mean_part(0);
            max_part(d);
            break;
    }
    return dH;
}

CellParamCount count_cell_params(const ModelSpec& spec) {
    const std::size_t n = spec.d_h, m = spec.d_emb;
    auto lstm_enum = [&] {
        LstmParams p = make_lstm_params(n, m);
        return p.W_i.size() + p.W_f.size() + p.W_o.size() + p.W_g.size() + p.U_i.size() +
               p.U_f.size() + p.U_o.size() + p.U_g.size() + p.b_i.size() + p.b_f.size() +
               p.b_o.size() + p.b_g.size();
    };
    auto gru_enum = [&] {
        GruParams p = make_gru_params(n, m);
        return p.W_z.size() + p.W_r.size() + p.W_h.size() + p.U_z.size() + p.U_r.size() +
               p.U_h.size() + p.b_z.size() + p.b_r.size() + p.b_h.size();
    };
    auto psug_enum = [&] {
        PsugParams p = make_psug_params(n, m);
        return p.W.size() + p.U.size() + p.b.size();
    };
    auto skip_enum = [&]() -> std::size_t {
        if (!spec.has_skip_params()) return 0;
        SkipParams sp = make_skip_params(n, spec.pooled_dim());
        return sp.W_p.size() + sp.b_p.size();
    };
    auto skip_closed = [&]() -> std::size_t {
        if (!spec.has_skip_params()) return 0;
        return n * spec.pooled_dim() + n;
    };

    CellParamCount out;
    switch (spec.arch) {
        case Arch::lstm:
            out.enumerated = lstm_enum();
            out.closed_form = 4 * (n * m + n * n + n);
            break;
        case Arch::gru:
            out.enumerated = gru_enum();
            out.closed_form = 3 * (n * m + n * n + n);
            break;
        case Arch::bilstm:
            out.enumerated = 2 * lstm_enum();
            out.closed_form = 2 * 4 * (n * m + n * n + n);
            break;
        case Arch::psug_only:
            out.enumerated = psug_enum();
            out.closed_form = 4 * n * m + 4 * n * n + 4 * n;
            break;
        case Arch::ql_full:
            out.enumerated = psug_enum() + skip_enum();
            out.closed_form = 4 * n * m + 4 * n * n + 4 * n + skip_closed();
            break;
        case Arch::hgr_only:
            out.enumerated = lstm_enum() + skip_enum();
            out.closed_form = 4 * (n * m + n * n + n) + skip_closed();
            break;
    }
    if (out.enumerated != out.closed_form)
        throw NumericError("count_cell_params: enumeration disagrees with closed form");
    return out;
}

}  // namespace qlrnn
