#include "qlrnn/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "qlrnn/errors.hpp"

namespace qlrnn {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_len < 1) throw ConfigError("max_len must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

std::pair<double, Matrix> cross_entropy(const Matrix& logits, int target) {
    if (logits.cols != 1) throw ShapeError("cross_entropy: logits must be a column");
    if (target < 0 || static_cast<std::size_t>(target) >= logits.rows)
        throw DataError("cross_entropy: target " + std::to_string(target) + " out of range");
    double mx = logits.data[0];
    for (double v : logits.data) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits.data) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    const double loss = log_z - logits.data[static_cast<std::size_t>(target)];
    Matrix dlogits(logits.rows, 1);
    for (std::size_t k = 0; k < logits.rows; ++k)
        dlogits.data[k] = std::exp(logits.data[k] - mx) / z;
    dlogits.data[static_cast<std::size_t>(target)] -= 1.0;
    return {loss, std::move(dlogits)};
}

namespace {

std::vector<Matrix*> tensor_list(Model& m) {
    std::vector<Matrix*> out;
    for_each_tensor(m, [&](const std::string&, Matrix& t) { out.push_back(&t); });
    return out;
}

std::vector<const Matrix*> tensor_list(const Gradients& g) {
    std::vector<const Matrix*> out;
    for_each_tensor(g, [&](const std::string&, const Matrix& t) { out.push_back(&t); });
    return out;
}

std::vector<Matrix*> tensor_list(Gradients& g) {
    std::vector<Matrix*> out;
    for_each_tensor(g, [&](const std::string&, Matrix& t) { out.push_back(&t); });
    return out;
}

}  // namespace

void sgd_step(Model& m, const Gradients& g, double lr, double weight_decay) {
    auto ps = tensor_list(m);
    auto gs = tensor_list(g);
    if (ps.size() != gs.size()) throw ShapeError("sgd_step: model/gradient tensor count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Matrix& p = *ps[i];
        const Matrix& gr = *gs[i];
        if (!p.same_shape(gr)) throw ShapeError("sgd_step: tensor shape mismatch");
        for (std::size_t k = 0; k < p.size(); ++k)
            p.data[k] -= lr * (gr.data[k] + weight_decay * p.data[k]);
    }
}

AdamState make_adam_state(const Model& m) {
    AdamState st;
    for_each_tensor(m, [&](const std::string&, const Matrix& t) {
        st.m1.emplace_back(t.rows, t.cols);
        st.m2.emplace_back(t.rows, t.cols);
    });
    return st;
}

void adam_step(Model& m, const Gradients& g, AdamState& st, double lr, double weight_decay) {
    auto ps = tensor_list(m);
    auto gs = tensor_list(g);
    if (ps.size() != gs.size() || ps.size() != st.m1.size())
        throw ShapeError("adam_step: tensor count mismatch");
    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Matrix& p = *ps[i];
        const Matrix& gr = *gs[i];
        Matrix& m1 = st.m1[i];
        Matrix& m2 = st.m2[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m1.data[k] = st.beta1 * m1.data[k] + (1.0 - st.beta1) * gr.data[k];
            m2.data[k] = st.beta2 * m2.data[k] + (1.0 - st.beta2) * gr.data[k] * gr.data[k];
            const double mhat = m1.data[k] / bc1;
            const double vhat = m2.data[k] / bc2;
            p.data[k] -= lr * mhat / (std::sqrt(vhat) + st.eps);
            p.data[k] -= lr * weight_decay * p.data[k];  // decoupled decay
        }
    }
}

double clip_by_global_norm(Gradients& g, double max_norm) {
    if (!(max_norm > 0.0)) throw NumericError("clip_by_global_norm: max_norm must be > 0");
    double sq = 0.0;
    for_each_tensor(static_cast<const Gradients&>(g),
                    [&](const std::string&, const Matrix& t) {
                        for (double v : t.data) sq += v * v;
                    });
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (Matrix* t : tensor_list(g))
            for (double& v : t->data) v *= s;
    }
    return norm;
}

namespace {

std::vector<int> clip_tokens(const Example& ex, std::size_t max_len) {
    if (ex.tokens.size() <= max_len) return ex.tokens;
    return std::vector<int>(ex.tokens.begin(), ex.tokens.begin() + static_cast<long>(max_len));
}

// Mean per-example loss and gradient accumulation over one batch (fixed order).
double batch_forward_backward(const Model& m, const std::vector<const Example*>& batch,
                              std::size_t max_len, Rng& rng, Gradients& grads) {
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss_sum = 0.0;
    SequenceCache cache;
    for (const Example* ex : batch) {
        const std::vector<int> toks = clip_tokens(*ex, max_len);
        if (m.spec.task == Task::classify) {
            Matrix logits = forward(m, toks, Mode::train, rng, cache);
            auto [loss, dlogits] = cross_entropy(logits, ex->label);
            loss_sum += loss;
            backward(m, cache, scale(dlogits, inv_n), grads);
        } else {
            if (toks.size() < 2) continue;  // nothing to predict
            forward(m, toks, Mode::train, rng, cache);
            const std::size_t T = toks.size() - 1;
            std::vector<Matrix> dlm(toks.size());
            double ex_loss = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                auto [l, dl] = cross_entropy(cache.lm_logits[t], toks[t + 1]);
                ex_loss += l;
                dlm[t] = scale(dl, inv_n / static_cast<double>(T));
            }
            loss_sum += ex_loss / static_cast<double>(T);
            backward(m, cache, Matrix(), grads, &dlm);
        }
    }
    return loss_sum * inv_n;
}

}  // namespace

EvalReport evaluate(const Model& m, const std::vector<Example>& data, std::size_t max_len) {
    if (data.empty()) throw DataError("evaluate: empty dataset");
    Rng rng(0);  // unused in eval mode
    SequenceCache cache;
    if (m.spec.task == Task::classify) {
        std::vector<int> preds, labels;
        std::vector<double> pos_probs;
        double loss_sum = 0.0;
        for (const Example& ex : data) {
            const std::vector<int> toks = clip_tokens(ex, max_len);
            Matrix logits = forward(m, toks, Mode::eval, rng, cache);
            auto [loss, dl] = cross_entropy(logits, ex.label);
            loss_sum += loss;
            int argmax = 0;
            for (std::size_t k = 1; k < logits.rows; ++k)
                if (logits.data[k] > logits.data[static_cast<std::size_t>(argmax)])
                    argmax = static_cast<int>(k);
            preds.push_back(argmax);
            labels.push_back(ex.label);
            if (m.spec.n_classes == 2) {
                // P(class 1) via the stabilized two-way softmax
                const double d = logits.data[1] - logits.data[0];
                pos_probs.push_back(sigmoid_scalar(d));
            }
        }
        EvalReport r = classification_report(preds, pos_probs, labels, m.spec.n_classes);
        r.loss = loss_sum / static_cast<double>(data.size());
        return r;
    }
    // lm: mean token nll, argmax hit rate
    double nll_sum = 0.0;
    std::size_t tokens = 0, hits = 0;
    for (const Example& ex : data) {
        const std::vector<int> toks = clip_tokens(ex, max_len);
        if (toks.size() < 2) continue;
        forward(m, toks, Mode::eval, rng, cache);
        for (std::size_t t = 0; t + 1 < toks.size(); ++t) {
            auto [l, dl] = cross_entropy(cache.lm_logits[t], toks[t + 1]);
            nll_sum += l;
            ++tokens;
            const Matrix& lg = cache.lm_logits[t];
            std::size_t argmax = 0;
            for (std::size_t k = 1; k < lg.rows; ++k)
                if (lg.data[k] > lg.data[argmax]) argmax = k;
            if (static_cast<int>(argmax) == toks[t + 1]) ++hits;
        }
    }
    if (tokens == 0) throw DataError("evaluate: no predictable tokens");
    EvalReport r;
    r.loss = nll_sum / static_cast<double>(tokens);
    const LmMetrics lm = lm_metrics(r.loss, hits, tokens);
    r.perplexity = lm.perplexity;
    r.bits_per_token = lm.bits_per_token;
    r.token_accuracy = lm.token_accuracy;
    return r;
}

std::string epoch_record_line(const EpochRecord& r) {
    char auc[32];
    if (r.val_auc < 0.0)
        std::snprintf(auc, sizeof auc, "undefined");
    else
        std::snprintf(auc, sizeof auc, "%.10g", r.val_auc);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "epoch=%zu train_loss=%.10g val_loss=%.10g val_acc=%.10g val_macro_f1=%.10g "
                  "val_auc=%s n_examples=%zu",
                  r.epoch, r.train_loss, r.val_loss, r.val_accuracy, r.val_macro_f1, auc,
                  r.n_examples);
    return buf;
}

TrainResult train_loop(Model model, const std::vector<Example>& train,
                       const std::vector<Example>& val, const TrainConfig& cfg,
                       std::ostream* metrics_log, std::ostream* console) {
    cfg.validate();
    if (train.empty() || val.empty()) throw DataError("train_loop: empty dataset");

    AdamState adam;
    if (cfg.optimizer == Optimizer::adam) adam = make_adam_state(model);
    Rng dropout_rng(mix_seed(cfg.seed, 0x9e37));

    TrainResult result;
    result.best_metric = -1.0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto batches = make_batches(train, cfg.max_len, cfg.batch_size, kPadId,
                                          mix_seed(cfg.seed, epoch), /*shuffle=*/true);
        double loss_sum = 0.0;
        std::size_t n_batches = 0, n_examples = 0;
        for (const Batch& b : batches) {
            // rebuild per-example views from the padded rows and true lengths
            std::vector<Example> owned(b.rows.size());
            std::vector<const Example*> view(b.rows.size());
            for (std::size_t i = 0; i < b.rows.size(); ++i) {
                owned[i].tokens.assign(b.rows[i].begin(),
                                       b.rows[i].begin() + static_cast<long>(b.lengths[i]));
                owned[i].label = b.labels[i];
                view[i] = &owned[i];
            }
            Gradients grads = zero_gradients(model);
            const double batch_loss =
                batch_forward_backward(model, view, cfg.max_len, dropout_rng, grads);
            if (!std::isfinite(batch_loss))
                throw NumericError("train_loop: non-finite loss at epoch " +
                                   std::to_string(epoch));
            if (cfg.clip_norm > 0.0) clip_by_global_norm(grads, cfg.clip_norm);
            if (cfg.optimizer == Optimizer::adam)
                adam_step(model, grads, adam, cfg.lr, cfg.weight_decay);
            else
                sgd_step(model, grads, cfg.lr, cfg.weight_decay);
            loss_sum += batch_loss * static_cast<double>(b.rows.size());
            ++n_batches;
            n_examples += b.rows.size();
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n_examples);
        rec.n_examples = n_examples;
        const EvalReport vr = evaluate(model, val, cfg.max_len);
        rec.val_accuracy = vr.accuracy;
        rec.val_macro_f1 = vr.macro_f1;
        rec.val_auc = vr.roc_auc ? *vr.roc_auc : -1.0;
        rec.val_loss = vr.loss;
        rec.t_epoch_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const std::string line = epoch_record_line(rec);
        if (metrics_log) *metrics_log << line << "\n" << std::flush;
        if (console) {
            const Throughput tp = throughput(n_examples, cfg.max_len, rec.t_epoch_s);
            char timing[128];
            std::snprintf(timing, sizeof timing, " t_epoch_s=%.3f ex_per_s=%.1f tok_per_s=%.1f",
                          rec.t_epoch_s, tp.examples_per_sec, tp.tokens_per_sec);
            *console << line << timing << "\n" << std::flush;
        }
        result.records.push_back(rec);

        const double metric = cfg.early_stop_metric == EarlyStopMetric::val_acc
                                  ? rec.val_accuracy
                                  : rec.val_macro_f1;
        if (metric > result.best_metric) {
            result.best_metric = metric;
            result.best_epoch = epoch;
            result.best = model;
        }
        if (cfg.stop_at_val_acc > 0.0 && rec.val_accuracy >= cfg.stop_at_val_acc) break;
    }
    return result;
}

}  // namespace qlrnn
