#include "qlrnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "qlrnn/errors.hpp"

namespace qlrnn {

namespace {
constexpr double kEps = 1e-12;  // denominator stabilizer for P/R/F1
}

ConfusionCounts confusion_counts(const std::vector<int>& preds, const std::vector<int>& labels,
                                 std::size_t n_classes) {
    if (preds.size() != labels.size())
        throw DataError("confusion_counts: preds/labels length mismatch");
    ConfusionCounts cc;
    cc.tp.assign(n_classes, 0);
    cc.fp.assign(n_classes, 0);
    cc.fn.assign(n_classes, 0);
    cc.tn.assign(n_classes, 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (std::size_t c = 0; c < n_classes; ++c) {
            const bool is_c = labels[i] == static_cast<int>(c);
            const bool said_c = preds[i] == static_cast<int>(c);
            if (is_c && said_c) cc.tp[c]++;
            else if (!is_c && said_c) cc.fp[c]++;
            else if (is_c && !said_c) cc.fn[c]++;
            else cc.tn[c]++;
        }
    }
    return cc;
}

EvalReport classification_report(const std::vector<int>& preds,
                                 const std::vector<double>& pos_probs,
                                 const std::vector<int>& labels, std::size_t n_classes) {
    if (preds.empty()) throw DataError("classification_report: empty input");
    if (preds.size() != labels.size())
        throw DataError("classification_report: preds/labels length mismatch");
    if (!pos_probs.empty() && pos_probs.size() != labels.size())
        throw DataError("classification_report: pos_probs length mismatch");

    EvalReport r;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == labels[i]) ++correct;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());

    const ConfusionCounts cc = confusion_counts(preds, labels, n_classes);
    r.precision.resize(n_classes);
    r.recall.resize(n_classes);
    r.f1.resize(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        const double tp = static_cast<double>(cc.tp[c]);
        r.precision[c] = tp / (tp + static_cast<double>(cc.fp[c]) + kEps);
        r.recall[c] = tp / (tp + static_cast<double>(cc.fn[c]) + kEps);
        r.f1[c] = 2.0 * r.precision[c] * r.recall[c] / (r.precision[c] + r.recall[c] + kEps);
    }
    r.macro_precision = std::accumulate(r.precision.begin(), r.precision.end(), 0.0) /
                        static_cast<double>(n_classes);
    r.macro_recall =
        std::accumulate(r.recall.begin(), r.recall.end(), 0.0) / static_cast<double>(n_classes);
    r.macro_f1 = std::accumulate(r.f1.begin(), r.f1.end(), 0.0) / static_cast<double>(n_classes);

    if (!pos_probs.empty() && n_classes == 2) {
        const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
        const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
        if (has0 && has1) r.roc_auc = roc_auc(pos_probs, labels);
    }
    return r;
}

double roc_auc(const std::vector<double>& pos_probs, const std::vector<int>& labels) {
    if (pos_probs.size() != labels.size()) throw DataError("roc_auc: length mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int y : labels) (y == 1 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw DataError("roc_auc undefined: only one class present");

    // Midrank formulation: AUC = (sum of positive ranks - n_pos(n_pos+1)/2) / (n_pos n_neg).
    std::vector<std::size_t> idx(labels.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return pos_probs[a] < pos_probs[b]; });
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && pos_probs[idx[j]] == pos_probs[idx[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]] == 1) pos_rank_sum += midrank;
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

Throughput throughput(std::size_t n_examples, std::size_t seq_len, double t_epoch_sec) {
    if (!(t_epoch_sec > 0.0)) throw NumericError("throughput: epoch time must be > 0");
    Throughput t;
    t.examples_per_sec = static_cast<double>(n_examples) / t_epoch_sec;
    t.tokens_per_sec = static_cast<double>(n_examples) * static_cast<double>(seq_len) / t_epoch_sec;
    return t;
}

LmMetrics lm_metrics(double mean_nll, std::size_t hits, std::size_t total_tokens) {
    LmMetrics m;
    m.perplexity = std::exp(mean_nll);
    m.bits_per_token = mean_nll / std::log(2.0);
    m.token_accuracy =
        total_tokens == 0 ? 0.0
                          : static_cast<double>(hits) / static_cast<double>(total_tokens);
    return m;
}

void write_report(const EvalReport& r, std::ostream& out) {
    char buf[64];
    auto put = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        out << key << "=" << buf << "\n";
    };
    put("accuracy", r.accuracy);
    for (std::size_t c = 0; c < r.precision.size(); ++c) {
        std::string sc = std::to_string(c);
        put(("precision_" + sc).c_str(), r.precision[c]);
        put(("recall_" + sc).c_str(), r.recall[c]);
        put(("f1_" + sc).c_str(), r.f1[c]);
    }
    put("macro_precision", r.macro_precision);
    put("macro_recall", r.macro_recall);
    put("macro_f1", r.macro_f1);
    if (r.roc_auc)
        put("roc_auc", *r.roc_auc);
    else
        out << "roc_auc=undefined\n";
    if (r.examples_per_sec > 0.0) {
        put("examples_per_sec", r.examples_per_sec);
        put("tokens_per_sec", r.tokens_per_sec);
    }
    if (r.perplexity > 0.0) {
        put("loss", r.loss);
        put("perplexity", r.perplexity);
        put("bits_per_token", r.bits_per_token);
        put("token_accuracy", r.token_accuracy);
    }
}

std::string report_to_string(const EvalReport& r) {
    std::ostringstream os;
    write_report(r, os);
    return os.str();
}

}  // namespace qlrnn
