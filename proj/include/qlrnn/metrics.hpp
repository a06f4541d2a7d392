#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qlrnn {

// One-vs-rest confusion totals per class; TP+FP+FN+TN == N for each class.
struct ConfusionCounts {
    std::vector<std::size_t> tp, fp, fn, tn;
};

struct EvalReport {
    double accuracy = 0.0;
    std::vector<double> precision, recall, f1;  // per class
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    std::optional<double> roc_auc;  // absent when undefined (one class present)
    // throughput (filled by callers that timed something)
    double examples_per_sec = 0.0, tokens_per_sec = 0.0;
    // language-modeling slice
    double loss = 0.0, perplexity = 0.0, bits_per_token = 0.0, token_accuracy = 0.0;
};

ConfusionCounts confusion_counts(const std::vector<int>& preds, const std::vector<int>& labels,
                                 std::size_t n_classes);

// Accuracy, epsilon-guarded per-class precision/recall/F1 and their macro
// means. pos_probs may be empty; when it holds P(class 1) and both classes
// appear, roc_auc is filled in.
EvalReport classification_report(const std::vector<int>& preds,
                                 const std::vector<double>& pos_probs,
                                 const std::vector<int>& labels, std::size_t n_classes);

// Rank-statistic ROC-AUC with half credit for ties; throws DataError when
// only one class is present.
double roc_auc(const std::vector<double>& pos_probs, const std::vector<int>& labels);

struct Throughput {
    double examples_per_sec = 0.0;
    double tokens_per_sec = 0.0;
};
Throughput throughput(std::size_t n_examples, std::size_t seq_len, double t_epoch_sec);

struct LmMetrics {
    double perplexity = 0.0;
    double bits_per_token = 0.0;
    double token_accuracy = 0.0;
};
LmMetrics lm_metrics(double mean_nll, std::size_t hits, std::size_t total_tokens);

// key=value lines, one per populated field; stable key names.
void write_report(const EvalReport& r, std::ostream& out);
std::string report_to_string(const EvalReport& r);

}  // namespace qlrnn
