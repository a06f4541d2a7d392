#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qlrnn/data.hpp"
#include "qlrnn/metrics.hpp"
#include "qlrnn/network.hpp"

namespace qlrnn {

enum class Optimizer { sgd, adam };
enum class EarlyStopMetric { val_macro_f1, val_acc };

struct TrainConfig {
    double lr = 3e-4;
    double weight_decay = 0.0;
    std::size_t batch_size = 32;
    std::size_t max_len = 256;
    std::size_t epochs = 5;
    Optimizer optimizer = Optimizer::adam;
    double clip_norm = 5.0;  // <= 0 disables clipping
    std::uint64_t seed = 0;
    EarlyStopMetric early_stop_metric = EarlyStopMetric::val_macro_f1;
    double stop_at_val_acc = 0.0;  // > 0: stop once validation accuracy reaches this

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double t_epoch_s = 0.0;  // wall clock, excluded from the deterministic log
    std::size_t n_examples = 0;
    double val_accuracy = 0.0;
    double val_macro_f1 = 0.0;
    double val_auc = -1.0;  // -1 when undefined
    double val_loss = 0.0;
};

// Log-sum-exp stabilized negative log-likelihood of one logits column.
// Returns (loss, dLoss/dlogits).
std::pair<double, Matrix> cross_entropy(const Matrix& logits, int target);

void sgd_step(Model& m, const Gradients& g, double lr, double weight_decay);

struct AdamState {
    std::vector<Matrix> m1, m2;
    std::int64_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};
AdamState make_adam_state(const Model& m);
// Bias-corrected moments with decoupled weight decay.
void adam_step(Model& m, const Gradients& g, AdamState& st, double lr, double weight_decay);

// Scales all gradients by max_norm/||g|| when the global L2 norm exceeds
// max_norm. Returns the pre-clip norm.
double clip_by_global_norm(Gradients& g, double max_norm);

// Eval-mode metrics over a dataset (deterministic).
EvalReport evaluate(const Model& m, const std::vector<Example>& data, std::size_t max_len);

struct TrainResult {
    Model best;
    std::vector<EpochRecord> records;
    std::size_t best_epoch = 0;  // 1-based
    double best_metric = 0.0;
};

// Per-epoch seeded shuffling, forward/backward/step over batches, validation
// after every epoch, best-model retention by the configured metric. One
// key=value line per epoch goes to metrics_log (deterministic fields only)
// and to console (with wall-clock timing appended) when either is non-null.
TrainResult train_loop(Model model, const std::vector<Example>& train,
                       const std::vector<Example>& val, const TrainConfig& cfg,
                       std::ostream* metrics_log = nullptr, std::ostream* console = nullptr);

std::string epoch_record_line(const EpochRecord& r);  // deterministic fields

}  // namespace qlrnn
