#include "qlrnn/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "qlrnn/errors.hpp"

namespace qlrnn {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct KeyParser {
    const std::string& origin;

    std::size_t to_count(const std::string& key, const std::string& v) const {
        try {
            std::size_t pos = 0;
            long long n = std::stoll(v, &pos);
            if (pos != v.size() || n < 0) throw std::invalid_argument(v);
            return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
            throw ConfigError(origin + ": key '" + key + "' needs a non-negative integer, got '" +
                              v + "'");
        }
    }
    double to_real(const std::string& key, const std::string& v) const {
        try {
            std::size_t pos = 0;
            double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw ConfigError(origin + ": key '" + key + "' needs a number, got '" + v + "'");
        }
    }
    bool to_bool(const std::string& key, const std::string& v) const {
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw ConfigError(origin + ": key '" + key + "' needs true/false, got '" + v + "'");
    }
    std::uint64_t to_u64(const std::string& key, const std::string& v) const {
        try {
            std::size_t pos = 0;
            unsigned long long n = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return n;
        } catch (const std::exception&) {
            throw ConfigError(origin + ": key '" + key + "' needs an unsigned integer, got '" + v +
                              "'");
        }
    }
};

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    cfg.model.vocab_size = kByteVocab;
    KeyParser p{origin};

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string val = trim(stripped.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key or value");

        try {
            if (key == "arch") cfg.model.arch = arch_from_string(val);
            else if (key == "d_emb") cfg.model.d_emb = p.to_count(key, val);
            else if (key == "d_h") cfg.model.d_h = p.to_count(key, val);
            else if (key == "K") cfg.model.K = p.to_count(key, val);
            else if (key == "pooling") cfg.model.pooling = pooling_from_string(val);
            else if (key == "skip_variant")
                cfg.model.skip_variant = skip_variant_from_string(val);
            else if (key == "vocab_size") cfg.model.vocab_size = p.to_count(key, val);
            else if (key == "n_classes") cfg.model.n_classes = p.to_count(key, val);
            else if (key == "dropout") cfg.model.dropout = p.to_real(key, val);
            else if (key == "task") cfg.model.task = task_from_string(val);
            else if (key == "readout") cfg.model.readout = readout_from_string(val);
            else if (key == "flush_partial") cfg.model.flush_partial = p.to_bool(key, val);
            else if (key == "forget_bias_one") cfg.forget_bias_one = p.to_bool(key, val);
            else if (key == "lr") cfg.train.lr = p.to_real(key, val);
            else if (key == "weight_decay") cfg.train.weight_decay = p.to_real(key, val);
            else if (key == "batch_size") cfg.train.batch_size = p.to_count(key, val);
            else if (key == "max_len") cfg.train.max_len = p.to_count(key, val);
            else if (key == "epochs") cfg.train.epochs = p.to_count(key, val);
            else if (key == "optimizer") {
                if (val == "adam") cfg.train.optimizer = Optimizer::adam;
                else if (val == "sgd") cfg.train.optimizer = Optimizer::sgd;
                else throw ConfigError("unknown optimizer '" + val + "'");
            } else if (key == "clip_norm") cfg.train.clip_norm = p.to_real(key, val);
            else if (key == "seed") cfg.train.seed = p.to_u64(key, val);
            else if (key == "early_stop_metric") {
                if (val == "val_acc") cfg.train.early_stop_metric = EarlyStopMetric::val_acc;
                else if (val == "val_macro_f1")
                    cfg.train.early_stop_metric = EarlyStopMetric::val_macro_f1;
                else throw ConfigError("unknown early_stop_metric '" + val + "'");
            } else if (key == "stop_at_val_acc") cfg.train.stop_at_val_acc = p.to_real(key, val);
            else if (key == "data") {
                if (val == "distant_token") cfg.data = DataSource::distant_token;
                else if (val == "adding") cfg.data = DataSource::adding;
                else if (val == "jsonl") cfg.data = DataSource::jsonl;
                else throw ConfigError("unknown data source '" + val + "'");
            } else if (key == "data_path") cfg.data_path = val;
            else if (key == "n_examples") cfg.n_examples = p.to_count(key, val);
            else if (key == "seq_len") cfg.seq_len = p.to_count(key, val);
            else if (key == "gap") cfg.gap = p.to_count(key, val);
            else if (key == "split_ratio") cfg.split_ratio = p.to_real(key, val);
            else if (key == "out") cfg.out_dir = val;
            else if (key == "archs") {
                std::istringstream list(val);
                std::string item;
                while (std::getline(list, item, ','))
                    cfg.bench_archs.push_back(arch_from_string(trim(item)));
            } else if (key == "bench_examples") cfg.bench_examples = p.to_count(key, val);
            else if (key == "clamp_forget") cfg.clamp_forget = p.to_real(key, val);
            else if (key == "clamp_style") {
                if (val != "dead" && val != "live")
                    throw ConfigError("clamp_style must be dead or live");
                cfg.clamp_style = val;
            } else if (key == "analytic_column") cfg.analytic_column = p.to_bool(key, val);
            else if (key == "gradflow_norm") {
                if (val != "cell" && val != "input")
                    throw ConfigError("gradflow_norm must be cell or input");
                cfg.gradflow_norm = val;
            } else
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" +
                                  key + "'");
        } catch (const ConfigError&) {
            throw;
        }
    }

    cfg.model.validate();
    cfg.train.validate();
    if (!(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0))
        throw ConfigError(origin + ": key 'split_ratio' must be in (0,1)");
    if (cfg.data == DataSource::jsonl && cfg.data_path.empty())
        throw ConfigError(origin + ": key 'data_path' required for data = jsonl");
    if (cfg.data != DataSource::jsonl) {
        if (cfg.n_examples < 2)
            throw ConfigError(origin + ": key 'n_examples' must be >= 2 for synthetic data");
        if (cfg.seq_len < 2) throw ConfigError(origin + ": key 'seq_len' must be >= 2");
        if (cfg.data == DataSource::distant_token && cfg.gap >= cfg.seq_len)
            throw ConfigError(origin + ": key 'gap' must be < seq_len");
    }
    return cfg;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config_text(ss.str(), path);
}

std::pair<std::vector<Example>, std::vector<Example>> load_dataset(const RunConfig& cfg) {
    std::vector<Example> all;
    switch (cfg.data) {
        case DataSource::distant_token:
            all = gen_distant_token_task(cfg.n_examples, cfg.seq_len, cfg.gap, cfg.train.seed);
            break;
        case DataSource::adding:
            all = gen_adding_problem(cfg.n_examples, cfg.seq_len, cfg.train.seed).first;
            break;
        case DataSource::jsonl: all = load_jsonl(cfg.data_path); break;
    }
    for (const Example& ex : all)
        for (int id : ex.tokens)
            if (id < 0 || static_cast<std::size_t>(id) >= cfg.model.vocab_size)
                throw DataError("dataset token id " + std::to_string(id) +
                                " exceeds configured vocab_size " +
                                std::to_string(cfg.model.vocab_size));
    return split_train_val(all, cfg.split_ratio, mix_seed(cfg.train.seed, 0x5eed));
}

}  // namespace qlrnn
