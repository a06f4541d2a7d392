#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qlrnn/checkpoint.hpp"
#include "qlrnn/config.hpp"
#include "qlrnn/errors.hpp"
#include "qlrnn/metrics.hpp"
#include "qlrnn/network.hpp"
#include "qlrnn/training.hpp"

namespace fs = std::filesystem;
using namespace qlrnn;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string checkpoint_path;
    std::string data_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string split = "val";
};

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg = parse_run_config(args.config_path);
    if (args.seed) cfg.train.seed = *args.seed;
    if (!args.data_path.empty()) {
        cfg.data = DataSource::jsonl;
        cfg.data_path = args.data_path;
    }
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    return cfg;
}

int cmd_train(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    auto [train, val] = load_dataset(cfg);
    Model model = make_model(cfg.model, cfg.train.seed, cfg.forget_bias_one);

    fs::create_directories(cfg.out_dir);
    std::ofstream log(fs::path(cfg.out_dir) / "metrics.log");
    if (!log) throw DataError("cannot write metrics log in '" + cfg.out_dir + "'");

    TrainResult result = train_loop(std::move(model), train, val, cfg.train, &log, &std::cout);
    save_checkpoint_file(result.best, (fs::path(cfg.out_dir) / "checkpoint.txt").string());

    const EvalReport report = evaluate(result.best, val, cfg.train.max_len);
    std::ofstream rep(fs::path(cfg.out_dir) / "eval_val.txt");
    write_report(report, rep);
    std::cout << "best_epoch=" << result.best_epoch << "\n";
    write_report(report, std::cout);
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    if (args.checkpoint_path.empty()) throw ConfigError("eval needs --checkpoint");
    Model model = load_checkpoint_file(args.checkpoint_path);
    RunConfig cfg = load_config(args);
    if (cfg.model.vocab_size != model.spec.vocab_size)
        throw DataError("config vocab_size " + std::to_string(cfg.model.vocab_size) +
                        " does not match checkpoint vocab_size " +
                        std::to_string(model.spec.vocab_size));
    auto [train, val] = load_dataset(cfg);
    std::vector<Example> data;
    if (args.split == "train") data = train;
    else if (args.split == "val") data = val;
    else {
        data = train;
        data.insert(data.end(), val.begin(), val.end());
    }
    const EvalReport report = evaluate(model, data, cfg.train.max_len);
    write_report(report, std::cout);
    return 0;
}

int cmd_params(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    Model model = make_model(cfg.model, cfg.train.seed, cfg.forget_bias_one);

    std::size_t enumerated = 0;
    std::printf("%-16s %8s %8s %12s\n", "tensor", "rows", "cols", "count");
    for_each_tensor(static_cast<const Model&>(model),
                    [&](const std::string& name, const Matrix& t) {
                        std::printf("%-16s %8zu %8zu %12zu\n", name.c_str(), t.rows, t.cols,
                                    t.size());
                        enumerated += t.size();
                    });

    const CellParamCount cell = count_cell_params(cfg.model);
    const std::size_t head =
        cfg.model.head_out_dim() * cfg.model.head_in_dim() + cfg.model.head_out_dim();
    const std::size_t closed =
        cfg.model.vocab_size * cfg.model.d_emb + cell.closed_form + head;
    const std::size_t counted = count_params(model);
    if (counted != enumerated || counted != closed)
        throw NumericError("cmd_params: enumerated count disagrees with closed form");

    std::printf("cell_enumerated=%zu\n", cell.enumerated);
    std::printf("cell_closed_form=%zu\n", cell.closed_form);
    std::printf("total_enumerated=%zu\n", enumerated);
    std::printf("total_closed_form=%zu\n", closed);
    std::printf("model_size_mb_f32=%.2f\n", model_size_mb(counted, 4));
    std::printf("model_size_mb_f64=%.2f\n", model_size_mb(counted, 8));
    return 0;
}

int cmd_gradflow(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    if (cfg.model.d_h > 16) throw ConfigError("gradflow requires d_h <= 16");
    if (cfg.seq_len > 64 || cfg.seq_len < 2)
        throw ConfigError("gradflow requires 2 <= seq_len <= 64");

    Model model = make_model(cfg.model, cfg.train.seed, cfg.forget_bias_one);
    if (cfg.clamp_forget > 0.0) {
        if (cfg.clamp_style == "live") {
            Rng crng(mix_seed(cfg.train.seed, 0xc1a));
            clamp_gates_live_input(model, cfg.clamp_forget, crng);
        } else {
            clamp_gates(model, cfg.clamp_forget);
        }
    }

    Rng rng(mix_seed(cfg.train.seed, 0xf10d));
    std::vector<int> tokens(cfg.seq_len);
    for (auto& t : tokens) t = static_cast<int>(rng.below(cfg.model.vocab_size));
    const GradientFlowProfile prof = gradient_flow_profile(model, tokens, 0);
    const std::vector<double>& col =
        cfg.gradflow_norm == "input" ? prof.dx_norm : prof.cell_ratio;

    std::ostringstream csv;
    csv << "distance,norm" << (cfg.analytic_column ? ",analytic" : "") << "\n";
    for (std::size_t d = 0; d < col.size(); ++d) {
        csv << d << "," << format_double(col[d]);
        if (cfg.analytic_column) {
            if (!(cfg.clamp_forget > 0.0))
                throw ConfigError("analytic_column requires clamp_forget");
            const double f = std::min(cfg.clamp_forget, sigmoid_scalar(50.0));
            csv << "," << format_double(std::pow(f, static_cast<double>(d)));
        }
        csv << "\n";
    }
    std::cout << csv.str();
    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        std::ofstream f(fs::path(cfg.out_dir) / "gradflow.csv");
        f << csv.str();
    }
    return 0;
}

int cmd_bench(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    std::vector<Arch> archs = cfg.bench_archs;
    if (archs.empty()) archs.push_back(cfg.model.arch);
    auto [train, val] = load_dataset(cfg);
    const std::size_t n = std::min<std::size_t>(cfg.bench_examples, train.size());

    std::printf("%-10s %12s %12s %14s %14s %14s\n", "arch", "ex_per_s", "tok_per_s", "cell_macs",
                "skip_macs", "approx_peak_b");
    for (Arch a : archs) {
        ModelSpec spec = cfg.model;
        spec.arch = a;
        Model model = make_model(spec, cfg.train.seed, cfg.forget_bias_one);
        Rng rng(mix_seed(cfg.train.seed, 7));
        SequenceCache cache;
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<int> toks = train[i].tokens;
            if (toks.size() > cfg.train.max_len) toks.resize(cfg.train.max_len);
            Matrix logits = forward(model, toks, Mode::train, rng, cache);
            auto [loss, dlogits] = cross_entropy(logits, train[i].label);
            Gradients grads = zero_gradients(model);
            backward(model, cache, dlogits, grads);
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const Throughput tp = throughput(n, cfg.train.max_len, secs);
        const StepCost cost = analytic_step_cost(spec);
        std::printf("%-10s %12.2f %12.1f %14zu %14zu %14zu\n", to_string(a), tp.examples_per_sec,
                    tp.tokens_per_sec, cost.cell_macs, cost.skip_macs_amortized,
                    approx_peak_bytes(model, cfg.train.max_len));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qlrnn: recurrent sequence-modeling engine (QL-LSTM and baselines)"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* sub, bool need_config = true) {
        auto* opt = sub->add_option("--config", args.config_path, "run configuration file");
        if (need_config) opt->required();
        sub->add_option("--checkpoint", args.checkpoint_path, "checkpoint file");
        sub->add_option("--data", args.data_path, "jsonl dataset override");
        sub->add_option("--out", args.out_dir, "output directory override");
        sub->add_option("--seed", args.seed, "seed override");
    };

    auto* train = app.add_subcommand("train", "train a model from a config");
    add_common(train);
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval);
    eval->add_option("--split", args.split, "train|val|all (default val)");
    auto* params = app.add_subcommand("params", "per-tensor parameter accounting");
    add_common(params);
    auto* gradflow = app.add_subcommand("gradflow", "gradient decay curve (CSV)");
    add_common(gradflow);
    auto* bench = app.add_subcommand("bench", "throughput and analytic op counts");
    add_common(bench);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(args);
        if (eval->parsed()) return cmd_eval(args);
        if (params->parsed()) return cmd_params(args);
        if (gradflow->parsed()) return cmd_gradflow(args);
        if (bench->parsed()) return cmd_bench(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
