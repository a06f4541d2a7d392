#include "qlrnn/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "qlrnn/errors.hpp"

namespace qlrnn {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw DataError("checkpoint: bad numeric literal '" + s + "'");
    return v;
}

void save_checkpoint(const Model& m, std::ostream& out) {
    const ModelSpec& s = m.spec;
    out << "qlrnn-checkpoint v1\n";
    out << "arch = " << to_string(s.arch) << "\n";
    out << "task = " << to_string(s.task) << "\n";
    out << "d_emb = " << s.d_emb << "\n";
    out << "d_h = " << s.d_h << "\n";
    out << "K = " << s.K << "\n";
    out << "pooling = " << to_string(s.pooling) << "\n";
    out << "skip_variant = " << to_string(s.skip_variant) << "\n";
    out << "vocab_size = " << s.vocab_size << "\n";
    out << "n_classes = " << s.n_classes << "\n";
    out << "dropout = " << format_double(s.dropout) << "\n";
    out << "readout = " << to_string(s.readout) << "\n";
    out << "flush_partial = " << (s.flush_partial ? 1 : 0) << "\n";
    out << "init_seed = " << m.init.seed << "\n";
    out << "init_scheme = " << m.init.scheme << "\n";
    out << "forget_bias_one = " << (m.init.forget_bias_one ? 1 : 0) << "\n";
    for_each_tensor(m, [&](const std::string& name, const Matrix& t) {
        out << "tensor " << name << " " << t.rows << " " << t.cols << "\n";
        for (std::size_t i = 0; i < t.rows; ++i) {
            for (std::size_t j = 0; j < t.cols; ++j) {
                if (j) out << " ";
                out << format_double(t(i, j));
            }
            out << "\n";
        }
    });
    out << "end\n";
}

void save_checkpoint_file(const Model& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    save_checkpoint(m, out);
}

namespace {

std::string expect_value(std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError("checkpoint: missing field '" + key + "'");
    return it->second;
}

}  // namespace

Model load_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "qlrnn-checkpoint v1")
        throw DataError("checkpoint: bad header");

    std::map<std::string, std::string> kv;
    std::streampos tensor_start;
    while (true) {
        tensor_start = in.tellg();
        if (!std::getline(in, line)) throw DataError("checkpoint: truncated header");
        if (line.rfind("tensor ", 0) == 0) break;
        auto eq = line.find(" = ");
        if (eq == std::string::npos) throw DataError("checkpoint: bad header line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }

    ModelSpec spec;
    spec.arch = arch_from_string(expect_value(kv, "arch"));
    spec.task = task_from_string(expect_value(kv, "task"));
    spec.d_emb = std::stoull(expect_value(kv, "d_emb"));
    spec.d_h = std::stoull(expect_value(kv, "d_h"));
    spec.K = std::stoull(expect_value(kv, "K"));
    spec.pooling = pooling_from_string(expect_value(kv, "pooling"));
    spec.skip_variant = skip_variant_from_string(expect_value(kv, "skip_variant"));
    spec.vocab_size = std::stoull(expect_value(kv, "vocab_size"));
    spec.n_classes = std::stoull(expect_value(kv, "n_classes"));
    spec.dropout = parse_double(expect_value(kv, "dropout"));
    spec.readout = readout_from_string(expect_value(kv, "readout"));
    spec.flush_partial = expect_value(kv, "flush_partial") == "1";

    Model m = make_model(spec, std::stoull(expect_value(kv, "init_seed")));
    m.init.scheme = expect_value(kv, "init_scheme");
    m.init.forget_bias_one = expect_value(kv, "forget_bias_one") == "1";

    in.seekg(tensor_start);
    for_each_tensor(m, [&](const std::string& name, Matrix& t) {
        if (!std::getline(in, line)) throw DataError("checkpoint: missing tensor " + name);
        std::istringstream hdr(line);
        std::string tag, got;
        std::size_t rows = 0, cols = 0;
        hdr >> tag >> got >> rows >> cols;
        if (tag != "tensor" || got != name)
            throw DataError("checkpoint: expected tensor '" + name + "', got '" + line + "'");
        if (rows != t.rows || cols != t.cols)
            throw DataError("checkpoint: tensor '" + name + "' has wrong shape");
        for (std::size_t i = 0; i < rows; ++i) {
            if (!std::getline(in, line)) throw DataError("checkpoint: truncated tensor " + name);
            std::istringstream row(line);
            std::string tok;
            for (std::size_t j = 0; j < cols; ++j) {
                if (!(row >> tok)) throw DataError("checkpoint: short row in tensor " + name);
                t(i, j) = parse_double(tok);
            }
        }
    });
    if (!std::getline(in, line) || line != "end") throw DataError("checkpoint: missing 'end'");
    return m;
}

Model load_checkpoint_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read checkpoint '" + path + "'");
    return load_checkpoint(in);
}

}  // namespace qlrnn
