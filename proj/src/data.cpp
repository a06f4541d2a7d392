#include "qlrnn/data.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "qlrnn/errors.hpp"
#include "qlrnn/rng.hpp"

namespace qlrnn {

std::vector<int> tokenize_bytes(const std::string& text) {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<int>(c));
    return ids;
}

std::string detokenize_bytes(const std::vector<int>& ids) {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id > 255) throw DataError("detokenize_bytes: non-byte id " + std::to_string(id));
        out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
    }
    return out;
}

std::pair<std::vector<Example>, std::vector<Example>> split_train_val(
    const std::vector<Example>& examples, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw DataError("split_train_val: ratio must be in (0,1)");
    if (examples.size() < 2) throw DataError("split_train_val: need at least 2 examples");
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(examples.size()) * ratio + 1e-9));
    std::pair<std::vector<Example>, std::vector<Example>> out;
    out.first.reserve(n_train);
    out.second.reserve(examples.size() - n_train);
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_train ? out.first : out.second).push_back(examples[order[i]]);
    return out;
}

std::vector<Batch> make_batches(const std::vector<Example>& examples, std::size_t max_len,
                                std::size_t batch_size, int pad_id, std::uint64_t seed,
                                bool shuffle) {
    if (batch_size < 1) throw DataError("make_batches: batch_size must be >= 1");
    if (max_len < 1) throw DataError("make_batches: max_len must be >= 1");
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (shuffle) {
        Rng rng(seed);
        rng.shuffle(order);
    }
    std::vector<Batch> batches;
    for (std::size_t at = 0; at < order.size(); at += batch_size) {
        Batch b;
        const std::size_t end = std::min(at + batch_size, order.size());
        for (std::size_t i = at; i < end; ++i) {
            const Example& ex = examples[order[i]];
            std::vector<int> row(max_len, pad_id);
            const std::size_t len = std::min(ex.tokens.size(), max_len);  // keep the head
            for (std::size_t t = 0; t < len; ++t) row[t] = ex.tokens[t];
            b.rows.push_back(std::move(row));
            b.lengths.push_back(len);
            b.labels.push_back(ex.label);
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

std::vector<Example> gen_distant_token_task(std::size_t n, std::size_t L, std::size_t gap,
                                            std::uint64_t seed) {
    if (gap >= L) throw DataError("gen_distant_token_task: gap must be < L");
    Rng rng(seed);
    const std::size_t marker_pos = L - 1 - gap;
    std::vector<Example> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Example ex;
        ex.label = static_cast<int>(i % 2);  // alternating labels: balanced within +-1
        ex.tokens.resize(L);
        for (std::size_t t = 0; t < L; ++t) {
            int tok;
            do {
                tok = static_cast<int>(rng.below(256));
            } while (tok == kMarkerClass0 || tok == kMarkerClass1);
            ex.tokens[t] = tok;
        }
        ex.tokens[marker_pos] = ex.label == 0 ? kMarkerClass0 : kMarkerClass1;
        out.push_back(std::move(ex));
    }
    return out;
}

std::pair<std::vector<Example>, std::vector<AddingRecord>> gen_adding_problem(
    std::size_t n, std::size_t L, std::uint64_t seed) {
    if (L < 2) throw DataError("gen_adding_problem: L must be >= 2");
    Rng rng(seed);
    std::vector<Example> out;
    std::vector<AddingRecord> recs;
    out.reserve(n);
    recs.reserve(n);
    auto quantize = [](double v) { return static_cast<int>(std::min(127.0, std::floor(v * 128.0))); };
    for (std::size_t i = 0; i < n; ++i) {
        const int want = static_cast<int>(i % 2);
        AddingRecord rec;
        // rejection-sample the two marked values until the label matches
        do {
            rec.v_a = rng.uniform();
            rec.v_b = rng.uniform();
            rec.label = rec.v_a + rec.v_b > 1.0 ? 1 : 0;
        } while (rec.label != want);
        const std::size_t half = L / 2;
        rec.pos_a = static_cast<std::size_t>(rng.below(half));
        rec.pos_b = half + static_cast<std::size_t>(rng.below(L - half));
        Example ex;
        ex.label = rec.label;
        ex.tokens.resize(L);
        for (std::size_t t = 0; t < L; ++t) ex.tokens[t] = quantize(rng.uniform());
        ex.tokens[rec.pos_a] = quantize(rec.v_a) + 128;
        ex.tokens[rec.pos_b] = quantize(rec.v_b) + 128;
        out.push_back(std::move(ex));
        recs.push_back(rec);
    }
    return {std::move(out), std::move(recs)};
}

std::vector<Example> load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read dataset '" + path + "'");
    std::vector<Example> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        if (!j.contains("text") || !j["text"].is_string())
            throw DataError(path + ":" + std::to_string(line_no) + ": missing string field 'text'");
        if (!j.contains("label") || !j["label"].is_number_integer())
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": missing integer field 'label'");
        Example ex;
        ex.raw_text = j["text"].get<std::string>();
        ex.label = j["label"].get<int>();
        ex.tokens = tokenize_bytes(ex.raw_text);
        if (ex.tokens.empty())
            throw DataError(path + ":" + std::to_string(line_no) + ": empty 'text'");
        if (ex.label < 0)
            throw DataError(path + ":" + std::to_string(line_no) + ": negative 'label'");
        out.push_back(std::move(ex));
    }
    return out;
}

void save_jsonl(const std::vector<Example>& examples, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset '" + path + "'");
    for (const Example& ex : examples) {
        nlohmann::json j;
        j["text"] = ex.raw_text.empty() ? detokenize_bytes(ex.tokens) : ex.raw_text;
        j["label"] = ex.label;
        // bytes outside valid UTF-8 are replaced; the format carries text
        out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << "\n";
    }
}

}  // namespace qlrnn
