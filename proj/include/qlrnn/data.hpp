#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qlrnn {

// Byte-level token ids: one id per byte (0..255) plus a dedicated pad id.
constexpr int kPadId = 256;
constexpr std::size_t kByteVocab = 257;  // 256 byte values + pad

struct Example {
    std::vector<int> tokens;  // non-empty
    int label = -1;           // class index for classification, -1 for lm
    std::string raw_text;     // optional source text
};

struct Batch {
    std::vector<std::vector<int>> rows;  // batch x max_len, right-padded
    std::vector<std::size_t> lengths;    // true lengths, <= max_len
    std::vector<int> labels;
};

std::vector<int> tokenize_bytes(const std::string& text);
std::string detokenize_bytes(const std::vector<int>& ids);

// Seeded shuffle then prefix split; exact and disjoint.
std::pair<std::vector<Example>, std::vector<Example>> split_train_val(
    const std::vector<Example>& examples, double ratio, std::uint64_t seed);

// Head-truncate to max_len, right-pad shorter rows with pad_id. The last
// batch may be smaller. shuffle=false keeps input order (evaluation).
std::vector<Batch> make_batches(const std::vector<Example>& examples, std::size_t max_len,
                                std::size_t batch_size, int pad_id, std::uint64_t seed,
                                bool shuffle = true);

// Long-range retrieval surrogate: noise everywhere except one marker token
// placed exactly `gap` positions before the final (read) position; the label
// is determined by which marker was planted. Labels balanced within +-1.
std::vector<Example> gen_distant_token_task(std::size_t n, std::size_t L, std::size_t gap,
                                            std::uint64_t seed);

// Marker token ids used by the distant-token generator (class 0 / class 1).
constexpr int kMarkerClass0 = 1;
constexpr int kMarkerClass1 = 2;

struct AddingRecord {
    double v_a = 0.0, v_b = 0.0;   // raw marked values in [0,1]
    std::size_t pos_a = 0, pos_b = 0;
    int label = 0;                 // 1 iff v_a + v_b > 1.0
};

// Two-marked-values sum threshold task, packed into the byte vocabulary:
// unmarked tokens are quantized values in [0,127], marked tokens add 128.
// One marker falls in each half of the sequence; labels balanced within +-1.
std::pair<std::vector<Example>, std::vector<AddingRecord>> gen_adding_problem(
    std::size_t n, std::size_t L, std::uint64_t seed);

// One JSON object per line with "text" (string) and "label" (integer);
// malformed lines are reported with their 1-based line number.
std::vector<Example> load_jsonl(const std::string& path);
void save_jsonl(const std::vector<Example>& examples, const std::string& path);

}  // namespace qlrnn
