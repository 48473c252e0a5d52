#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "gzsl/common.hpp"
#include "gzsl/hierarchy.hpp"

namespace gzsl {

struct Document {
    std::string id;
    std::vector<int> tokens;
    std::vector<std::string> labels;  // sorted, deduplicated
    std::string group;                // empty = ungrouped
};

// Raw line record before tokenization / label filtering.
struct RawRecord {
    std::string id;
    std::string text;
    std::vector<std::string> labels;
    std::string group;
    std::string split;  // optional explicit assignment: train / valid / test
};

// Shared between input text and label descriptions; row 0 = padding (all-zero),
// row 1 = unknown.
struct EmbeddingTable {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    std::vector<std::string> tokens;  // tokens[0] = "<pad>", tokens[1] = "<unk>"
    std::unordered_map<std::string, int> index;
    Mat vectors;  // |vocab| x d

    int dim() const { return static_cast<int>(vectors.cols()); }
    int lookup(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? kUnk : it->second;
    }
    std::uint64_t vocab_hash() const;
};

struct TokenizerOptions {
    std::size_t min_token_len = 2;
    std::size_t max_doc_tokens = 2500;
};

std::vector<std::string> tokenize(const std::string& text, const TokenizerOptions& opt = {});

// Vocabulary from corpus + label descriptions, sorted for stable ids; vectors
// from `pretrained` where present, else seeded gaussian (scaled 0.1).
EmbeddingTable build_embedding_table(const std::vector<std::vector<std::string>>& token_lists,
                                     int dim,
                                     const std::unordered_map<std::string, Vec>* pretrained,
                                     std::uint64_t seed);

// Text word-vector format: first line "|vocab| d", then "token v_1 ... v_d".
std::unordered_map<std::string, Vec> load_word_vectors(const std::string& path, int& dim_out);
void save_word_vectors(const std::string& path, const std::vector<std::string>& tokens, const Mat& vectors);

// ---- corpus ingestion ---------------------------------------------------------

// Line-delimited JSON records: {"id","text","labels",["group"],["split"]}.
std::vector<RawRecord> read_corpus_file(const std::string& path);
void write_corpus_file(const std::string& path, const std::vector<RawRecord>& records);

struct SplitSpec {
    double train = 0.8, valid = 0.1, test = 0.1;
    std::uint64_t seed = 0;
    // honor per-record split fields when every record carries one
    bool allow_explicit = true;
};

struct Splits {
    std::vector<std::size_t> train, valid, test;  // indices into the record list
};

Splits build_splits(const std::vector<RawRecord>& records, const SplitSpec& spec);

// ---- keywords -------------------------------------------------------------------

struct Keyword {
    int token;
    double score;  // cosine(emb[token], v_l)
};

// Top-k distinct document tokens by cosine to v_l; ties by token id.  PAD/UNK
// never qualify.
std::vector<Keyword> extract_keywords(const std::vector<int>& doc_tokens, const Vec& v_l,
                                      const Mat& embeddings, int k);

}  // namespace gzsl
