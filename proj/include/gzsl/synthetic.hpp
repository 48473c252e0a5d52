#pragma once

#include <map>
#include <string>
#include <vector>

#include "gzsl/common.hpp"
#include "gzsl/corpus.hpp"

namespace gzsl {

// Parametric label tree + topic-word corpus for desk-scale verification.  Codes
// are "F<i>" (family parents) and "F<i>C<j>" (children).  Children of a family
// share `shared_topics_per_family` topic words and own `own_topics_per_code`
// each, so sibling Jaccard = s / (s + 2*o) by construction.
struct SyntheticSpec {
    int embedding_dim = 32;
    int filler_vocab = 300;
    int doc_length = 100;
    int topic_repeats = 2;
    int families = 8;
    int children_per_family = 4;
    int shared_topics_per_family = 6;
    int own_topics_per_code = 3;
    std::vector<std::string> zero_shot;       // appear in valid/test only
    std::map<std::string, long> few_shot;     // code -> train count (1..5)
    int train_docs = 1600;
    int valid_docs = 250;
    int test_docs = 250;
    int eval_docs_per_special_code = 15;      // per split, for zero/few-shot codes
    double second_label_prob = 0.3;

    static SyntheticSpec from_json_file(const std::string& path);
};

struct SyntheticOutput {
    std::string hierarchy_path;
    std::string corpus_path;
    std::string embedding_path;
};

// Deterministic under (spec, seed): reruns emit byte-identical files.
SyntheticOutput generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed,
                                          const std::string& out_dir);

}  // namespace gzsl
