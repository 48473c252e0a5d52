#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gzsl/common.hpp"

namespace gzsl {

struct LabelNode {
    std::string code;
    std::string description;                // raw text from the hierarchy file
    std::vector<int> description_tokens;    // filled once a vocabulary exists
    std::optional<std::string> parent;
    std::vector<std::string> children;      // sorted
    long train_count = 0;                   // n_l
};

// Immutable after load; any number of readers may share it.
struct LabelHierarchy {
    std::vector<std::string> codes;                    // sorted; index == label id
    std::unordered_map<std::string, int> code_index;
    std::vector<LabelNode> nodes;                      // parallel to codes

    std::vector<int> seen;       // n_l >= 1
    std::vector<int> zero_shot;  // n_l == 0
    std::vector<int> few_shot;   // 1 <= n_l <= 5

    const LabelNode& node(const std::string& code) const;
    const LabelNode& node(int id) const { return nodes[static_cast<std::size_t>(id)]; }
    int id(const std::string& code) const;
    std::size_t size() const { return nodes.size(); }

    bool is_seen(int id) const { return nodes[static_cast<std::size_t>(id)].train_count > 0; }

    // parent + children, undirected reading of the tree adjacency
    std::vector<int> neighbors(int id) const;

    // root-to-node ancestor chain (closest last)
    std::vector<int> ancestors(int id) const;

    void set_counts(const std::map<std::string, long>& counts);  // recomputes cohorts
};

// File format: UTF-8 lines "code \t parent \t description" (empty parent = root).
LabelHierarchy load_hierarchy(const std::string& path, const std::map<std::string, long>& counts);
LabelHierarchy parse_hierarchy(const std::vector<std::array<std::string, 3>>& records,
                               const std::map<std::string, long>& counts);

// v_l: arithmetic mean of the description word embeddings.
Vec label_embedding(const std::vector<int>& description_tokens, const Mat& embeddings);

// Nearest seen sibling of a zero-shot code: seen codes sharing l's parent, argmax
// cosine(v_l, v_sib), ties by code id; if none, walk up ancestors and take the
// max-cosine seen code in the first ancestor subtree that has one.  nullopt when
// no seen code is reachable (caller skips l).
std::optional<int> nearest_sibling(int id, const LabelHierarchy& h, const Mat& label_embeddings);

}  // namespace gzsl
