#include "gzsl/hierarchy.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace gzsl {

const LabelNode& LabelHierarchy::node(const std::string& code) const {
    return nodes[static_cast<std::size_t>(id(code))];
}

int LabelHierarchy::id(const std::string& code) const {
    auto it = code_index.find(code);
    if (it == code_index.end()) throw FormatError("unknown code: " + code);
    return it->second;
}

std::vector<int> LabelHierarchy::neighbors(int id) const {
    const auto& n = nodes[static_cast<std::size_t>(id)];
    std::vector<int> out;
    if (n.parent) out.push_back(this->id(*n.parent));
    for (const auto& c : n.children) out.push_back(this->id(c));
    return out;
}

std::vector<int> LabelHierarchy::ancestors(int id) const {
    std::vector<int> chain;
    const LabelNode* cur = &nodes[static_cast<std::size_t>(id)];
    while (cur->parent) {
        const int pid = this->id(*cur->parent);
        chain.push_back(pid);
        cur = &nodes[static_cast<std::size_t>(pid)];
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
}

void LabelHierarchy::set_counts(const std::map<std::string, long>& counts) {
    seen.clear();
    zero_shot.clear();
    few_shot.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        auto it = counts.find(nodes[i].code);
        const long n = it == counts.end() ? 0 : it->second;
        if (n < 0) throw FormatError("negative count for code " + nodes[i].code);
        nodes[i].train_count = n;
        const int id = static_cast<int>(i);
        if (n == 0)
            zero_shot.push_back(id);
        else
            seen.push_back(id);
        if (n >= 1 && n <= 5) few_shot.push_back(id);
    }
}

LabelHierarchy parse_hierarchy(const std::vector<std::array<std::string, 3>>& records,
                               const std::map<std::string, long>& counts) {
    LabelHierarchy h;
    std::set<std::string> codes;
    for (const auto& r : records) {
        if (r[0].empty()) throw FormatError("hierarchy: empty code");
        if (!codes.insert(r[0]).second) throw FormatError("hierarchy: duplicate code '" + r[0] + "'");
        if (r[2].empty()) throw FormatError("hierarchy: missing description for '" + r[0] + "'");
    }
    h.codes.assign(codes.begin(), codes.end());
    for (std::size_t i = 0; i < h.codes.size(); ++i) h.code_index[h.codes[i]] = static_cast<int>(i);
    h.nodes.resize(h.codes.size());
    for (const auto& r : records) {
        LabelNode& n = h.nodes[static_cast<std::size_t>(h.code_index.at(r[0]))];
        n.code = r[0];
        n.description = r[2];
        if (!r[1].empty()) {
            if (!codes.count(r[1]))
                throw FormatError("hierarchy: parent '" + r[1] + "' of '" + r[0] + "' not defined");
            n.parent = r[1];
        }
    }
    for (const auto& n : h.nodes)
        if (n.parent) h.nodes[static_cast<std::size_t>(h.code_index.at(*n.parent))].children.push_back(n.code);
    for (auto& n : h.nodes) std::sort(n.children.begin(), n.children.end());

    // forest check: walking up from any node must terminate without revisits
    for (std::size_t i = 0; i < h.nodes.size(); ++i) {
        std::set<int> visited{static_cast<int>(i)};
        const LabelNode* cur = &h.nodes[i];
        while (cur->parent) {
            const int pid = h.code_index.at(*cur->parent);
            if (!visited.insert(pid).second)
                throw FormatError("hierarchy: cycle detected through '" + h.nodes[i].code + "'");
            cur = &h.nodes[static_cast<std::size_t>(pid)];
        }
    }

    h.set_counts(counts);
    return h;
}

LabelHierarchy load_hierarchy(const std::string& path, const std::map<std::string, long>& counts) {
    std::ifstream in(path);
    if (!in) throw MissingPrerequisite("hierarchy file not found: " + path);
    std::vector<std::array<std::string, 3>> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::array<std::string, 3> rec;
        std::size_t a = line.find('\t');
        std::size_t b = a == std::string::npos ? std::string::npos : line.find('\t', a + 1);
        if (a == std::string::npos || b == std::string::npos)
            throw FormatError("hierarchy: line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
        rec[0] = line.substr(0, a);
        rec[1] = line.substr(a + 1, b - a - 1);
        rec[2] = line.substr(b + 1);
        records.push_back(std::move(rec));
    }
    return parse_hierarchy(records, counts);
}

Vec label_embedding(const std::vector<int>& description_tokens, const Mat& embeddings) {
    if (description_tokens.empty()) throw FormatError("label_embedding: empty description");
    Vec v = Vec::Zero(embeddings.cols());
    for (int t : description_tokens) v += embeddings.row(t).transpose();
    v /= static_cast<double>(description_tokens.size());
    if (!v.allFinite()) throw NumericError("label_embedding: non-finite embedding");
    return v;
}

namespace {

// argmax cosine(v_l, v_c) over candidates, ties to the lexicographically
// smallest code
std::optional<int> best_by_cosine(const Vec& v, const std::vector<int>& candidates,
                                  const LabelHierarchy& h, const Mat& g) {
    std::optional<int> best;
    double best_cos = 0.0;
    for (int c : candidates) {
        const double cs = cosine(v, g.row(c).transpose());
        if (!best || cs > best_cos ||
            (cs == best_cos && h.node(c).code < h.node(*best).code)) {
            best = c;
            best_cos = cs;
        }
    }
    return best;
}

void collect_seen_subtree(const LabelHierarchy& h, int root, int exclude, std::vector<int>& out) {
    if (root != exclude && h.is_seen(root)) out.push_back(root);
    for (const auto& c : h.node(root).children) collect_seen_subtree(h, h.id(c), exclude, out);
}

}  // namespace

std::optional<int> nearest_sibling(int id, const LabelHierarchy& h, const Mat& label_embeddings) {
    const Vec v = label_embeddings.row(id).transpose();
    const auto& n = h.node(id);

    if (n.parent) {
        std::vector<int> sibs;
        for (const auto& c : h.node(*n.parent).children) {
            const int cid = h.id(c);
            if (cid != id && h.is_seen(cid)) sibs.push_back(cid);
        }
        if (!sibs.empty()) return best_by_cosine(v, sibs, h, label_embeddings);
    }

    // walk up: first ancestor whose subtree holds a seen code wins
    auto chain = h.ancestors(id);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        std::vector<int> cands;
        collect_seen_subtree(h, *it, id, cands);
        if (!cands.empty()) return best_by_cosine(v, cands, h, label_embeddings);
    }
    if (!n.parent) {
        // l is a root: its own subtree is the only reachable neighborhood
        std::vector<int> cands;
        collect_seen_subtree(h, id, id, cands);
        if (!cands.empty()) return best_by_cosine(v, cands, h, label_embeddings);
    }
    return std::nullopt;
}

}  // namespace gzsl
