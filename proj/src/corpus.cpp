#include "gzsl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gzsl {

using nlohmann::json;

std::uint64_t EmbeddingTable::vocab_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& t : tokens) {
        h = fnv1a64(t, h);
        h = fnv1a64("\x1f", h);
    }
    return h;
}

std::vector<std::string> tokenize(const std::string& text, const TokenizerOptions& opt) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= opt.min_token_len && out.size() < opt.max_doc_tokens) out.push_back(cur);
        cur.clear();
    };
    for (unsigned char ch : text) {
        if (std::isalnum(ch))
            cur.push_back(static_cast<char>(std::tolower(ch)));
        else
            flush();
    }
    flush();
    return out;
}

EmbeddingTable build_embedding_table(const std::vector<std::vector<std::string>>& token_lists,
                                     int dim,
                                     const std::unordered_map<std::string, Vec>* pretrained,
                                     std::uint64_t seed) {
    std::set<std::string> vocab;
    for (const auto& list : token_lists)
        for (const auto& t : list) vocab.insert(t);

    EmbeddingTable table;
    table.tokens = {"<pad>", "<unk>"};
    table.tokens.insert(table.tokens.end(), vocab.begin(), vocab.end());
    for (std::size_t i = 0; i < table.tokens.size(); ++i)
        table.index[table.tokens[i]] = static_cast<int>(i);

    Rng rng(seed);
    table.vectors = Mat::Zero(static_cast<Eigen::Index>(table.tokens.size()), dim);
    for (std::size_t i = 1; i < table.tokens.size(); ++i) {  // row 0 (pad) stays zero
        const Vec* pre = nullptr;
        if (pretrained) {
            auto it = pretrained->find(table.tokens[i]);
            if (it != pretrained->end()) pre = &it->second;
        }
        if (pre) {
            if (pre->size() != dim) throw FormatError("embedding dimension mismatch for '" + table.tokens[i] + "'");
            table.vectors.row(static_cast<Eigen::Index>(i)) = pre->transpose();
        } else {
            table.vectors.row(static_cast<Eigen::Index>(i)) = rng.gaussian_vector(dim, 0.1).transpose();
        }
    }
    return table;
}

std::unordered_map<std::string, Vec> load_word_vectors(const std::string& path, int& dim_out) {
    std::ifstream in(path);
    if (!in) throw MissingPrerequisite("embedding file not found: " + path);
    std::size_t count = 0;
    int dim = 0;
    in >> count >> dim;
    if (!in || dim <= 0) throw FormatError("embedding file: bad header in " + path);
    std::unordered_map<std::string, Vec> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::string token;
        in >> token;
        Vec v(dim);
        for (int j = 0; j < dim; ++j) in >> v(j);
        if (!in) throw FormatError("embedding file: truncated at entry " + std::to_string(i));
        out[token] = std::move(v);
    }
    dim_out = dim;
    return out;
}

void save_word_vectors(const std::string& path, const std::vector<std::string>& tokens, const Mat& vectors) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write embedding file: " + path);
    out << tokens.size() << ' ' << vectors.cols() << '\n';
    char buf[32];
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        out << tokens[i];
        for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.9g", vectors(static_cast<Eigen::Index>(i), j));
            out << ' ' << buf;
        }
        out << '\n';
    }
}

std::vector<RawRecord> read_corpus_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingPrerequisite("corpus file not found: " + path);
    std::vector<RawRecord> out;
    std::string line;
    std::size_t lineno = 0;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
        RawRecord r;
        if (!j.contains("id") || !j["id"].is_string())
            throw FormatError("corpus line " + std::to_string(lineno) + ": missing 'id'");
        if (!j.contains("text") || !j["text"].is_string())
            throw FormatError("corpus line " + std::to_string(lineno) + ": missing 'text'");
        if (!j.contains("labels") || !j["labels"].is_array())
            throw FormatError("corpus line " + std::to_string(lineno) + ": missing 'labels'");
        r.id = j["id"].get<std::string>();
        r.text = j["text"].get<std::string>();
        for (const auto& l : j["labels"]) r.labels.push_back(l.get<std::string>());
        std::sort(r.labels.begin(), r.labels.end());
        r.labels.erase(std::unique(r.labels.begin(), r.labels.end()), r.labels.end());
        r.group = j.value("group", "");
        r.split = j.value("split", "");
        if (!ids.insert(r.id).second)
            throw FormatError("corpus line " + std::to_string(lineno) + ": duplicate id '" + r.id + "'");
        out.push_back(std::move(r));
    }
    return out;
}

void write_corpus_file(const std::string& path, const std::vector<RawRecord>& records) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write corpus file: " + path);
    for (const auto& r : records) {
        json j;
        j["id"] = r.id;
        j["text"] = r.text;
        j["labels"] = r.labels;
        if (!r.group.empty()) j["group"] = r.group;
        if (!r.split.empty()) j["split"] = r.split;
        out << j.dump() << '\n';
    }
}

Splits build_splits(const std::vector<RawRecord>& records, const SplitSpec& spec) {
    if (records.empty()) throw FormatError("build_splits: empty corpus");
    Splits s;

    bool all_explicit = spec.allow_explicit;
    for (const auto& r : records)
        if (r.split.empty()) {
            all_explicit = false;
            break;
        }
    if (all_explicit) {
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& name = records[i].split;
            if (name == "train")
                s.train.push_back(i);
            else if (name == "valid")
                s.valid.push_back(i);
            else if (name == "test")
                s.test.push_back(i);
            else
                throw FormatError("record '" + records[i].id + "': unknown split '" + name + "'");
        }
    } else {
        const double total = spec.train + spec.valid + spec.test;
        if (total <= 0) throw ConfigError("build_splits: nonpositive split fractions");

        // shuffle units (groups stay together), then cut by cumulative fraction
        std::unordered_map<std::string, std::vector<std::size_t>> groups;
        std::vector<std::string> unit_keys;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const std::string key = records[i].group.empty() ? "\x01" + records[i].id : records[i].group;
            auto [it, fresh] = groups.try_emplace(key);
            it->second.push_back(i);
            if (fresh) unit_keys.push_back(key);
        }
        std::sort(unit_keys.begin(), unit_keys.end());
        Rng rng(spec.seed);
        rng.shuffle(unit_keys);

        const std::size_t n = records.size();
        const auto want_train = static_cast<std::size_t>(std::llround(n * spec.train / total));
        const auto want_valid = static_cast<std::size_t>(std::llround(n * spec.valid / total));
        std::size_t assigned = 0;
        for (const auto& key : unit_keys) {
            auto& dst = assigned < want_train          ? s.train
                        : assigned < want_train + want_valid ? s.valid
                                                              : s.test;
            for (std::size_t i : groups[key]) dst.push_back(i);
            assigned += groups[key].size();
        }
        std::sort(s.train.begin(), s.train.end());
        std::sort(s.valid.begin(), s.valid.end());
        std::sort(s.test.begin(), s.test.end());
        // a zero fraction is an intentionally empty split, not an error
        if ((spec.train > 0 && s.train.empty()) || (spec.valid > 0 && s.valid.empty()) ||
            (spec.test > 0 && s.test.empty()))
            throw FormatError("build_splits: a requested split ended up empty");
        return s;
    }

    if (s.train.empty() || s.valid.empty() || s.test.empty())
        throw FormatError("build_splits: a split ended up empty");
    return s;
}

std::vector<Keyword> extract_keywords(const std::vector<int>& doc_tokens, const Vec& v_l,
                                      const Mat& embeddings, int k) {
    if (k < 1) throw ConfigError("extract_keywords: k must be >= 1");
    if (v_l.norm() == 0.0) throw NumericError("extract_keywords: zero-norm label embedding");
    std::set<int> distinct(doc_tokens.begin(), doc_tokens.end());
    distinct.erase(EmbeddingTable::kPad);
    distinct.erase(EmbeddingTable::kUnk);
    std::vector<Keyword> scored;
    scored.reserve(distinct.size());
    for (int t : distinct)
        scored.push_back({t, cosine(embeddings.row(t).transpose(), v_l)});
    std::sort(scored.begin(), scored.end(), [](const Keyword& a, const Keyword& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.token < b.token;
    });
    if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
    return scored;
}

}  // namespace gzsl
