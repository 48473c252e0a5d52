#include "gzsl/synthetic.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace gzsl {

using nlohmann::json;

SyntheticSpec SyntheticSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingPrerequisite("synthetic spec not found: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("synthetic spec: ") + e.what());
    }
    SyntheticSpec s;
    s.embedding_dim = j.value("embedding_dim", s.embedding_dim);
    s.filler_vocab = j.value("filler_vocab", s.filler_vocab);
    s.doc_length = j.value("doc_length", s.doc_length);
    s.topic_repeats = j.value("topic_repeats", s.topic_repeats);
    s.families = j.value("families", s.families);
    s.children_per_family = j.value("children_per_family", s.children_per_family);
    s.shared_topics_per_family = j.value("shared_topics_per_family", s.shared_topics_per_family);
    s.own_topics_per_code = j.value("own_topics_per_code", s.own_topics_per_code);
    if (j.contains("zero_shot")) s.zero_shot = j["zero_shot"].get<std::vector<std::string>>();
    if (j.contains("few_shot"))
        for (const auto& [k, v] : j["few_shot"].items()) s.few_shot[k] = v.get<long>();
    s.train_docs = j.value("train_docs", s.train_docs);
    s.valid_docs = j.value("valid_docs", s.valid_docs);
    s.test_docs = j.value("test_docs", s.test_docs);
    s.eval_docs_per_special_code = j.value("eval_docs_per_special_code", s.eval_docs_per_special_code);
    s.second_label_prob = j.value("second_label_prob", s.second_label_prob);
    return s;
}

namespace {

std::string family_code(int i) { return "F" + std::to_string(i); }
std::string child_code(int i, int j) { return family_code(i) + "C" + std::to_string(j); }

struct CodeTopics {
    std::vector<std::string> words;  // own + family-shared
};

}  // namespace

SyntheticOutput generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed,
                                          const std::string& out_dir) {
    if (spec.families < 1 || spec.children_per_family < 1)
        throw ConfigError("synthetic: need at least one family with one child");

    std::set<std::string> zero(spec.zero_shot.begin(), spec.zero_shot.end());
    std::map<std::string, CodeTopics> topics;               // child code -> words
    std::vector<std::string> seen_children;                 // neither zero- nor few-shot
    std::vector<std::array<std::string, 3>> tree;           // code, parent, description

    for (int i = 0; i < spec.families; ++i) {
        std::vector<std::string> shared;
        for (int t = 0; t < spec.shared_topics_per_family; ++t)
            shared.push_back("fam" + std::to_string(i) + "s" + std::to_string(t));
        std::string fam_desc;
        for (const auto& w : shared) fam_desc += (fam_desc.empty() ? "" : " ") + w;
        tree.push_back({family_code(i), "", fam_desc});

        for (int jc = 0; jc < spec.children_per_family; ++jc) {
            const std::string code = child_code(i, jc);
            CodeTopics ct;
            for (int t = 0; t < spec.own_topics_per_code; ++t)
                ct.words.push_back("fam" + std::to_string(i) + "c" + std::to_string(jc) + "w" +
                                   std::to_string(t));
            ct.words.insert(ct.words.end(), shared.begin(), shared.end());
            std::string desc;
            for (const auto& w : ct.words) desc += (desc.empty() ? "" : " ") + w;
            tree.push_back({code, family_code(i), desc});
            topics[code] = std::move(ct);
            if (!zero.count(code) && !spec.few_shot.count(code)) seen_children.push_back(code);
        }
    }
    for (const auto& z : spec.zero_shot)
        if (!topics.count(z)) throw ConfigError("synthetic: zero_shot code '" + z + "' not in tree");
    for (const auto& [f, n] : spec.few_shot) {
        if (!topics.count(f)) throw ConfigError("synthetic: few_shot code '" + f + "' not in tree");
        if (n < 1 || n > 5) throw ConfigError("synthetic: few_shot count must be 1..5");
    }
    if (seen_children.empty()) throw ConfigError("synthetic: spec leaves no seen codes");

    Rng rng(seed);

    std::vector<std::string> fillers;
    for (int i = 0; i < spec.filler_vocab; ++i) {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "filler%04d", i);
        fillers.emplace_back(buf);
    }

    auto make_doc = [&](const std::vector<std::string>& labels, const std::string& id,
                        const std::string& split) {
        std::vector<std::string> toks;
        for (const auto& l : labels)
            for (const auto& w : topics.at(l).words)
                for (int r = 0; r < spec.topic_repeats; ++r) toks.push_back(w);
        while (static_cast<int>(toks.size()) < spec.doc_length)
            toks.push_back(fillers[rng.index(fillers.size())]);
        rng.shuffle(toks);
        RawRecord rec;
        rec.id = id;
        rec.split = split;
        rec.labels = labels;
        std::sort(rec.labels.begin(), rec.labels.end());
        for (const auto& t : toks) rec.text += (rec.text.empty() ? "" : " ") + t;
        return rec;
    };

    auto other_family_seen = [&](const std::string& code) {
        for (int tries = 0; tries < 64; ++tries) {
            const auto& cand = seen_children[rng.index(seen_children.size())];
            if (cand.substr(0, cand.find('C')) != code.substr(0, code.find('C'))) return cand;
        }
        return seen_children[rng.index(seen_children.size())];
    };

    std::vector<RawRecord> records;
    int doc_id = 0;
    auto next_id = [&] {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "doc%05d", doc_id++);
        return std::string(buf);
    };

    // train: few-shot codes get their exact counts, the rest round-robins over
    // seen children plus a random cross-family second label
    long reserved = 0;
    for (const auto& [_, n] : spec.few_shot) reserved += n;
    if (spec.train_docs <= reserved)
        throw ConfigError("synthetic: train_docs too small for few_shot counts");
    for (const auto& [code, n] : spec.few_shot)
        for (long k = 0; k < n; ++k) records.push_back(make_doc({code}, next_id(), "train"));
    for (int k = 0; k < spec.train_docs - reserved; ++k) {
        std::vector<std::string> labels{seen_children[static_cast<std::size_t>(k) % seen_children.size()]};
        if (rng.uniform() < spec.second_label_prob) labels.push_back(other_family_seen(labels[0]));
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        records.push_back(make_doc(labels, next_id(), "train"));
    }

    // valid/test: every zero- and few-shot code gets a fixed quota so it stays
    // evaluable; the remainder round-robins over seen children
    std::vector<std::string> special(spec.zero_shot.begin(), spec.zero_shot.end());
    for (const auto& [f, _] : spec.few_shot) special.push_back(f);
    std::sort(special.begin(), special.end());
    for (const std::string split : {std::string("valid"), std::string("test")}) {
        const int total = split == "valid" ? spec.valid_docs : spec.test_docs;
        int made = 0;
        for (const auto& code : special) {
            for (int k = 0; k < spec.eval_docs_per_special_code && made < total; ++k, ++made) {
                std::vector<std::string> labels{code};
                if (rng.uniform() < spec.second_label_prob) labels.push_back(other_family_seen(code));
                std::sort(labels.begin(), labels.end());
                labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
                records.push_back(make_doc(labels, next_id(), split));
            }
        }
        for (int k = 0; made < total; ++k, ++made) {
            std::vector<std::string> labels{seen_children[static_cast<std::size_t>(k) % seen_children.size()]};
            if (rng.uniform() < spec.second_label_prob) labels.push_back(other_family_seen(labels[0]));
            std::sort(labels.begin(), labels.end());
            labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
            records.push_back(make_doc(labels, next_id(), split));
        }
    }

    // embeddings: seeded gaussian for the full vocabulary
    std::set<std::string> vocab(fillers.begin(), fillers.end());
    for (const auto& [_, ct] : topics) vocab.insert(ct.words.begin(), ct.words.end());
    std::vector<std::string> vocab_list(vocab.begin(), vocab.end());
    Mat vectors(static_cast<Eigen::Index>(vocab_list.size()), spec.embedding_dim);
    for (std::size_t i = 0; i < vocab_list.size(); ++i)
        vectors.row(static_cast<Eigen::Index>(i)) = rng.gaussian_vector(spec.embedding_dim).transpose();

    std::filesystem::create_directories(out_dir);
    SyntheticOutput out;
    out.hierarchy_path = out_dir + "/hierarchy.tsv";
    out.corpus_path = out_dir + "/corpus.jsonl";
    out.embedding_path = out_dir + "/embeddings.txt";

    std::ofstream ht(out.hierarchy_path);
    if (!ht) throw FormatError("cannot write " + out.hierarchy_path);
    for (const auto& rec : tree) ht << rec[0] << '\t' << rec[1] << '\t' << rec[2] << '\n';
    ht.close();

    write_corpus_file(out.corpus_path, records);
    save_word_vectors(out.embedding_path, vocab_list, vectors);
    return out;
}

}  // namespace gzsl
