#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "gzsl/corpus.hpp"
#include "gzsl/synthetic.hpp"

using namespace gzsl;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("tokenize") {
    TokenizerOptions opt;
    CHECK(tokenize("Chest X-Ray, normal.", opt) ==
          std::vector<std::string>{"chest", "ray", "normal"});
    CHECK(tokenize("a b c", opt).empty());  // all below min length
    opt.max_doc_tokens = 2;
    CHECK(tokenize("one two three four", opt) == std::vector<std::string>{"one", "two"});
}

TEST_CASE("corpus file parsing errors carry line numbers") {
    const std::string path = "bad_corpus.jsonl";
    {
        std::ofstream out(path);
        out << R"({"id":"a","text":"hello there","labels":["X"]})" << '\n';
        out << R"({"id":"b","text":"no labels field"})" << '\n';
    }
    CHECK_THROWS_WITH_AS(read_corpus_file(path), doctest::Contains("line 2"), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("build_splits by fractions") {
    std::vector<RawRecord> recs(10);
    for (int i = 0; i < 10; ++i) recs[static_cast<std::size_t>(i)].id = "d" + std::to_string(i);
    SplitSpec spec;
    spec.seed = 5;
    const Splits s = build_splits(recs, spec);
    CHECK(s.train.size() == 8);
    CHECK(s.valid.size() == 1);
    CHECK(s.test.size() == 1);

    // partition of the record indices
    std::set<std::size_t> all;
    for (auto v : {s.train, s.valid, s.test}) all.insert(v.begin(), v.end());
    CHECK(all.size() == 10);
}

TEST_CASE("build_splits keeps groups together") {
    std::vector<RawRecord> recs(2);
    recs[0].id = "a";
    recs[0].group = "g";
    recs[1].id = "b";
    recs[1].group = "g";
    SplitSpec spec;
    spec.train = 0.5;
    spec.valid = 0.5;
    spec.test = 0.0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        spec.seed = seed;
        const Splits s = build_splits(recs, spec);
        CHECK((s.train.size() == 2 || s.valid.size() == 2));
    }
}

TEST_CASE("build_splits honors explicit assignments") {
    std::vector<RawRecord> recs(3);
    recs[0] = {"a", "", {}, "", "train"};
    recs[1] = {"b", "", {}, "", "valid"};
    recs[2] = {"c", "", {}, "", "test"};
    const Splits s = build_splits(recs, {});
    CHECK(s.train == std::vector<std::size_t>{0});
    CHECK(s.valid == std::vector<std::size_t>{1});
    CHECK(s.test == std::vector<std::size_t>{2});
}

TEST_CASE("extract_keywords") {
    Mat emb = Mat::Zero(5, 2);
    emb.row(2) << 1, 0;   // a: same direction as v
    emb.row(3) << 0, 1;   // b: orthogonal
    emb.row(4) << -1, 0;  // c: antipodal
    const Vec v = Vec{{1.0, 0.0}};

    auto top1 = extract_keywords({2, 3}, v, emb, 1);
    REQUIRE(top1.size() == 1);
    CHECK(top1[0].token == 2);
    CHECK(top1[0].score == doctest::Approx(1.0));

    auto all = extract_keywords({2, 3}, v, emb, 10);
    CHECK(all.size() == 2);  // k larger than distinct tokens

    auto anti = extract_keywords({2, 4}, v, emb, 2);
    REQUIRE(anti.size() == 2);
    CHECK(anti[0].token == 2);
    CHECK(anti[0].score == doctest::Approx(1.0));
    CHECK(anti[1].token == 4);
    CHECK(anti[1].score == doctest::Approx(-1.0));

    CHECK_THROWS_AS(extract_keywords({2}, Vec::Zero(2), emb, 1), NumericError);
}

TEST_CASE("keyword scores ignore duplicate occurrences") {
    Rng rng(11);
    Mat emb = rng.gaussian_matrix(30, 4);
    emb.row(0).setZero();
    const Vec v = rng.gaussian_vector(4);
    std::vector<int> doc{5, 9, 9, 9, 13, 5};
    std::vector<int> dedup{5, 9, 13};
    auto a = extract_keywords(doc, v, emb, 3);
    auto b = extract_keywords(dedup, v, emb, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].token == b[i].token);
        CHECK(a[i].score == b[i].score);
    }
}

TEST_CASE("selected keywords dominate unselected tokens") {
    Rng rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        Mat emb = rng.gaussian_matrix(40, 3);
        const Vec v = rng.gaussian_vector(3);
        std::vector<int> doc;
        for (int i = 0; i < 12; ++i) doc.push_back(2 + static_cast<int>(rng.index(38)));
        const int k = 1 + static_cast<int>(rng.index(5));
        auto kws = extract_keywords(doc, v, emb, k);
        std::set<int> chosen;
        double min_chosen = 2.0;
        for (const auto& kw : kws) {
            chosen.insert(kw.token);
            min_chosen = std::min(min_chosen, kw.score);
        }
        for (int t : std::set<int>(doc.begin(), doc.end()))
            if (!chosen.count(t))
                CHECK(cosine(emb.row(t).transpose(), v) <= min_chosen + 1e-12);
    }
}

TEST_CASE("embedding table basics") {
    auto table = build_embedding_table({{"beta", "alpha"}, {"alpha"}}, 4, nullptr, 9);
    CHECK(table.tokens[0] == "<pad>");
    CHECK(table.tokens[1] == "<unk>");
    CHECK(table.lookup("alpha") == 2);
    CHECK(table.lookup("nonexistent") == EmbeddingTable::kUnk);
    CHECK(table.vectors.row(0).norm() == 0.0);  // padding stays zero
    CHECK(table.vectors.row(2).norm() > 0.0);
}

TEST_CASE("word vector file roundtrip") {
    const std::string path = "vecs.txt";
    Rng rng(3);
    Mat m = rng.gaussian_matrix(3, 4);
    save_word_vectors(path, {"aa", "bb", "cc"}, m);
    int dim = 0;
    auto loaded = load_word_vectors(path, dim);
    CHECK(dim == 4);
    CHECK(loaded.size() == 3);
    CHECK((loaded.at("bb") - m.row(1).transpose()).norm() < 1e-6);
    std::remove(path.c_str());
}

TEST_CASE("synthetic corpus: sibling topic jaccard by construction") {
    SyntheticSpec spec;
    spec.families = 2;
    spec.children_per_family = 2;
    spec.shared_topics_per_family = 4;
    spec.own_topics_per_code = 2;  // jaccard = 4 / (4 + 2 + 2) = 0.5
    spec.train_docs = 30;
    spec.valid_docs = 6;
    spec.test_docs = 6;
    spec.eval_docs_per_special_code = 2;
    generate_synthetic_corpus(spec, 1, "synth_test");

    std::map<std::string, long> counts;
    auto h = load_hierarchy("synth_test/hierarchy.tsv", counts);
    auto topics = [&](const std::string& code) {
        std::set<std::string> t;
        for (const auto& w : tokenize(h.node(code).description)) t.insert(w);
        return t;
    };
    auto a = topics("F0C0"), b = topics("F0C1");
    std::set<std::string> inter, uni;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(inter, inter.end()));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(uni, uni.end()));
    CHECK(static_cast<double>(inter.size()) / static_cast<double>(uni.size()) == doctest::Approx(0.5));
    std::filesystem::remove_all("synth_test");
}

TEST_CASE("synthetic corpus: determinism and zero-shot exclusion") {
    SyntheticSpec spec;
    spec.families = 2;
    spec.children_per_family = 3;
    spec.zero_shot = {"F0C2"};
    spec.few_shot = {{"F1C2", 3}};
    spec.train_docs = 40;
    spec.valid_docs = 10;
    spec.test_docs = 10;
    spec.eval_docs_per_special_code = 3;

    generate_synthetic_corpus(spec, 77, "synth_a");
    generate_synthetic_corpus(spec, 77, "synth_b");
    for (const std::string f : {"hierarchy.tsv", "corpus.jsonl", "embeddings.txt"})
        CHECK(slurp("synth_a/" + f) == slurp("synth_b/" + f));

    auto records = read_corpus_file("synth_a/corpus.jsonl");
    long few_count = 0;
    for (const auto& r : records) {
        const bool has_zero =
            std::find(r.labels.begin(), r.labels.end(), "F0C2") != r.labels.end();
        if (r.split == "train") CHECK_FALSE(has_zero);
        if (r.split == "train" &&
            std::find(r.labels.begin(), r.labels.end(), "F1C2") != r.labels.end())
            ++few_count;
    }
    CHECK(few_count == 3);

    // positive docs carry their topic words at elevated frequency
    std::map<std::string, long> counts;
    auto h = load_hierarchy("synth_a/hierarchy.tsv", counts);
    const auto topic_words = tokenize(h.node("F0C0").description);
    long with_label_hits = 0, with_label_docs = 0, without_hits = 0, without_docs = 0;
    for (const auto& r : records) {
        const auto toks = tokenize(r.text);
        long hits = 0;
        for (const auto& t : toks)
            if (std::find(topic_words.begin(), topic_words.end(), t) != topic_words.end()) ++hits;
        const bool pos = std::find(r.labels.begin(), r.labels.end(), "F0C0") != r.labels.end();
        (pos ? with_label_hits : without_hits) += hits;
        ++(pos ? with_label_docs : without_docs);
    }
    REQUIRE(with_label_docs > 0);
    CHECK(static_cast<double>(with_label_hits) / with_label_docs >
          4.0 * static_cast<double>(without_hits) / std::max(1L, without_docs));

    std::filesystem::remove_all("synth_a");
    std::filesystem::remove_all("synth_b");
}

TEST_CASE("synthetic corpus: zero seen codes is an error") {
    SyntheticSpec spec;
    spec.families = 1;
    spec.children_per_family = 1;
    spec.zero_shot = {"F0C0"};
    CHECK_THROWS_AS(generate_synthetic_corpus(spec, 1, "synth_err"), ConfigError);
    std::filesystem::remove_all("synth_err");
}

}  // TEST_SUITE
