#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "gzsl/hierarchy.hpp"

using namespace gzsl;

namespace {

LabelHierarchy chain_hierarchy(const std::map<std::string, long>& counts) {
    // root -> A -> B
    return parse_hierarchy({{{"root", "", "root node"}, {"A", "root", "code a"}, {"B", "A", "code b"}}},
                           counts);
}

}  // namespace

TEST_SUITE("hierarchy") {

TEST_CASE("cohorts from counts") {
    auto h = chain_hierarchy({{"A", 10}});
    CHECK(std::count(h.zero_shot.begin(), h.zero_shot.end(), h.id("B")) == 1);
    CHECK(std::count(h.seen.begin(), h.seen.end(), h.id("A")) == 1);
    CHECK(h.node("B").train_count == 0);

    auto h2 = chain_hierarchy({{"A", 5}});
    CHECK(std::count(h2.few_shot.begin(), h2.few_shot.end(), h2.id("A")) == 1);
    auto h6 = chain_hierarchy({{"A", 6}});
    CHECK(h6.few_shot.empty());
}

TEST_CASE("cohorts partition codes") {
    auto h = chain_hierarchy({{"A", 3}, {"root", 20}});
    for (std::size_t i = 0; i < h.size(); ++i) {
        const long n = h.nodes[i].train_count;
        const int id = static_cast<int>(i);
        const int in_zero = std::count(h.zero_shot.begin(), h.zero_shot.end(), id);
        const int in_few = std::count(h.few_shot.begin(), h.few_shot.end(), id);
        const int frequent = (n > 5) ? 1 : 0;
        CHECK(in_zero + in_few + frequent == 1);
    }
}

TEST_CASE("structural errors") {
    CHECK_THROWS_AS(parse_hierarchy({{{"B", "B", "self loop"}}}, {}), FormatError);
    CHECK_THROWS_AS(parse_hierarchy({{{"A", "", "x"}, {"A", "", "y"}}}, {}), FormatError);
    CHECK_THROWS_AS(parse_hierarchy({{{"A", "", ""}}}, {}), FormatError);
    CHECK_THROWS_AS(parse_hierarchy({{{"A", "missing", "x"}}}, {}), FormatError);
    // two-node cycle
    CHECK_THROWS_AS(parse_hierarchy({{{"A", "B", "x"}, {"B", "A", "y"}}}, {}), FormatError);
}

TEST_CASE("load from file") {
    const std::string path = "test_hier.tsv";
    {
        std::ofstream out(path);
        out << "root\t\troot description\n";
        out << "A\troot\talpha code\n";
        out << "B\troot\tbeta code\n";
    }
    auto h = load_hierarchy(path, {{"A", 2}});
    CHECK(h.size() == 3);
    CHECK(h.node("A").parent == std::optional<std::string>("root"));
    CHECK(h.node("root").children == std::vector<std::string>{"A", "B"});
    std::remove(path.c_str());
}

TEST_CASE("label embedding") {
    Mat emb(4, 2);
    emb << 0, 0, /*pad*/ 0.5, 0.25, /*unk*/ 1, 0, 0, 1;
    CHECK(label_embedding({2}, emb) == Vec(emb.row(2).transpose()));
    const Vec two = label_embedding({2, 3}, emb);
    CHECK(two(0) == doctest::Approx(0.5));
    CHECK(two(1) == doctest::Approx(0.5));
    Mat zeros = Mat::Zero(3, 2);
    CHECK(label_embedding({1, 2}, zeros).norm() == 0.0);
    CHECK_THROWS_AS(label_embedding({}, emb), FormatError);
}

TEST_CASE("label embedding is order invariant") {
    Rng rng(7);
    Mat emb = rng.gaussian_matrix(20, 5);
    std::vector<int> desc{3, 7, 7, 11, 2};
    const Vec a = label_embedding(desc, emb);
    std::vector<int> shuffled = desc;
    rng.shuffle(shuffled);
    const Vec b = label_embedding(shuffled, emb);
    CHECK((a - b).norm() < 1e-15);
}

TEST_CASE("nearest sibling: unique seen candidate") {
    auto h = parse_hierarchy(
        {{{"P", "", "parent"}, {"Z", "P", "zero"}, {"S", "P", "seen"}}}, {{"S", 4}});
    Rng rng(1);
    Mat v = rng.gaussian_matrix(static_cast<Eigen::Index>(h.size()), 4);
    auto sib = nearest_sibling(h.id("Z"), h, v);
    REQUIRE(sib.has_value());
    CHECK(*sib == h.id("S"));
}

TEST_CASE("nearest sibling: argmax cosine between two seen siblings") {
    auto h = parse_hierarchy({{{"P", "", "parent"},
                               {"Z", "P", "zero"},
                               {"S1", "P", "near"},
                               {"S2", "P", "far"}}},
                             {{"S1", 3}, {"S2", 3}});
    Mat v = Mat::Zero(static_cast<Eigen::Index>(h.size()), 2);
    v.row(h.id("Z")) << 1, 0;
    v.row(h.id("S1")) << 0.9, 0.4359;  // cos ~ 0.9
    v.row(h.id("S2")) << 0.2, 0.9798;  // cos ~ 0.2
    v.row(h.id("P")) << 0, 1;
    auto sib = nearest_sibling(h.id("Z"), h, v);
    REQUIRE(sib.has_value());
    CHECK(*sib == h.id("S1"));
}

TEST_CASE("nearest sibling: ancestor fallback matches brute force") {
    // Z has no seen sibling; the aunt subtree holds seen codes.
    auto h = parse_hierarchy({{{"R", "", "root"},
                               {"P", "R", "parent"},
                               {"Z", "P", "zero"},
                               {"Q", "R", "aunt"},
                               {"Q1", "Q", "cousin one"},
                               {"Q2", "Q", "cousin two"}}},
                             {{"Q1", 2}, {"Q2", 9}});
    Rng rng(3);
    Mat v = rng.gaussian_matrix(static_cast<Eigen::Index>(h.size()), 6);

    auto got = nearest_sibling(h.id("Z"), h, v);
    REQUIRE(got.has_value());

    // brute force: order all seen codes by (distance to the closest ancestor of
    // Z whose subtree contains them, -cosine, code)
    const Vec vz = v.row(h.id("Z")).transpose();
    auto chain = h.ancestors(h.id("Z"));             // root..parent
    std::reverse(chain.begin(), chain.end());        // parent..root
    auto subtree_contains = [&](int root, int node) {
        while (true) {
            if (node == root) return true;
            const auto& p = h.node(node).parent;
            if (!p) return false;
            node = h.id(*p);
        }
    };
    int best = -1;
    std::size_t best_dist = 0;
    double best_cos = 0;
    for (int s : h.seen) {
        std::size_t dist = 0;
        bool found = false;
        for (std::size_t d = 0; d < chain.size(); ++d)
            if (subtree_contains(chain[d], s)) {
                dist = d;
                found = true;
                break;
            }
        if (!found) continue;
        const double cs = cosine(vz, v.row(s).transpose());
        if (best == -1 || dist < best_dist || (dist == best_dist && cs > best_cos) ||
            (dist == best_dist && cs == best_cos && h.node(s).code < h.node(best).code)) {
            best = s;
            best_dist = dist;
            best_cos = cs;
        }
    }
    CHECK(*got == best);
}

TEST_CASE("nearest sibling: no seen code reachable") {
    auto h = parse_hierarchy({{{"P", "", "p"}, {"Z", "P", "z"}}}, {});
    CHECK_FALSE(nearest_sibling(h.id("Z"), h, Mat::Ones(2, 3)).has_value());
}

TEST_CASE("nearest sibling invariant on random single trees") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        // random tree: node i>0 hangs under a random earlier node
        const int n = 2 + static_cast<int>(rng.index(10));
        std::vector<std::array<std::string, 3>> recs;
        for (int i = 0; i < n; ++i) {
            const std::string code = "N" + std::to_string(i);
            const std::string parent = i == 0 ? "" : "N" + std::to_string(rng.index(static_cast<std::size_t>(i)));
            recs.push_back({code, parent, "desc " + code});
        }
        std::map<std::string, long> counts;
        int n_seen = 0;
        for (int i = 0; i < n; ++i)
            if (rng.uniform() < 0.5) {
                counts["N" + std::to_string(i)] = 1 + static_cast<long>(rng.index(9));
                ++n_seen;
            }
        if (n_seen == 0) continue;
        auto h = parse_hierarchy(recs, counts);
        Mat v = rng.gaussian_matrix(n, 4);
        for (int u : h.zero_shot) {
            auto sib = nearest_sibling(u, h, v);
            REQUIRE(sib.has_value());
            CHECK(h.is_seen(*sib));
            CHECK(*sib != u);
        }
    }
}

}  // TEST_SUITE
