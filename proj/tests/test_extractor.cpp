#include <doctest.h>

#include <cmath>

#include "gzsl/extractor.hpp"
#include "helpers.hpp"

using namespace gzsl;

namespace {

// tiny labeled world: L labels on a star (root + children), short docs
struct TinyWorld {
    LabelHierarchy h;
    std::vector<Document> docs;
    ExtractorModel model;
    Eigen::SparseMatrix<double> nmat;
};

TinyWorld make_tiny(int emb_dim, int feat_dim, bool use_ldam, std::uint64_t seed) {
    TinyWorld w;
    w.h = parse_hierarchy({{{"R", "", "root topic"},
                            {"A", "R", "alpha topic"},
                            {"B", "R", "beta topic"}}},
                          {{"A", 16}, {"B", 2}, {"R", 7}});
    // vocabulary ids: 0 pad, 1 unk, 2..9 words
    for (auto& n : w.h.nodes) n.description_tokens = {2 + w.h.id(n.code), 5 + w.h.id(n.code)};

    Document d1{"d1", {2, 3, 4}, {"A"}, ""};
    Document d2{"d2", {5, 6, 7}, {"B", "R"}, ""};
    w.docs = {d1, d2};

    ExtractorConfig cfg;
    cfg.emb_dim = emb_dim;
    cfg.conv_filters = 4;
    cfg.conv_width = 3;
    cfg.feat_dim = feat_dim;
    cfg.prop_depth = 2;
    cfg.dropout = 0.0;
    cfg.use_ldam = use_ldam;
    cfg.ldam_c = 0.7;
    Rng rng(seed);
    w.model = init_extractor(cfg, 10, rng);
    w.nmat = neighbor_matrix(w.h);
    return w;
}

}  // namespace

TEST_SUITE("extractor") {

TEST_CASE("attention: identical rows give uniform weights") {
    Mat h(3, 2);
    h << 1, 2, 1, 2, 1, 2;
    Rng rng(1);
    Mat wa = rng.gaussian_matrix(2, 2);
    Vec ba = rng.gaussian_vector(2);
    Vec v = rng.gaussian_vector(2);
    auto [s, a] = attend_labelwise(h, v, wa, ba);
    for (int i = 0; i < 3; ++i) CHECK(s(i) == doctest::Approx(1.0 / 3.0));
    CHECK((a - h.row(0).transpose()).norm() < 1e-12);
}

TEST_CASE("attention: analytic softmax of (ln 2, 0)") {
    // 1-d setup where pre-softmax logits are exactly (ln 2, 0)
    Mat h(2, 1);
    h << std::atanh(std::log(2.0)), 0.0;
    Mat wa = Mat::Identity(1, 1);
    Vec ba = Vec::Zero(1);
    Vec v = Vec::Ones(1);
    auto [s, a] = attend_labelwise(h, v, wa, ba);
    CHECK(s(0) == doctest::Approx(2.0 / 3.0));
    CHECK(s(1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("attention: single position") {
    Mat h(1, 3);
    h << 4, 5, 6;
    Rng rng(2);
    auto [s, a] = attend_labelwise(h, rng.gaussian_vector(2), rng.gaussian_matrix(2, 3),
                                   rng.gaussian_vector(2));
    CHECK(s.size() == 1);
    CHECK(s(0) == doctest::Approx(1.0));
    CHECK((a - h.row(0).transpose()).norm() < 1e-15);
}

TEST_CASE("attention weights always form a distribution") {
    Rng rng(5);
    for (int t = 0; t < 25; ++t) {
        const int n = 1 + static_cast<int>(rng.index(6));
        Mat h = rng.gaussian_matrix(n, 3);
        auto [s, a] = attend_labelwise(h, rng.gaussian_vector(2), rng.gaussian_matrix(2, 3),
                                       rng.gaussian_vector(2));
        CHECK(s.sum() == doctest::Approx(1.0));
        CHECK(s.minCoeff() >= 0.0);
    }
}

TEST_CASE("extract_features rectifier") {
    CHECK((extract_features(Vec{{1.0, 2.0}}, Mat::Identity(2, 2), Vec::Zero(2)) - Vec{{1.0, 2.0}})
              .norm() == 0.0);
    const Vec clipped = extract_features(Vec{{-1.0, 2.0}}, Mat::Identity(2, 2), Vec::Zero(2));
    CHECK(clipped(0) == 0.0);
    CHECK(clipped(1) == 2.0);
    CHECK(extract_features(Vec::Zero(2), Mat::Identity(2, 2), Vec::Constant(2, -1.0)).norm() == 0.0);
}

TEST_CASE("gru cell limits") {
    const int d = 3;
    GruParams p;
    Rng rng(3);
    p.init(d, rng);
    Mat h = rng.gaussian_matrix(d, 1);
    Mat g = rng.gaussian_matrix(d, 1);

    // all-zero parameters: z = r = 0.5, candidate = 0
    GruParams zero;
    zero.init(d, rng);
    for (Mat* t : zero.parameters().tensors) t->setZero();
    CHECK((gru_forward(zero, h, g, nullptr) - 0.5 * g).norm() < 1e-15);

    // gate closed
    GruParams closed = p;
    closed.bz = Mat::Constant(d, 1, -50.0);
    closed.wz.setZero();
    closed.uz.setZero();
    CHECK((gru_forward(closed, h, g, nullptr) - g).norm() < 1e-12);

    // gate open, r forced open, U_h zero -> candidate = tanh(W_h h)
    GruParams open = p;
    open.bz = Mat::Constant(d, 1, 50.0);
    open.wz.setZero();
    open.uz.setZero();
    open.uh.setZero();
    open.bh.setZero();
    const Mat expect = ((open.wh * h).array().tanh()).matrix();
    CHECK((gru_forward(open, h, g, nullptr) - expect).norm() < 1e-12);
}

TEST_CASE("graph propagation") {
    auto w = make_tiny(4, 4, false, 11);

    SUBCASE("t = 0 returns the label embeddings") {
        w.model.cfg.prop_depth = 0;
        const LabelState ls = compute_label_state(w.model, w.h, w.nmat);
        CHECK((ls.g - ls.v).norm() == 0.0);  // d == d_f, no projection
    }

    SUBCASE("star graph: neighbor mean matches direct averaging") {
        auto h = parse_hierarchy({{{"C", "", "center word"},
                                   {"L1", "C", "leaf one"},
                                   {"L2", "C", "leaf two"},
                                   {"L3", "C", "leaf three"}}},
                                 {});
        for (auto& n : h.nodes) n.description_tokens = {2 + h.id(n.code)};
        ExtractorConfig cfg = w.model.cfg;
        cfg.prop_depth = 1;
        Rng rng(4);
        ExtractorModel m = init_extractor(cfg, 8, rng);
        const auto nm = neighbor_matrix(h);
        const LabelState ls = compute_label_state(m, h, nm);

        // oracle: average the leaves' step-0 embeddings by hand
        Vec mean = Vec::Zero(cfg.feat_dim);
        for (const std::string leaf : {"L1", "L2", "L3"}) mean += ls.g0.col(h.id(leaf));
        mean /= 3.0;
        CHECK((ls.h_in[0].col(h.id("C")) - mean).norm() < 1e-14);

        // identical neighbors: all leaves see only the center
        for (const std::string leaf : {"L1", "L2", "L3"})
            CHECK((ls.h_in[0].col(h.id(leaf)) - ls.g0.col(h.id("C"))).norm() < 1e-14);
    }

    SUBCASE("isolated node keeps itself as neighborhood") {
        auto h = parse_hierarchy({{{"X", "", "lone"}}}, {});
        h.nodes[0].description_tokens = {2};
        ExtractorConfig cfg = w.model.cfg;
        cfg.prop_depth = 1;
        Rng rng(5);
        ExtractorModel m = init_extractor(cfg, 4, rng);
        const LabelState ls = compute_label_state(m, h, neighbor_matrix(h));
        CHECK((ls.h_in[0].col(0) - ls.g0.col(0)).norm() == 0.0);
    }
}

TEST_CASE("bce loss values") {
    CHECK(bce_loss(Vec{{1.0}}, Vec{{0.5}}) == doctest::Approx(std::log(2.0)));
    CHECK(bce_loss(Vec{{1.0, 0.0}}, Vec{{0.5, 0.5}}) == doctest::Approx(2.0 * std::log(2.0)));
    CHECK(bce_loss(Vec{{1.0}}, Vec{{1.0 - 1e-12}}) < 1e-9);
    CHECK(bce_loss(Vec{{1.0}}, Vec{{1.0}}) < 1e-9);  // clamp keeps it finite
}

TEST_CASE("ldam margins") {
    // C = 1, n = 16 -> margin 0.5
    const Vec p = ldam_probabilities(Vec{{0.5}}, {1}, {16}, 1.0);
    CHECK(p(0) == doctest::Approx(0.5));
    const Vec pneg = ldam_probabilities(Vec{{0.5}}, {0}, {16}, 1.0);
    CHECK(pneg(0) == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))));
    CHECK(pneg(0) == doctest::Approx(0.6225).epsilon(1e-3));
    CHECK_THROWS_AS(ldam_probabilities(Vec{{0.5}}, {1}, {0}, 1.0), NumericError);
}

TEST_CASE("ldam with C = 0 equals bce exactly") {
    auto w = make_tiny(4, 4, true, 21);
    w.model.cfg.ldam_c = 0.0;
    std::vector<const Document*> batch{&w.docs[0], &w.docs[1]};
    const double with_ldam = extractor_batch_loss(w.model, w.h, w.nmat, batch, {}, nullptr);
    w.model.cfg.use_ldam = false;
    const double plain = extractor_batch_loss(w.model, w.h, w.nmat, batch, {}, nullptr);
    CHECK(with_ldam == plain);  // bitwise

    const Vec logits = Vec{{0.3, -0.7}};
    const Vec a = ldam_probabilities(logits, {1, 0}, {5, 9}, 0.0);
    for (int i = 0; i < 2; ++i) CHECK(a(i) == sigmoid(logits(i)));
}

TEST_CASE("gradient check: full extractor loss (bce and ldam)") {
    for (const bool ldam : {false, true}) {
        for (const int emb_dim : {4, 3}) {  // 3 != 4 exercises the projection
            auto w = make_tiny(emb_dim, 4, ldam, 31 + emb_dim);
            std::vector<const Document*> batch{&w.docs[0], &w.docs[1]};
            // fixed dropout masks so the finite differences see the same network
            std::vector<Mat> masks;
            Rng mrng(9);
            for (const Document* d : batch)
                masks.push_back(dropout_mask(static_cast<Eigen::Index>(d->tokens.size()), emb_dim,
                                             0.25, mrng));
            std::vector<Mat> grads;
            extractor_batch_loss(w.model, w.h, w.nmat, batch, masks, &grads);
            ParamSet ps = w.model.parameters();
            auto loss = [&] { return extractor_batch_loss(w.model, w.h, w.nmat, batch, masks, nullptr); };
            const auto res = gzsl::testing::grad_check(loss, ps.names, ps.tensors, grads);
            INFO("ldam=", ldam, " emb_dim=", emb_dim, " worst=", res.worst);
            CHECK(res.max_rel_err < 1e-4);
        }
    }
}

TEST_CASE("training: loss decreases, epochs=0 is a no-op, determinism") {
    // 50-doc synthetic-style corpus over 5 codes
    auto h = parse_hierarchy({{{"P", "", "shared base"},
                               {"C0", "P", "alpha alpha"},
                               {"C1", "P", "beta beta"},
                               {"C2", "P", "gamma gamma"},
                               {"C3", "P", "delta delta"}}},
                             {{"C0", 13}, {"C1", 13}, {"C2", 12}, {"C3", 12}, {"P", 50}});
    // vocab: 0 pad 1 unk, topic words 2..5 (alpha..delta), 6 shared, fillers 7..14
    std::map<std::string, std::vector<int>> desc{
        {"P", {6}}, {"C0", {2, 2}}, {"C1", {3, 3}}, {"C2", {4, 4}}, {"C3", {5, 5}}};
    for (auto& n : h.nodes) n.description_tokens = desc[n.code];

    Rng rng(77);
    std::vector<Document> docs;
    for (int i = 0; i < 50; ++i) {
        const int c = i % 4;
        Document d;
        d.id = "doc" + std::to_string(i);
        d.labels = {"C" + std::to_string(c), "P"};
        for (int k = 0; k < 4; ++k) d.tokens.push_back(2 + c);
        d.tokens.push_back(6);
        for (int k = 0; k < 6; ++k) d.tokens.push_back(7 + static_cast<int>(rng.index(8)));
        rng.shuffle(d.tokens);
        docs.push_back(std::move(d));
    }

    ExtractorConfig cfg;
    cfg.emb_dim = 8;
    cfg.conv_filters = 8;
    cfg.conv_width = 3;
    cfg.feat_dim = 8;
    cfg.prop_depth = 1;
    cfg.dropout = 0.2;
    cfg.epochs = 3;
    cfg.batch = 8;
    Rng irng(123);
    ExtractorModel m = init_extractor(cfg, 15, irng);

    SUBCASE("epochs = 0 returns the initialized model with an empty log") {
        m.cfg.epochs = 0;
        const Mat emb_before = m.emb;
        const auto log = train_extractor(m, h, docs, 5);
        CHECK(log.epoch_losses.empty());
        CHECK((m.emb - emb_before).norm() == 0.0);
    }

    SUBCASE("loss strictly decreases across epochs") {
        const auto log = train_extractor(m, h, docs, 5);
        REQUIRE(log.epoch_losses.size() == 3);
        CHECK(log.epoch_losses[1] < log.epoch_losses[0]);
        CHECK(log.epoch_losses[2] < log.epoch_losses[1]);
    }

    SUBCASE("same seed reproduces the same trajectory") {
        ExtractorModel m2 = m;
        const auto la = train_extractor(m, h, docs, 5);
        const auto lb = train_extractor(m2, h, docs, 5);
        CHECK(la.epoch_losses == lb.epoch_losses);
        CHECK((m.emb - m2.emb).norm() == 0.0);
    }
}

TEST_CASE("weight tying: propagation parameters move the classifiers") {
    auto w = make_tiny(4, 4, false, 51);
    const LabelState before = compute_label_state(w.model, w.h, w.nmat);
    const DocForward fwd_before = extractor_forward(w.model, before, w.docs[0].tokens, nullptr);
    w.model.gru.wh.array() += 0.3;
    const LabelState after = compute_label_state(w.model, w.h, w.nmat);
    const DocForward fwd_after = extractor_forward(w.model, after, w.docs[0].tokens, nullptr);
    CHECK((before.g - after.g).norm() > 1e-6);
    // features unchanged, so any logit change comes through the tied classifier
    CHECK((fwd_before.f - fwd_after.f).norm() == 0.0);
    CHECK((fwd_before.logits - fwd_after.logits).norm() > 1e-9);
}

}  // TEST_SUITE
