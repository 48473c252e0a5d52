#include <doctest.h>

#include <cmath>

#include "gzsl/generation.hpp"
#include "helpers.hpp"

using namespace gzsl;

namespace {

// critic behaving exactly like D(f, c) = w . f + const on small inputs: hidden
// width = d_f, identity f-columns, large positive bias keeps activations linear
Critic linear_critic(const Vec& w, int cond_dim) {
    Critic d;
    const auto df = static_cast<int>(w.size());
    d.feat_dim = df;
    d.slope = 0.2;
    d.w1 = Mat::Zero(df, df + cond_dim);
    d.w1.leftCols(df) = Mat::Identity(df, df);
    d.b1 = Mat::Constant(df, 1, 100.0);
    d.w2 = w.transpose();
    d.b2 = Mat::Zero(1, 1);
    return d;
}

struct TinyGan {
    LabelHierarchy h;
    GanContext ctx;
    GenerativeModel gm;
};

TinyGan make_tiny_gan(std::uint64_t seed, bool all_flags) {
    TinyGan t;
    t.h = parse_hierarchy({{{"P", "", "parent words"},
                            {"A", "P", "alpha one"},
                            {"B", "P", "beta two"},
                            {"Z", "P", "zeta zero"}}},
                          {{"A", 8}, {"B", 8}, {"P", 10}});
    Rng rng(seed);
    for (auto& n : t.h.nodes) n.description_tokens = {2 + t.h.id(n.code), 6 + t.h.id(n.code)};

    t.ctx.hierarchy = &t.h;
    t.ctx.emb = rng.gaussian_matrix(12, 3);  // vocab 12, emb dim 3
    t.ctx.emb.row(0).setZero();
    t.ctx.g = rng.gaussian_matrix(4, static_cast<Eigen::Index>(t.h.size()));  // d_f = 4
    t.ctx.sibling[t.h.id("Z")] = t.h.id("A");
    t.ctx.kw_vocab = {2, 3, 4};
    t.ctx.ek = Mat(3, 3);
    for (int i = 0; i < 3; ++i) t.ctx.ek.row(i) = t.ctx.emb.row(t.ctx.kw_vocab[static_cast<std::size_t>(i)]);
    t.ctx.keywords[t.h.id("A")]["d0"] = {{0, 0.9}, {2, 0.4}};
    t.ctx.keywords[t.h.id("B")]["d1"] = {{1, 0.8}};

    GanConfig cfg;
    cfg.noise_dim = 3;
    cfg.hidden = 6;
    cfg.enc_hidden = 3;
    cfg.lambda_gp = 10.0;
    cfg.use_z = all_flags;
    cfg.use_key = all_flags;
    cfg.use_cls = all_flags;
    cfg.use_cyc = all_flags;
    t.gm = init_gan(cfg, 3, 4, rng);
    return t;
}

}  // namespace

TEST_SUITE("generation") {

TEST_CASE("method string parsing") {
    GanConfig c;
    c.apply_method("wgan");
    CHECK((!c.use_z && !c.use_key && !c.use_cls && !c.use_cyc));
    c.apply_method("wganz+key");
    CHECK((c.use_z && c.use_key && !c.use_cls));
    CHECK(c.method_name() == "wganz+key");
    c.apply_method("wgan+cyc");
    CHECK((c.use_cyc && !c.use_z));
    CHECK_THROWS_AS(c.apply_method("dcgan"), ConfigError);
    CHECK_THROWS_AS(c.apply_method("wgan+foo"), ConfigError);
}

TEST_CASE("dimension-wise max pooling") {
    Mat h(2, 2);
    h << 1, 0, 0, 1;
    std::vector<Eigen::Index> am;
    const Vec e = dimensionwise_max(h, &am);
    CHECK(e(0) == 1.0);
    CHECK(e(1) == 1.0);
    CHECK(am == std::vector<Eigen::Index>{0, 1});

    Mat single(1, 3);
    single << -1, 2, 0.5;
    CHECK((dimensionwise_max(single, nullptr) - single.row(0).transpose()).norm() == 0.0);
}

TEST_CASE("encode_label: single-word description equals its hidden state") {
    Rng rng(4);
    LabelEncoder enc;
    enc.init(3, 5, rng);
    Mat x = rng.gaussian_matrix(1, 3);
    LstmCache lc;
    const Mat h = lstm_forward(enc.lstm, x, &lc);
    const Vec e = encode_description(enc, x, nullptr);
    CHECK((e - h.row(0).transpose()).norm() == 0.0);
}

TEST_CASE("condition vector concatenates e_l and g_l") {
    auto t = make_tiny_gan(9, false);
    const Vec c = condition_vector(t.gm, t.ctx, t.h.id("A"));
    CHECK(c.size() == 3 + 4);  // d_e + d_f
    CHECK((c.tail(4) - t.ctx.g.col(t.h.id("A"))).norm() == 0.0);
}

TEST_CASE("gradient penalty closed forms") {
    const double lambda = 10.0;
    const int cond = 2;
    Rng rng(5);
    Mat f_real = rng.gaussian_matrix(4, 3) * 0.1;
    Mat f_fake = rng.gaussian_matrix(4, 3) * 0.1;
    Mat c = rng.gaussian_matrix(cond, 3) * 0.1;
    Vec alphas(3);
    alphas << 0.2, 0.5, 0.9;

    SUBCASE("unit-gradient linear critic gives zero penalty") {
        Vec w(4);
        w << 0.5, 0.5, 0.5, 0.5;  // ||w|| = 1
        const Critic d = linear_critic(w, cond);
        CHECK(gradient_penalty(d, f_real, f_fake, c, alphas, lambda) < 1e-10);
    }

    SUBCASE("constant critic pays lambda") {
        Critic d = linear_critic(Vec::Zero(4), cond);
        CHECK(gradient_penalty(d, f_real, f_fake, c, alphas, lambda) == doctest::Approx(lambda));
    }

    SUBCASE("D = 2 sum(f) on dim 4 pays lambda * 9") {
        Critic d = linear_critic(Vec::Constant(4, 2.0), cond);  // grad = (2,2,2,2), norm 4
        CHECK(gradient_penalty(d, f_real, f_fake, c, alphas, lambda) == doctest::Approx(lambda * 9.0));
    }

    SUBCASE("penalty is never negative") {
        for (int trial = 0; trial < 20; ++trial) {
            Critic d;
            d.init(4, cond, 6, 0.2, rng);
            CHECK(gradient_penalty(d, rng.gaussian_matrix(4, 3), rng.gaussian_matrix(4, 3),
                                   rng.gaussian_matrix(cond, 3), alphas, lambda) >= 0.0);
        }
    }
}

TEST_CASE("wgan loss values") {
    Rng rng(6);
    const int cond = 2;
    Vec alphas(2);
    alphas << 0.3, 0.7;
    Mat f_real = rng.gaussian_matrix(3, 2);
    Mat f_fake = rng.gaussian_matrix(3, 2);
    Mat c = rng.gaussian_matrix(cond, 2);
    const Vec ones = Vec::Ones(2);

    SUBCASE("zero critic: wasserstein 0, critic loss = lambda") {
        Critic d = linear_critic(Vec::Zero(3), cond);
        d.b1.setZero();
        const auto v = wgan_losses(d, f_real, f_fake, c, alphas, 10.0, ones);
        CHECK(v.wasserstein == 0.0);
        CHECK(v.generator == 0.0);
        CHECK(v.critic == doctest::Approx(10.0));
    }

    SUBCASE("identical real and fake features cancel the wasserstein term") {
        Critic d;
        d.init(3, cond, 5, 0.2, rng);
        const auto v = wgan_losses(d, f_real, f_real, c, alphas, 10.0, ones);
        CHECK(v.wasserstein == 0.0);
    }

    SUBCASE("hand-unrolled two-example oracle") {
        Critic d;
        d.init(3, cond, 5, 0.2, rng);
        const Vec weights = Vec::Ones(2);
        const auto v = wgan_losses(d, f_real, f_fake, c, alphas, 10.0, weights);

        // independent scalar recomputation of every term
        auto dval = [&](const Vec& f, const Vec& cc) {
            double out = d.b2(0, 0);
            for (Eigen::Index j = 0; j < d.w1.rows(); ++j) {
                double pre = d.b1(j, 0);
                for (Eigen::Index k = 0; k < 3; ++k) pre += d.w1(j, k) * f(k);
                for (Eigen::Index k = 0; k < cond; ++k) pre += d.w1(j, 3 + k) * cc(k);
                out += d.w2(0, j) * (pre > 0 ? pre : 0.2 * pre);
            }
            return out;
        };
        double wass = 0.0, pen = 0.0;
        for (int i = 0; i < 2; ++i) {
            wass += dval(f_real.col(i), c.col(i)) - dval(f_fake.col(i), c.col(i));
            const Vec fhat = alphas(i) * f_real.col(i) + (1 - alphas(i)) * f_fake.col(i);
            // numeric gradient of D wrt fhat
            Vec grad(3);
            for (int k = 0; k < 3; ++k) {
                Vec fp = fhat, fm = fhat;
                fp(k) += 1e-6;
                fm(k) -= 1e-6;
                grad(k) = (dval(fp, c.col(i)) - dval(fm, c.col(i))) / 2e-6;
            }
            pen += (grad.norm() - 1.0) * (grad.norm() - 1.0);
        }
        wass /= 2.0;
        pen = 10.0 * pen / 2.0;
        CHECK(v.wasserstein == doctest::Approx(wass).epsilon(1e-9));
        CHECK(v.penalty == doctest::Approx(pen).epsilon(1e-6));
        CHECK(v.critic == doctest::Approx(-wass + pen).epsilon(1e-6));
    }
}

TEST_CASE("zero-shot weighting") {
    Rng rng(7);
    const int cond = 2;
    Critic d;
    d.init(3, cond, 5, 0.2, rng);
    Mat f_sib = rng.gaussian_matrix(3, 2);
    Mat f_fake = rng.gaussian_matrix(3, 2);
    Mat c = rng.gaussian_matrix(cond, 2);
    Vec alphas(2);
    alphas << 0.4, 0.6;

    const auto unweighted = wgan_losses(d, f_sib, f_fake, c, alphas, 10.0, Vec::Ones(2));

    SUBCASE("pi = 0 leaves only the penalty") {
        const auto v = wgan_losses(d, f_sib, f_fake, c, alphas, 10.0, Vec::Zero(2));
        CHECK(v.wasserstein == 0.0);
        CHECK(v.generator == 0.0);
        CHECK(v.critic == doctest::Approx(v.penalty));
        CHECK(v.penalty == doctest::Approx(unweighted.penalty));  // penalty unscaled
    }

    SUBCASE("pi = 1 equals the seen-code loss with sibling features as real") {
        const auto v = wgan_losses(d, f_sib, f_fake, c, alphas, 10.0, Vec::Ones(2));
        CHECK(v.critic == unweighted.critic);
        CHECK(v.generator == unweighted.generator);
    }

    SUBCASE("pi = 0.5 halves the wasserstein terms only") {
        const auto v = wgan_losses(d, f_sib, f_fake, c, alphas, 10.0, Vec::Constant(2, 0.5));
        CHECK(v.wasserstein == doctest::Approx(0.5 * unweighted.wasserstein).epsilon(1e-12));
        CHECK(v.generator == doctest::Approx(0.5 * unweighted.generator).epsilon(1e-12));
        CHECK(v.critic == doctest::Approx(-0.5 * unweighted.wasserstein + unweighted.penalty));
    }
}

TEST_CASE("keyword loss values") {
    SUBCASE("singleton vocabulary gives zero loss") {
        Mat ek(1, 3);
        ek << 1, 2, 3;
        Rng rng(8);
        const Mat q = rng.gaussian_matrix(3, 4);
        CHECK(keyword_loss(ek, {{0, 1.0}}, q, rng.gaussian_vector(4)) == doctest::Approx(0.0));
    }

    SUBCASE("two equal-logit keywords with unit weights cost 2 ln 2") {
        Mat ek(2, 3);
        ek << 1, 0, 0, 1, 0, 0;  // identical rows -> equal logits
        Rng rng(9);
        const Mat q = rng.gaussian_matrix(3, 4);
        const Vec f = rng.gaussian_vector(4);
        CHECK(keyword_loss(ek, {{0, 1.0}, {1, 1.0}}, q, f) == doctest::Approx(2.0 * std::log(2.0)));
    }

    SUBCASE("three-word vocabulary matches an independent softmax recomputation") {
        Rng rng(10);
        Mat ek = rng.gaussian_matrix(3, 3) * 0.3;
        const Mat q = rng.gaussian_matrix(3, 4) * 0.3;
        const Vec f = rng.gaussian_vector(4);
        const std::vector<std::pair<int, double>> kws{{0, 0.7}, {2, 0.2}};
        double z = 0.0;
        Vec logits(3);
        for (int i = 0; i < 3; ++i) {
            logits(i) = ek.row(i).dot((q * f).transpose());
            z += std::exp(logits(i));
        }
        const double expect = -0.7 * std::log(std::exp(logits(0)) / z) -
                              0.2 * std::log(std::exp(logits(2)) / z);
        CHECK(keyword_loss(ek, kws, q, f) == doctest::Approx(expect).epsilon(1e-12));
    }

    SUBCASE("negative-similarity keywords are clamped out") {
        Mat ek(2, 2);
        ek << 1, 0, 0, 1;
        const Mat q = Mat::Identity(2, 2);
        const Vec f = Vec{{0.4, 0.1}};
        CHECK(keyword_loss(ek, {{0, -0.5}}, q, f) == 0.0);
    }
}

TEST_CASE("cls loss values") {
    CHECK(cls_loss(Vec::Zero(3), Vec::Ones(3)) == doctest::Approx(std::log(2.0)));
    CHECK(cls_loss(Vec::Constant(3, 20.0), Vec::Ones(3)) < 1e-8);  // strongly positive logit
    // g.f = -1 -> -log sigma(-1) ~ 1.3133
    Vec g(2), f(2);
    g << -1, 0;
    f << 1, 5;
    CHECK(cls_loss(g, f) == doctest::Approx(1.3133).epsilon(1e-3));
    CHECK(cls_loss(g, f) == doctest::Approx(log1pexp(1.0)).epsilon(1e-12));
}

TEST_CASE("cyc loss values") {
    Mat r = Mat::Identity(2, 2);
    CHECK(cyc_loss(Vec{{0.3, 0.4}}, r, Vec{{0.3, 0.4}}) == doctest::Approx(0.0));
    CHECK(cyc_loss(Vec{{1.0, 1.0}}, r, Vec::Zero(2)) == doctest::Approx(2.0));
    CHECK(cyc_loss(Vec{{3.0, 4.0}}, r, Vec::Zero(2)) == doctest::Approx(25.0));
}

TEST_CASE("gradient check: critic objective (plain and weighted)") {
    auto t = make_tiny_gan(12, false);
    Rng rng(13);
    const int b = 3;
    Mat f_real = rng.gaussian_matrix(4, b);
    Mat f_fake = rng.gaussian_matrix(4, b);
    Mat c = rng.gaussian_matrix(3 + 4, b);
    Vec alphas(b);
    alphas << 0.25, 0.5, 0.75;

    for (const double w : {1.0, 0.37, 0.0}) {  // 0 isolates the penalty term
        const Vec weights = Vec::Constant(b, w);
        std::vector<Mat> grads;
        critic_batch_loss(t.gm.critic, f_real, f_fake, c, alphas, 10.0, weights, &grads);
        ParamSet ps = t.gm.critic_parameters();
        auto loss = [&] {
            return critic_batch_loss(t.gm.critic, f_real, f_fake, c, alphas, 10.0, weights, nullptr);
        };
        const auto res = gzsl::testing::grad_check(loss, ps.names, ps.tensors, grads);
        INFO("weight=", w, " worst=", res.worst);
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("gradient check: generator-side objective with every auxiliary loss") {
    auto t = make_tiny_gan(14, true);
    Rng rng(15);
    std::vector<GenItem> items;
    GenItem a;
    a.code = t.h.id("A");
    a.weight = 1.0;
    a.keywords = &t.ctx.keywords[t.h.id("A")]["d0"];
    GenItem b;
    b.code = t.h.id("Z");
    b.weight = 0.5;  // zero-shot style weighting, fixed for the check
    GenItem c2;
    c2.code = t.h.id("B");
    c2.weight = 1.0;
    c2.keywords = &t.ctx.keywords[t.h.id("B")]["d1"];
    items = {a, b, c2};
    const Mat z = rng.gaussian_matrix(t.gm.cfg.noise_dim, 3);

    std::vector<Mat> grads;
    generator_batch_loss(t.gm, t.ctx, items, z, &grads);
    ParamSet ps = t.gm.generator_side_parameters();
    auto loss = [&] { return generator_batch_loss(t.gm, t.ctx, items, z, nullptr); };
    const auto res = gzsl::testing::grad_check(loss, ps.names, ps.tensors, grads);
    INFO("worst=", res.worst);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("flags off reduce the objective to the plain wgan losses") {
    auto t = make_tiny_gan(16, false);
    Rng rng(17);
    std::vector<GenItem> items;
    for (const char* code : {"A", "B"}) {
        GenItem it;
        it.code = t.h.id(code);
        items.push_back(it);
    }
    const Mat z = rng.gaussian_matrix(t.gm.cfg.noise_dim, 2);

    // rebuild the generated batch exactly as generator_batch_loss does
    const int d_e = t.gm.cfg.enc_hidden;
    Mat c(d_e + 4, 2);
    for (int i = 0; i < 2; ++i) c.col(i) = condition_vector(t.gm, t.ctx, items[static_cast<std::size_t>(i)].code);
    Mat in(z.rows() + c.rows(), 2);
    in.topRows(z.rows()) = z;
    in.bottomRows(c.rows()) = c;
    const Mat f_fake = t.gm.gen.forward(in, nullptr);

    const double gen_loss = generator_batch_loss(t.gm, t.ctx, items, z, nullptr);
    const Vec dvals = critic_values(t.gm.critic, f_fake, c);
    CHECK(gen_loss == doctest::Approx(-dvals.mean()).epsilon(1e-12));

    Vec alphas(2);
    alphas << 0.1, 0.8;
    Mat f_real = rng.gaussian_matrix(4, 2);
    const auto v = wgan_losses(t.gm.critic, f_real, f_fake, c, alphas, 10.0, Vec::Ones(2));
    const double critic_loss =
        critic_batch_loss(t.gm.critic, f_real, f_fake, c, alphas, 10.0, Vec::Ones(2), nullptr);
    CHECK(critic_loss == doctest::Approx(v.critic).epsilon(1e-12));
}

TEST_CASE("training: parameter isolation, schedule ratio, determinism") {
    auto t = make_tiny_gan(18, true);
    Rng rng(19);
    std::map<int, std::vector<FeatRow>> positives;
    for (const char* code : {"A", "B"}) {
        for (int i = 0; i < 12; ++i) {
            FeatRow row;
            row.doc_id = std::string("d") + (code[0] == 'A' ? "0" : "1");
            row.f = rng.gaussian_vector(4).cwiseAbs();
            positives[t.h.id(code)].push_back(std::move(row));
        }
    }
    t.gm.cfg.batch = 4;
    t.gm.cfg.epochs = 2;
    t.gm.cfg.critic_steps = 5;

    SUBCASE("critic and generator steps touch disjoint parameters") {
        GenerativeModel before = t.gm;
        // one manual critic step
        Mat f_real = rng.gaussian_matrix(4, 3);
        Mat f_fake = rng.gaussian_matrix(4, 3);
        Mat c = rng.gaussian_matrix(7, 3);
        Vec alphas = Vec::Constant(3, 0.5);
        std::vector<Mat> grads;
        critic_batch_loss(t.gm.critic, f_real, f_fake, c, alphas, 10.0, Vec::Ones(3), &grads);
        Adam opt(1e-3);
        ParamSet cps = t.gm.critic_parameters();
        for (Mat* p : cps.tensors) opt.add(p);
        opt.step(grads);
        ParamSet gen_before = before.generator_side_parameters();
        ParamSet gen_after = t.gm.generator_side_parameters();
        for (std::size_t i = 0; i < gen_before.tensors.size(); ++i)
            CHECK((*gen_before.tensors[i] - *gen_after.tensors[i]).norm() == 0.0);
        CHECK((before.critic.w1 - t.gm.critic.w1).norm() > 0.0);

        // one manual generator step leaves the critic untouched
        GenerativeModel snap = t.gm;
        std::vector<GenItem> items(3);
        items[0].code = t.h.id("A");
        items[1].code = t.h.id("B");
        items[2].code = t.h.id("Z");
        items[2].weight = 0.4;
        std::vector<Mat> ggrads;
        generator_batch_loss(t.gm, t.ctx, items, rng.gaussian_matrix(3, 3), &ggrads);
        Adam gopt(1e-3);
        ParamSet gps = t.gm.generator_side_parameters();
        for (Mat* p : gps.tensors) gopt.add(p);
        gopt.step(ggrads);
        ParamSet crit_before = snap.critic_parameters();
        ParamSet crit_after = t.gm.critic_parameters();
        for (std::size_t i = 0; i < crit_before.tensors.size(); ++i)
            CHECK((*crit_before.tensors[i] - *crit_after.tensors[i]).norm() == 0.0);
        CHECK((snap.gen.w1 - t.gm.gen.w1).norm() > 0.0);
    }

    SUBCASE("critic/generator step counters keep the configured ratio") {
        const GanTrainLog log = train_gan(t.gm, t.ctx, positives, 99);
        CHECK(log.critic_steps == 5 * log.generator_steps);
        CHECK(log.generator_steps > 0);
    }

    SUBCASE("same seed, same final state") {
        GenerativeModel gm2 = t.gm;
        const GanTrainLog la = train_gan(t.gm, t.ctx, positives, 7);
        const GanTrainLog lb = train_gan(gm2, t.ctx, positives, 7);
        CHECK(la.epoch_critic_loss == lb.epoch_critic_loss);
        CHECK(la.epoch_generator_loss == lb.epoch_generator_loss);
        CHECK((t.gm.gen.w1 - gm2.gen.w1).norm() == 0.0);
        CHECK((t.gm.critic.w1 - gm2.critic.w1).norm() == 0.0);
    }

    SUBCASE("zero-shot codes without siblings are skipped and counted") {
        t.ctx.sibling.clear();
        const GanTrainLog log = train_gan(t.gm, t.ctx, positives, 3);
        CHECK(log.skipped_zero_shot_codes == 1);
    }
}

TEST_CASE("empty batches are rejected") {
    auto t = make_tiny_gan(20, false);
    CHECK_THROWS_AS(generator_batch_loss(t.gm, t.ctx, {}, Mat(3, 0), nullptr), ConfigError);
    CHECK_THROWS_AS(train_gan(t.gm, t.ctx, {}, 1), ConfigError);
}

}  // TEST_SUITE
