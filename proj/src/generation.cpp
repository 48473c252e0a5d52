#include "gzsl/generation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gzsl {

void GanConfig::apply_method(const std::string& method) {
    use_z = use_key = use_cls = use_cyc = false;
    std::string head = method;
    std::vector<std::string> mods;
    std::size_t pos;
    while ((pos = head.rfind('+')) != std::string::npos) {
        mods.push_back(head.substr(pos + 1));
        head = head.substr(0, pos);
    }
    if (head == "wganz")
        use_z = true;
    else if (head != "wgan")
        throw ConfigError("unknown GAN method '" + method + "'");
    for (const auto& m : mods) {
        if (m == "key")
            use_key = true;
        else if (m == "cls")
            use_cls = true;
        else if (m == "cyc")
            use_cyc = true;
        else
            throw ConfigError("unknown GAN loss flag '+" + m + "'");
    }
}

std::string GanConfig::method_name() const {
    std::string name = use_z ? "wganz" : "wgan";
    if (use_cls) name += "+cls";
    if (use_cyc) name += "+cyc";
    if (use_key) name += "+key";
    return name;
}

// ---- networks ---------------------------------------------------------------------

void Generator::init(int in_dim, int hidden, int out_dim, Rng& rng) {
    w1 = glorot(hidden, in_dim, rng);
    b1 = Mat::Zero(hidden, 1);
    w2 = glorot(out_dim, hidden, rng);
    b2 = Mat::Zero(out_dim, 1);
}

Mat Generator::forward(const Mat& in, Mat* hg) const {
    Mat h = ((w1 * in).colwise() + b1.col(0)).cwiseMax(0.0);
    Mat out = ((w2 * h).colwise() + b2.col(0)).cwiseMax(0.0);
    if (hg) *hg = std::move(h);
    return out;
}

ParamSet Generator::parameters() {
    ParamSet ps;
    ps.add("w1", &w1);
    ps.add("b1", &b1);
    ps.add("w2", &w2);
    ps.add("b2", &b2);
    return ps;
}

void Critic::init(int feat_dim_, int cond_dim, int hidden, double slope_, Rng& rng) {
    feat_dim = feat_dim_;
    slope = slope_;
    w1 = glorot(hidden, feat_dim + cond_dim, rng);
    b1 = Mat::Zero(hidden, 1);
    w2 = glorot(1, hidden, rng);
    b2 = Mat::Zero(1, 1);
}

ParamSet Critic::parameters() {
    ParamSet ps;
    ps.add("w1", &w1);
    ps.add("b1", &b1);
    ps.add("w2", &w2);
    ps.add("b2", &b2);
    return ps;
}

namespace {

inline Mat lrelu(const Mat& x, double slope) {
    return x.unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
}
inline Mat lrelu_grad(const Mat& x, double slope) {
    return x.unaryExpr([slope](double v) { return v > 0 ? 1.0 : slope; });
}

struct CriticForward {
    Mat u;    // (d_f + c_dim) x B
    Mat pre;  // hidden x B
    Mat hid;  // hidden x B
    Vec d;    // B
};

CriticForward critic_forward(const Critic& d, const Mat& f, const Mat& c) {
    if (f.cols() != c.cols()) throw ConfigError("critic: batch size mismatch");
    CriticForward fw;
    fw.u = Mat(f.rows() + c.rows(), f.cols());
    fw.u.topRows(f.rows()) = f;
    fw.u.bottomRows(c.rows()) = c;
    fw.pre = (d.w1 * fw.u).colwise() + d.b1.col(0);
    fw.hid = lrelu(fw.pre, d.slope);
    fw.d = ((d.w2 * fw.hid).colwise() + d.b2.col(0)).row(0).transpose();
    return fw;
}

// accumulate MLP grads for dL/dD given per-item dd
void critic_backward_values(const Critic& d, const CriticForward& fw, const Vec& dd, Mat& dw1,
                            Mat& db1, Mat& dw2, Mat& db2) {
    const Mat dpre =
        (d.w2.transpose() * dd.transpose()).cwiseProduct(lrelu_grad(fw.pre, d.slope));
    dw1 += dpre * fw.u.transpose();
    db1.col(0) += dpre.rowwise().sum();
    dw2 += dd.transpose() * fw.hid.transpose();
    db2(0, 0) += dd.sum();
}

}  // namespace

Vec critic_values(const Critic& d, const Mat& f, const Mat& c) {
    return critic_forward(d, f, c).d;
}

Mat critic_feature_grads(const Critic& d, const Mat& f, const Mat& c) {
    const CriticForward fw = critic_forward(d, f, c);
    const Mat qm = lrelu_grad(fw.pre, d.slope).array().colwise() * d.w2.row(0).transpose().array();
    return d.w1.leftCols(d.feat_dim).transpose() * qm;
}

void LabelEncoder::init(int emb_dim, int hidden, Rng& rng) { lstm.init(emb_dim, hidden, rng); }

Vec dimensionwise_max(const Mat& h, std::vector<Eigen::Index>* argmax) {
    if (h.rows() < 1) throw FormatError("dimensionwise_max: empty sequence");
    Vec e(h.cols());
    if (argmax) argmax->assign(static_cast<std::size_t>(h.cols()), 0);
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
        Eigen::Index best = 0;
        e(j) = h.col(j).maxCoeff(&best);
        if (argmax) (*argmax)[static_cast<std::size_t>(j)] = best;
    }
    return e;
}

Vec encode_description(const LabelEncoder& enc, const Mat& desc_emb, EncodeCache* cache) {
    if (desc_emb.rows() < 1) throw FormatError("encode_description: empty description");
    LstmCache lc;
    const Mat h = lstm_forward(enc.lstm, desc_emb, &lc);
    std::vector<Eigen::Index> argmax;
    const Vec e = dimensionwise_max(h, &argmax);
    if (cache) {
        cache->lstm = std::move(lc);
        cache->argmax = std::move(argmax);
        cache->x = desc_emb;
    }
    return e;
}

ParamSet GenerativeModel::generator_side_parameters() {
    ParamSet ps;
    ps.append(enc.parameters(), "enc.");
    ps.append(gen.parameters(), "gen.");
    ps.add("q", &q);
    ps.add("r", &r);
    return ps;
}

ParamSet GenerativeModel::critic_parameters() {
    ParamSet ps;
    ps.append(critic.parameters(), "critic.");
    return ps;
}

ParamSet GenerativeModel::parameters() {
    ParamSet ps = generator_side_parameters();
    ps.append(critic.parameters(), "critic.");
    return ps;
}

GenerativeModel init_gan(const GanConfig& cfg, int emb_dim, int feat_dim, Rng& rng) {
    GenerativeModel gm;
    gm.cfg = cfg;
    gm.enc.init(emb_dim, cfg.enc_hidden, rng);
    const int cond_dim = cfg.enc_hidden + feat_dim;
    gm.gen.init(cfg.noise_dim + cond_dim, cfg.hidden, feat_dim, rng);
    gm.critic.init(feat_dim, cond_dim, cfg.hidden, cfg.leaky_slope, rng);
    gm.q = glorot(emb_dim, feat_dim, rng);
    gm.r = glorot(cond_dim, feat_dim, rng);
    return gm;
}

// ---- loss values ---------------------------------------------------------------------

double gradient_penalty(const Critic& d, const Mat& f_real, const Mat& f_fake, const Mat& c,
                        const Vec& alphas, double lambda) {
    const Eigen::Index b = f_real.cols();
    Mat f_hat(f_real.rows(), b);
    for (Eigen::Index i = 0; i < b; ++i)
        f_hat.col(i) = alphas(i) * f_real.col(i) + (1.0 - alphas(i)) * f_fake.col(i);
    const Mat grads = critic_feature_grads(d, f_hat, c);
    double pen = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double n = grads.col(i).norm();
        pen += (n - 1.0) * (n - 1.0);
    }
    return lambda * pen / static_cast<double>(b);
}

WganLossValues wgan_losses(const Critic& d, const Mat& f_real, const Mat& f_fake, const Mat& c,
                           const Vec& alphas, double lambda, const Vec& weights) {
    if (f_real.cols() == 0) throw ConfigError("wgan_losses: empty batch");
    const auto b = static_cast<double>(f_real.cols());
    const Vec d_real = critic_values(d, f_real, c);
    const Vec d_fake = critic_values(d, f_fake, c);
    WganLossValues v{};
    v.wasserstein = (weights.cwiseProduct(d_real - d_fake)).sum() / b;
    v.penalty = gradient_penalty(d, f_real, f_fake, c, alphas, lambda);
    v.critic = -v.wasserstein + v.penalty;
    v.generator = -(weights.cwiseProduct(d_fake)).sum() / b;
    return v;
}

double keyword_loss(const Mat& ek, const std::vector<std::pair<int, double>>& keywords, const Mat& q,
                    const Vec& f_fake) {
    if (ek.rows() == 0) throw ConfigError("keyword_loss: empty keyword vocabulary");
    const Vec logits = ek * (q * f_fake);
    const double m = logits.maxCoeff();
    const double logz = m + std::log((logits.array() - m).exp().sum());
    double loss = 0.0;
    for (const auto& [k, w] : keywords) {
        if (k < 0 || k >= logits.size()) throw ConfigError("keyword_loss: keyword outside vocabulary");
        loss += std::max(w, 0.0) * (logz - logits(k));
    }
    return loss;
}

double cls_loss(const Vec& g_l, const Vec& f_fake) { return log1pexp(-g_l.dot(f_fake)); }

double cyc_loss(const Vec& c_l, const Mat& r, const Vec& f_fake) {
    return (c_l - r * f_fake).squaredNorm();
}

// ---- critic objective -------------------------------------------------------------------

double critic_batch_loss(const Critic& d, const Mat& f_real, const Mat& f_fake, const Mat& c,
                         const Vec& alphas, double lambda, const Vec& weights,
                         std::vector<Mat>* grads) {
    if (f_real.cols() == 0) throw ConfigError("critic_batch_loss: empty batch");
    const Eigen::Index b = f_real.cols();
    const double inv_b = 1.0 / static_cast<double>(b);

    const CriticForward fw_real = critic_forward(d, f_real, c);
    const CriticForward fw_fake = critic_forward(d, f_fake, c);

    Mat f_hat(f_real.rows(), b);
    for (Eigen::Index i = 0; i < b; ++i)
        f_hat.col(i) = alphas(i) * f_real.col(i) + (1.0 - alphas(i)) * f_fake.col(i);
    const CriticForward fw_hat = critic_forward(d, f_hat, c);

    // input-gradient of D at the interpolates
    const Mat qm = lrelu_grad(fw_hat.pre, d.slope).array().colwise() * d.w2.row(0).transpose().array();
    const Mat af = d.w1.leftCols(d.feat_dim);
    const Mat gm = af.transpose() * qm;  // d_f x B

    double wass = 0.0, pen = 0.0;
    Vec norms(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        wass += weights(i) * (fw_real.d(i) - fw_fake.d(i));
        norms(i) = gm.col(i).norm();
        pen += (norms(i) - 1.0) * (norms(i) - 1.0);
    }
    const double loss = -wass * inv_b + lambda * pen * inv_b;

    if (grads) {
        Mat dw1 = Mat::Zero(d.w1.rows(), d.w1.cols());
        Mat db1 = Mat::Zero(d.b1.rows(), 1);
        Mat dw2 = Mat::Zero(1, d.w2.cols());
        Mat db2 = Mat::Zero(1, 1);

        critic_backward_values(d, fw_real, Vec(-weights * inv_b), dw1, db1, dw2, db2);
        critic_backward_values(d, fw_fake, Vec(weights * inv_b), dw1, db1, dw2, db2);

        // penalty: leaky-relu second derivative vanishes a.e., so only the
        // direct dependencies of grad_f on (w1_f, w2) remain
        Mat dpdg(gm.rows(), b);
        for (Eigen::Index i = 0; i < b; ++i) {
            if (norms(i) < 1e-300)
                dpdg.col(i).setZero();
            else
                dpdg.col(i) = (2.0 * lambda * inv_b * (norms(i) - 1.0) / norms(i)) * gm.col(i);
        }
        dw1.leftCols(d.feat_dim) += qm * dpdg.transpose();
        const Mat t = af * dpdg;  // hidden x B
        dw2 += (lrelu_grad(fw_hat.pre, d.slope).cwiseProduct(t)).rowwise().sum().transpose();

        *grads = {dw1, db1, dw2, db2};
    }
    return loss;
}

// ---- generator-side objective ----------------------------------------------------------

Mat GanContext::description_embeddings(int label) const {
    const auto& toks = hierarchy->node(label).description_tokens;
    if (toks.empty()) throw FormatError("label has no description tokens");
    Mat x(static_cast<Eigen::Index>(toks.size()), emb.cols());
    for (std::size_t i = 0; i < toks.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = emb.row(toks[i]);
    return x;
}

double generator_batch_loss(const GenerativeModel& gm, const GanContext& ctx,
                            const std::vector<GenItem>& items, const Mat& z,
                            std::vector<Mat>* grads) {
    if (items.empty()) throw ConfigError("generator_batch_loss: empty batch");
    const auto b = static_cast<Eigen::Index>(items.size());
    if (z.cols() != b) throw ConfigError("generator_batch_loss: z batch mismatch");
    const double inv_b = 1.0 / static_cast<double>(b);
    const int d_e = gm.cfg.enc_hidden;
    const auto d_f = static_cast<int>(ctx.g.rows());
    const int cdim = d_e + d_f;

    // encode each distinct code once
    std::map<int, EncodeCache> caches;
    std::map<int, Vec> e_vecs;
    for (const auto& it : items)
        if (!e_vecs.count(it.code)) {
            EncodeCache cache;
            e_vecs[it.code] = encode_description(gm.enc, ctx.description_embeddings(it.code), &cache);
            caches.emplace(it.code, std::move(cache));
        }

    Mat c(cdim, b);
    for (Eigen::Index i = 0; i < b; ++i) {
        c.col(i).head(d_e) = e_vecs.at(items[static_cast<std::size_t>(i)].code);
        c.col(i).tail(d_f) = ctx.g.col(items[static_cast<std::size_t>(i)].code);
    }

    Mat in(z.rows() + cdim, b);
    in.topRows(z.rows()) = z;
    in.bottomRows(cdim) = c;
    Mat hg;
    const Mat f_fake = gm.gen.forward(in, &hg);

    Mat df = Mat::Zero(d_f, b);
    Mat dc_direct = Mat::Zero(cdim, b);
    Mat dq = Mat::Zero(gm.q.rows(), gm.q.cols());
    Mat dr = Mat::Zero(gm.r.rows(), gm.r.cols());
    double loss = 0.0;

    // Wasserstein term: -E[w * D(f_fake, c)]
    {
        const CriticForward fw = critic_forward(gm.critic, f_fake, c);
        const Mat qm =
            lrelu_grad(fw.pre, gm.critic.slope).array().colwise() * gm.critic.w2.row(0).transpose().array();
        for (Eigen::Index i = 0; i < b; ++i)
            loss -= items[static_cast<std::size_t>(i)].weight * fw.d(i) * inv_b;
        if (grads) {
            const Mat gf = gm.critic.w1.leftCols(d_f).transpose() * qm;   // d D/d f
            const Mat gc = gm.critic.w1.rightCols(cdim).transpose() * qm;  // d D/d c
            for (Eigen::Index i = 0; i < b; ++i) {
                const double s = -items[static_cast<std::size_t>(i)].weight * inv_b;
                df.col(i) += s * gf.col(i);
                dc_direct.col(i) += s * gc.col(i);
            }
        }
    }

    if (gm.cfg.use_key) {
        for (Eigen::Index i = 0; i < b; ++i) {
            const auto& it = items[static_cast<std::size_t>(i)];
            if (!it.keywords || it.keywords->empty()) continue;
            const Vec qf = gm.q * f_fake.col(i);
            Vec logits = ctx.ek * qf;
            const double m = logits.maxCoeff();
            Vec p = (logits.array() - m).exp();
            const double zsum = p.sum();
            p /= zsum;
            const double logz = m + std::log(zsum);
            double wsum = 0.0, item_loss = 0.0;
            Vec dlogits = Vec::Zero(logits.size());
            for (const auto& [k, w] : *it.keywords) {
                const double cw = std::max(w, 0.0);
                wsum += cw;
                item_loss += cw * (logz - logits(k));
                dlogits(k) -= cw;
            }
            loss += gm.cfg.beta_key * inv_b * item_loss;
            if (grads) {
                dlogits += wsum * p;
                dlogits *= gm.cfg.beta_key * inv_b;
                const Vec dqf = ctx.ek.transpose() * dlogits;
                dq += dqf * f_fake.col(i).transpose();
                df.col(i) += gm.q.transpose() * dqf;
            }
        }
    }

    if (gm.cfg.use_cls) {
        for (Eigen::Index i = 0; i < b; ++i) {
            const Vec g_l = ctx.g.col(items[static_cast<std::size_t>(i)].code);
            const double logit = g_l.dot(f_fake.col(i));
            loss += gm.cfg.w_cls * inv_b * log1pexp(-logit);
            if (grads) df.col(i) += gm.cfg.w_cls * inv_b * (sigmoid(logit) - 1.0) * g_l;
        }
    }

    if (gm.cfg.use_cyc) {
        for (Eigen::Index i = 0; i < b; ++i) {
            const Vec resid = c.col(i) - gm.r * f_fake.col(i);
            loss += gm.cfg.w_cyc * inv_b * resid.squaredNorm();
            if (grads) {
                dr += gm.cfg.w_cyc * inv_b * (-2.0) * resid * f_fake.col(i).transpose();
                df.col(i) += gm.cfg.w_cyc * inv_b * (-2.0) * gm.r.transpose() * resid;
                dc_direct.col(i) += gm.cfg.w_cyc * inv_b * 2.0 * resid;
            }
        }
    }

    if (!grads) return loss;

    // through the generator MLP
    Mat dw1 = Mat::Zero(gm.gen.w1.rows(), gm.gen.w1.cols());
    Mat db1 = Mat::Zero(gm.gen.b1.rows(), 1);
    Mat dw2 = Mat::Zero(gm.gen.w2.rows(), gm.gen.w2.cols());
    Mat db2 = Mat::Zero(gm.gen.b2.rows(), 1);
    const Mat dopre = (f_fake.array() > 0.0).cast<double>() * df.array();
    dw2 += dopre * hg.transpose();
    db2.col(0) += dopre.rowwise().sum();
    const Mat dhg = gm.gen.w2.transpose() * dopre;
    const Mat dhpre = (hg.array() > 0.0).cast<double>() * dhg.array();
    dw1 += dhpre * in.transpose();
    db1.col(0) += dhpre.rowwise().sum();
    const Mat din = gm.gen.w1.transpose() * dhpre;

    Mat dc_total = din.bottomRows(cdim) + dc_direct;

    // encoder: route the e_l part through the max-pool and the LSTM
    std::map<int, Vec> de;
    for (Eigen::Index i = 0; i < b; ++i) {
        const int code = items[static_cast<std::size_t>(i)].code;
        auto [it, fresh] = de.try_emplace(code, Vec::Zero(d_e));
        it->second += dc_total.col(i).head(d_e);
    }
    LstmGrads lg(gm.enc.lstm);
    for (const auto& [code, grad_e] : de) {
        const EncodeCache& cache = caches.at(code);
        Mat dh = Mat::Zero(cache.lstm.h.rows(), cache.lstm.h.cols());
        for (Eigen::Index j = 0; j < grad_e.size(); ++j)
            dh(cache.argmax[static_cast<std::size_t>(j)], j) += grad_e(j);
        lstm_backward(gm.enc.lstm, cache.lstm, dh, lg);
    }

    grads->clear();
    for (Mat* g : lg.list()) grads->push_back(*g);
    grads->push_back(dw1);
    grads->push_back(db1);
    grads->push_back(dw2);
    grads->push_back(db2);
    grads->push_back(dq);
    grads->push_back(dr);
    return loss;
}

// ---- training ----------------------------------------------------------------------------

Vec condition_vector(const GenerativeModel& gm, const GanContext& ctx, int label) {
    const Vec e = encode_description(gm.enc, ctx.description_embeddings(label), nullptr);
    Vec c(e.size() + ctx.g.rows());
    c.head(e.size()) = e;
    c.tail(ctx.g.rows()) = ctx.g.col(label);
    return c;
}

Mat synthesize_features(const GenerativeModel& gm, const GanContext& ctx, int label, int count,
                        std::uint64_t seed) {
    if (count <= 0) throw ConfigError("synthesize_features: count must be positive");
    if (label < 0 || label >= static_cast<int>(ctx.hierarchy->size()))
        throw ConfigError("synthesize_features: unknown label");
    Rng rng(seed);
    const Vec c = condition_vector(gm, ctx, label);
    Mat in(gm.cfg.noise_dim + c.size(), count);
    for (int i = 0; i < count; ++i) {
        in.col(i).head(gm.cfg.noise_dim) = rng.gaussian_vector(gm.cfg.noise_dim);
        in.col(i).tail(c.size()) = c;
    }
    return gm.gen.forward(in, nullptr);
}

namespace {

struct BatchDraw {
    std::vector<GenItem> items;
    Mat f_real;  // d_f x B
    Mat c;       // cdim x B
};

}  // namespace

GanTrainLog train_gan(GenerativeModel& gm, const GanContext& ctx,
                      const std::map<int, std::vector<FeatRow>>& positives, std::uint64_t seed) {
    if (positives.empty()) throw ConfigError("train_gan: no positive features");
    const auto d_f = static_cast<int>(ctx.g.rows());
    for (const auto& [code, rows] : positives)
        for (const auto& r : rows)
            if (r.f.size() != d_f) throw ConfigError("train_gan: feature dim mismatch in dump");

    GanTrainLog log;
    std::vector<int> zero_codes;  // zero-shot codes that have a sibling
    if (gm.cfg.use_z) {
        for (int u : ctx.hierarchy->zero_shot) {
            if (ctx.sibling.count(u) && positives.count(ctx.sibling.at(u)))
                zero_codes.push_back(u);
            else
                ++log.skipped_zero_shot_codes;
        }
    }

    std::vector<std::pair<int, int>> stream;  // (code, row)
    for (const auto& [code, rows] : positives)
        for (std::size_t ri = 0; ri < rows.size(); ++ri) stream.emplace_back(code, static_cast<int>(ri));

    Rng rng(seed);
    const auto batch = static_cast<std::size_t>(gm.cfg.batch);
    std::size_t cursor = stream.size();  // force initial shuffle

    auto encode_all = [&](const std::vector<GenItem>& items) {
        std::map<int, Vec> evecs;
        const int d_e = gm.cfg.enc_hidden;
        Mat c(d_e + d_f, static_cast<Eigen::Index>(items.size()));
        for (std::size_t i = 0; i < items.size(); ++i) {
            const int code = items[i].code;
            if (!evecs.count(code))
                evecs[code] = encode_description(gm.enc, ctx.description_embeddings(code), nullptr);
            c.col(static_cast<Eigen::Index>(i)).head(d_e) = evecs.at(code);
            c.col(static_cast<Eigen::Index>(i)).tail(d_f) = ctx.g.col(code);
        }
        return c;
    };

    auto draw_seen = [&]() {
        BatchDraw d;
        const std::size_t n = std::min(batch, stream.size());
        d.f_real = Mat(d_f, static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            if (cursor >= stream.size()) {
                rng.shuffle(stream);
                cursor = 0;
            }
            const auto [code, row] = stream[cursor++];
            const FeatRow& fr = positives.at(code)[static_cast<std::size_t>(row)];
            GenItem item;
            item.code = code;
            item.weight = 1.0;
            auto kit = ctx.keywords.find(code);
            if (kit != ctx.keywords.end()) {
                auto dit = kit->second.find(fr.doc_id);
                if (dit != kit->second.end()) item.keywords = &dit->second;
            }
            d.f_real.col(static_cast<Eigen::Index>(i)) = fr.f;
            d.items.push_back(item);
        }
        d.c = encode_all(d.items);
        return d;
    };

    auto draw_zero = [&]() {
        BatchDraw d;
        d.f_real = Mat(d_f, static_cast<Eigen::Index>(batch));
        // per-batch condition cache so pi weights are consistent within the batch
        std::map<int, Vec> cvecs;
        auto cvec = [&](int code) -> const Vec& {
            auto [it, fresh] = cvecs.try_emplace(code);
            if (fresh) it->second = condition_vector(gm, ctx, code);
            return it->second;
        };
        for (std::size_t i = 0; i < batch; ++i) {
            const int code = zero_codes[rng.index(zero_codes.size())];
            const int sib = ctx.sibling.at(code);
            const auto& rows = positives.at(sib);
            GenItem item;
            item.code = code;
            item.weight = cosine(cvec(code), cvec(sib));
            d.f_real.col(static_cast<Eigen::Index>(i)) = rows[rng.index(rows.size())].f;
            d.items.push_back(item);
        }
        d.c = encode_all(d.items);
        return d;
    };

    Adam opt_c(gm.cfg.lr);
    ParamSet critic_ps = gm.critic_parameters();
    for (Mat* p : critic_ps.tensors) opt_c.add(p);
    Adam opt_g(gm.cfg.lr);
    ParamSet gen_ps = gm.generator_side_parameters();
    for (Mat* p : gen_ps.tensors) opt_g.add(p);

    const auto n_critic_batches =
        std::max<std::size_t>(1, (stream.size() + batch - 1) / batch);
    const auto n_seen_iters = std::max<std::size_t>(
        1, (n_critic_batches + static_cast<std::size_t>(gm.cfg.critic_steps) - 1) /
               static_cast<std::size_t>(gm.cfg.critic_steps));
    std::size_t n_zero_iters = 0;
    if (!zero_codes.empty()) {
        const double ratio = static_cast<double>(ctx.hierarchy->zero_shot.size()) /
                             std::max<std::size_t>(1, ctx.hierarchy->seen.size());
        n_zero_iters = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                    std::llround(ratio * static_cast<double>(n_seen_iters))));
    }
    // spread zero-shot iterations evenly through the epoch
    std::vector<char> schedule(n_seen_iters + n_zero_iters, 'S');
    for (std::size_t j = 0; j < n_zero_iters; ++j) {
        const auto pos = static_cast<std::size_t>((j + 0.5) * static_cast<double>(schedule.size()) /
                                                  static_cast<double>(n_zero_iters));
        schedule[std::min(pos, schedule.size() - 1)] = 'Z';
    }

    auto fresh_z = [&](Eigen::Index cols) {
        Mat z(gm.cfg.noise_dim, cols);
        for (Eigen::Index j = 0; j < cols; ++j) z.col(j) = rng.gaussian_vector(gm.cfg.noise_dim);
        return z;
    };

    for (int epoch = 0; epoch < gm.cfg.epochs; ++epoch) {
        double epoch_closs = 0.0, epoch_gloss = 0.0;
        long n_c = 0, n_g = 0;
        for (char type : schedule) {
            for (int k = 0; k < gm.cfg.critic_steps; ++k) {
                BatchDraw d = type == 'Z' ? draw_zero() : draw_seen();
                const auto bsz = static_cast<Eigen::Index>(d.items.size());
                const Mat z = fresh_z(bsz);
                Mat in(z.rows() + d.c.rows(), bsz);
                in.topRows(z.rows()) = z;
                in.bottomRows(d.c.rows()) = d.c;
                const Mat f_fake = gm.gen.forward(in, nullptr);
                Vec alphas(bsz), weights(bsz);
                for (Eigen::Index i = 0; i < bsz; ++i) {
                    alphas(i) = rng.uniform();
                    weights(i) = d.items[static_cast<std::size_t>(i)].weight;
                }
                std::vector<Mat> grads;
                const double loss = critic_batch_loss(gm.critic, d.f_real, f_fake, d.c, alphas,
                                                      gm.cfg.lambda_gp, weights, &grads);
                if (!std::isfinite(loss)) throw NumericError("critic loss diverged");
                opt_c.step(grads);
                epoch_closs += loss;
                ++n_c;
                ++log.critic_steps;
            }
            BatchDraw d = type == 'Z' ? draw_zero() : draw_seen();
            const Mat z = fresh_z(static_cast<Eigen::Index>(d.items.size()));
            std::vector<Mat> grads;
            const double loss = generator_batch_loss(gm, ctx, d.items, z, &grads);
            if (!std::isfinite(loss)) throw NumericError("generator loss diverged");
            opt_g.step(grads);
            epoch_gloss += loss;
            ++n_g;
            ++log.generator_steps;
        }
        log.epoch_critic_loss.push_back(epoch_closs / static_cast<double>(std::max(1L, n_c)));
        log.epoch_generator_loss.push_back(epoch_gloss / static_cast<double>(std::max(1L, n_g)));
    }
    return log;
}

}  // namespace gzsl
