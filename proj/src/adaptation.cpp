#include "gzsl/adaptation.hpp"

#include <algorithm>
#include <cmath>

namespace gzsl {

FinetuneResult finetune_classifier(const Vec& g0, const Mat& positives, const Mat& negatives,
                                   const AdaptConfig& cfg, std::uint64_t seed) {
    if (positives.cols() == 0) throw ConfigError("finetune: no positive features");
    if (negatives.cols() == 0) throw ConfigError("finetune: empty negative pool");
    if (positives.rows() != g0.size() || negatives.rows() != g0.size())
        throw ConfigError("finetune: feature dimension mismatch");

    FinetuneResult res;
    res.g = g0;
    if (cfg.epochs <= 0) return res;

    struct Ex {
        const Mat* src;
        Eigen::Index col;
        double y;
    };
    std::vector<Ex> pool;
    for (Eigen::Index i = 0; i < positives.cols(); ++i) pool.push_back({&positives, i, 1.0});
    for (Eigen::Index i = 0; i < negatives.cols(); ++i) pool.push_back({&negatives, i, 0.0});

    Rng rng(seed);
    rng.shuffle(pool);
    const std::size_t n_val = std::max<std::size_t>(1, pool.size() / 10);
    std::vector<Ex> val(pool.end() - static_cast<std::ptrdiff_t>(n_val), pool.end());
    pool.resize(pool.size() - n_val);
    if (pool.empty()) throw ConfigError("finetune: pool too small for a held-out slice");

    auto example_loss = [&](const Mat& g, const Ex& ex) {
        const double logit = g.col(0).dot(ex.src->col(ex.col));
        return ex.y > 0.5 ? cfg.pos_weight * log1pexp(-logit) : log1pexp(logit);
    };
    auto val_loss = [&](const Mat& g) {
        double s = 0.0;
        for (const auto& ex : val) s += example_loss(g, ex);
        return s / static_cast<double>(val.size());
    };

    Mat g = g0;
    Adam opt(cfg.lr);
    opt.add(&g);

    Mat best_g = g;
    double best = val_loss(g);
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(pool);
        for (std::size_t start = 0; start < pool.size(); start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t end = std::min(pool.size(), start + static_cast<std::size_t>(cfg.batch));
            Mat grad = Mat::Zero(g.rows(), 1);
            for (std::size_t k = start; k < end; ++k) {
                const Ex& ex = pool[k];
                const double logit = g.col(0).dot(ex.src->col(ex.col));
                const double w = ex.y > 0.5 ? cfg.pos_weight : 1.0;
                grad.col(0) += w * (sigmoid(logit) - ex.y) * ex.src->col(ex.col);
            }
            grad /= static_cast<double>(end - start);
            opt.step({grad});
        }
        ++res.epochs_ran;
        const double v = val_loss(g);
        if (v < best) {
            best = v;
            best_g = g;
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    res.g = best_g.col(0);
    res.best_val_loss = best;
    return res;
}

std::map<int, Vec> build_centroids(const std::map<int, std::vector<FeatRow>>& positives) {
    if (positives.empty()) throw ConfigError("build_centroids: empty feature dump");
    std::map<int, Vec> out;
    for (const auto& [code, rows] : positives) {
        if (rows.empty()) continue;
        Vec c = Vec::Zero(rows.front().f.size());
        for (const auto& r : rows) c += r.f;
        out[code] = c / static_cast<double>(rows.size());
    }
    return out;
}

// ---- meta-embedding ------------------------------------------------------------------

ParamSet MetaHead::parameters() {
    ParamSet ps;
    ps.add("o_w1", &o_w1);
    ps.add("o_b1", &o_b1);
    ps.add("o_w2", &o_w2);
    ps.add("o_b2", &o_b2);
    ps.add("e_w1", &e_w1);
    ps.add("e_b1", &e_b1);
    ps.add("e_w2", &e_w2);
    ps.add("e_b2", &e_b2);
    return ps;
}

MetaHead init_meta_head(const std::map<int, Vec>& centroids, int feat_dim, int hidden, Rng& rng) {
    if (centroids.empty()) throw ConfigError("init_meta_head: empty centroid bank");
    MetaHead h;
    h.centroids = Mat(static_cast<Eigen::Index>(centroids.size()), feat_dim);
    Eigen::Index row = 0;
    for (const auto& [code, c] : centroids) {
        h.centroid_codes.push_back(code);
        h.centroids.row(row++) = c.transpose();
    }
    h.o_w1 = glorot(hidden, feat_dim, rng);
    h.o_b1 = Mat::Zero(hidden, 1);
    h.o_w2 = glorot(h.centroids.rows(), hidden, rng);
    h.o_b2 = Mat::Zero(h.centroids.rows(), 1);
    h.e_w1 = glorot(hidden, feat_dim, rng);
    h.e_b1 = Mat::Zero(hidden, 1);
    h.e_w2 = glorot(feat_dim, hidden, rng);
    h.e_b2 = Mat::Zero(feat_dim, 1);
    return h;
}

Vec meta_attention(const MetaHead& h, const Vec& f) {
    const Vec hid = (h.o_w1 * f + h.o_b1.col(0)).cwiseMax(0.0);
    Vec o = h.o_w2 * hid + h.o_b2.col(0);
    softmax_inplace(o);
    return o;
}

Vec meta_coefficient(const MetaHead& h, const Vec& f) {
    const Vec hid = (h.e_w1 * f + h.e_b1.col(0)).cwiseMax(0.0);
    return (h.e_w2 * hid + h.e_b2.col(0)).array().tanh();
}

Vec meta_combine(const Vec& f, const Mat& centroids, const Vec& o_vec, const Vec& e_vec) {
    return f + e_vec.cwiseProduct(centroids.transpose() * o_vec);
}

Vec meta_embed(const MetaHead& h, const Vec& f) {
    return meta_combine(f, h.centroids, meta_attention(h, f), meta_coefficient(h, f));
}

double meta_batch_loss(const MetaHead& head, const std::vector<const Mat*>& feats,
                       const std::vector<const Vec*>& labels, const Mat& g, std::vector<Mat>* grads) {
    if (feats.empty()) throw ConfigError("meta_batch_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(feats.size());
    const Eigen::Index n_cent = head.centroids.rows();

    Mat d_ow1 = Mat::Zero(head.o_w1.rows(), head.o_w1.cols());
    Mat d_ob1 = Mat::Zero(head.o_b1.rows(), 1);
    Mat d_ow2 = Mat::Zero(head.o_w2.rows(), head.o_w2.cols());
    Mat d_ob2 = Mat::Zero(head.o_b2.rows(), 1);
    Mat d_ew1 = Mat::Zero(head.e_w1.rows(), head.e_w1.cols());
    Mat d_eb1 = Mat::Zero(head.e_b1.rows(), 1);
    Mat d_ew2 = Mat::Zero(head.e_w2.rows(), head.e_w2.cols());
    Mat d_eb2 = Mat::Zero(head.e_b2.rows(), 1);

    double total = 0.0;
    for (std::size_t bi = 0; bi < feats.size(); ++bi) {
        const Mat& f = *feats[bi];  // d_f x L
        const Vec& y = *labels[bi];
        const Eigen::Index l_count = f.cols();

        const Mat ho = ((head.o_w1 * f).colwise() + head.o_b1.col(0)).cwiseMax(0.0);
        Mat o_logits = (head.o_w2 * ho).colwise() + head.o_b2.col(0);
        Mat o(n_cent, l_count);
        for (Eigen::Index l = 0; l < l_count; ++l) {
            Vec col = o_logits.col(l);
            softmax_inplace(col);
            o.col(l) = col;
        }
        const Mat he = ((head.e_w1 * f).colwise() + head.e_b1.col(0)).cwiseMax(0.0);
        const Mat e = (((head.e_w2 * he).colwise() + head.e_b2.col(0)).array().tanh()).matrix();
        const Mat mix = head.centroids.transpose() * o;  // d_f x L
        const Mat fm = f + e.cwiseProduct(mix);
        const Vec logits = (g.cwiseProduct(fm)).colwise().sum().transpose();

        for (Eigen::Index l = 0; l < l_count; ++l)
            total += y(l) > 0.5 ? log1pexp(-logits(l)) : log1pexp(logits(l));

        if (!grads) continue;

        Vec dlogit(l_count);
        for (Eigen::Index l = 0; l < l_count; ++l) dlogit(l) = sigmoid(logits(l)) - y(l);
        const Mat dfm = g * dlogit.asDiagonal();
        const Mat de = dfm.cwiseProduct(mix);
        const Mat dmix = dfm.cwiseProduct(e);
        const Mat do_ = head.centroids * dmix;  // |M| x L

        Mat d_olog(n_cent, l_count);
        for (Eigen::Index l = 0; l < l_count; ++l) {
            const double dot = o.col(l).dot(do_.col(l));
            d_olog.col(l) = o.col(l).cwiseProduct(do_.col(l)) - dot * o.col(l);
        }
        d_ow2 += d_olog * ho.transpose();
        d_ob2.col(0) += d_olog.rowwise().sum();
        const Mat dho = head.o_w2.transpose() * d_olog;
        const Mat dho_pre = (ho.array() > 0.0).cast<double>() * dho.array();
        d_ow1 += dho_pre * f.transpose();
        d_ob1.col(0) += dho_pre.rowwise().sum();

        const Mat de_pre = de.array() * (1.0 - e.array().square());
        d_ew2 += de_pre * he.transpose();
        d_eb2.col(0) += de_pre.rowwise().sum();
        const Mat dhe = head.e_w2.transpose() * de_pre;
        const Mat dhe_pre = (he.array() > 0.0).cast<double>() * dhe.array();
        d_ew1 += dhe_pre * f.transpose();
        d_eb1.col(0) += dhe_pre.rowwise().sum();
    }

    total *= inv_b;
    if (grads) {
        *grads = {d_ow1, d_ob1, d_ow2, d_ob2, d_ew1, d_eb1, d_ew2, d_eb2};
        for (Mat& m : *grads) m *= inv_b;
    }
    return total;
}

MetaTrainLog train_meta_head(MetaHead& head, const std::vector<Mat>& doc_features,
                             const std::vector<Vec>& labels, const Mat& g, const MetaConfig& cfg,
                             std::uint64_t seed) {
    if (doc_features.size() != labels.size()) throw ConfigError("train_meta_head: size mismatch");
    MetaTrainLog log;
    if (cfg.epochs <= 0 || doc_features.empty()) return log;

    Rng rng(seed);
    Adam opt(cfg.lr);
    ParamSet ps = head.parameters();
    for (Mat* p : ps.tensors) opt.add(p);

    std::vector<std::size_t> order(doc_features.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            std::vector<const Mat*> feats;
            std::vector<const Vec*> ys;
            for (std::size_t k = start; k < end; ++k) {
                feats.push_back(&doc_features[order[k]]);
                ys.push_back(&labels[order[k]]);
            }
            std::vector<Mat> grads;
            const double loss = meta_batch_loss(head, feats, ys, g, &grads);
            if (!std::isfinite(loss)) throw NumericError("meta head loss diverged");
            opt.step(grads);
            epoch_loss += loss * static_cast<double>(feats.size());
        }
        log.epoch_losses.push_back(epoch_loss / static_cast<double>(doc_features.size()));
    }
    return log;
}

}  // namespace gzsl
