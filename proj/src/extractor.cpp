#include "gzsl/extractor.hpp"

#include <algorithm>
#include <cmath>

namespace gzsl {

ParamSet ExtractorModel::parameters() {
    ParamSet ps;
    ps.add("emb", &emb);
    ps.add("conv.w", &conv.w);
    ps.add("conv.b", &conv.b);
    ps.add("attn_w", &attn_w);
    ps.add("attn_b", &attn_b);
    ps.add("out_w", &out_w);
    ps.add("out_b", &out_b);
    if (has_proj()) {
        ps.add("proj_w", &proj_w);
        ps.add("proj_b", &proj_b);
    }
    ps.append(gru.parameters(), "gru.");
    return ps;
}

ExtractorModel init_extractor(const ExtractorConfig& cfg, Eigen::Index vocab_size, Rng& rng) {
    ExtractorModel m;
    m.cfg = cfg;
    m.emb = rng.gaussian_matrix(vocab_size, cfg.emb_dim, 0.1);
    m.emb.row(0).setZero();  // padding
    m.conv.init(cfg.conv_width, cfg.emb_dim, cfg.conv_filters, rng);
    m.attn_w = glorot(cfg.emb_dim, cfg.conv_filters, rng);
    m.attn_b = Mat::Zero(cfg.emb_dim, 1);
    m.out_w = glorot(cfg.feat_dim, cfg.conv_filters, rng);
    m.out_b = Mat::Zero(cfg.feat_dim, 1);
    if (m.has_proj()) {
        m.proj_w = glorot(cfg.feat_dim, cfg.emb_dim, rng);
        m.proj_b = Mat::Zero(cfg.feat_dim, 1);
    }
    m.gru.init(cfg.feat_dim, rng);
    return m;
}

ExtractorModel init_extractor(const ExtractorConfig& cfg, const Mat& embeddings, Rng& rng) {
    ExtractorModel m = init_extractor(cfg, embeddings.rows(), rng);
    if (embeddings.cols() != cfg.emb_dim) throw ConfigError("extractor: embedding dim mismatch");
    m.emb = embeddings;
    m.emb.row(0).setZero();
    return m;
}

Eigen::SparseMatrix<double> neighbor_matrix(const LabelHierarchy& h) {
    const auto L = static_cast<Eigen::Index>(h.size());
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index l = 0; l < L; ++l) {
        const auto nb = h.neighbors(static_cast<int>(l));
        if (nb.empty()) {
            trip.emplace_back(l, l, 1.0);  // isolated: h = g_prev
        } else {
            const double w = 1.0 / static_cast<double>(nb.size());
            for (int j : nb) trip.emplace_back(j, l, w);
        }
    }
    Eigen::SparseMatrix<double> nmat(L, L);
    nmat.setFromTriplets(trip.begin(), trip.end());
    return nmat;
}

LabelState compute_label_state(const ExtractorModel& m, const LabelHierarchy& h,
                               const Eigen::SparseMatrix<double>& nmat) {
    const auto L = static_cast<Eigen::Index>(h.size());
    LabelState ls;
    ls.v = Mat::Zero(m.cfg.emb_dim, L);
    for (Eigen::Index l = 0; l < L; ++l) {
        const auto& toks = h.node(static_cast<int>(l)).description_tokens;
        if (toks.empty()) throw FormatError("label '" + h.node(static_cast<int>(l)).code + "' has no description tokens");
        ls.v.col(l) = label_embedding(toks, m.emb);
    }
    ls.g0 = m.has_proj() ? Mat((m.proj_w * ls.v).colwise() + m.proj_b.col(0)) : ls.v;
    Mat g = ls.g0;
    for (int s = 0; s < m.cfg.prop_depth; ++s) {
        Mat h_in = g * nmat;
        GruCache cache;
        Mat g_new = gru_forward(m.gru, h_in, g, &cache);
        ls.h_in.push_back(std::move(h_in));
        ls.caches.push_back(std::move(cache));
        g = std::move(g_new);
    }
    ls.g = std::move(g);
    return ls;
}

DocForward extractor_forward(const ExtractorModel& m, const LabelState& ls,
                             const std::vector<int>& tokens, Rng* dropout_rng) {
    if (tokens.empty()) throw FormatError("extractor_forward: empty document");
    const auto n = static_cast<Eigen::Index>(tokens.size());
    DocForward fw;
    fw.x = Mat(n, m.cfg.emb_dim);
    for (Eigen::Index i = 0; i < n; ++i) fw.x.row(i) = m.emb.row(tokens[static_cast<std::size_t>(i)]);
    if (dropout_rng && m.cfg.dropout > 0) {
        fw.mask = dropout_mask(n, m.cfg.emb_dim, m.cfg.dropout, *dropout_rng);
        fw.x = fw.x.cwiseProduct(fw.mask);
    }
    fw.h = conv1d_forward(m.conv, fw.x, &fw.conv);
    fw.apre = ((fw.h * m.attn_w.transpose()).rowwise() + m.attn_b.col(0).transpose()).array().tanh();
    Mat att_logits = fw.apre * ls.v;  // n x L
    fw.s = Mat(att_logits.rows(), att_logits.cols());
    for (Eigen::Index l = 0; l < att_logits.cols(); ++l) {
        Vec col = att_logits.col(l);
        softmax_inplace(col);
        fw.s.col(l) = col;
    }
    fw.a = fw.h.transpose() * fw.s;  // d_c x L
    fw.f = ((m.out_w * fw.a).colwise() + m.out_b.col(0)).cwiseMax(0.0);
    fw.logits = (ls.g.cwiseProduct(fw.f)).colwise().sum().transpose();
    return fw;
}

std::pair<Vec, Vec> attend_labelwise(const Mat& h, const Vec& v_l, const Mat& w_a, const Vec& b_a) {
    const Mat apre = ((h * w_a.transpose()).rowwise() + b_a.transpose()).array().tanh();
    Vec s = apre * v_l;
    softmax_inplace(s);
    Vec a = h.transpose() * s;
    return {s, a};
}

Vec extract_features(const Vec& a_l, const Mat& w_o, const Vec& b_o) {
    return (w_o * a_l + b_o).cwiseMax(0.0);
}

double bce_loss(const Vec& y, const Vec& y_hat) {
    constexpr double eps = 1e-12;
    if (y.size() != y_hat.size()) throw ConfigError("bce_loss: size mismatch");
    double loss = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double p = std::clamp(y_hat(i), eps, 1.0 - eps);
        loss -= y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p);
    }
    return loss;
}

Vec ldam_probabilities(const Vec& logits, const std::vector<int>& y, const std::vector<long>& counts,
                       double c) {
    if (static_cast<std::size_t>(logits.size()) != y.size() || y.size() != counts.size())
        throw ConfigError("ldam_probabilities: size mismatch");
    Vec out(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        double margin = 0.0;
        if (y[static_cast<std::size_t>(i)] == 1) {
            const long n = counts[static_cast<std::size_t>(i)];
            if (n < 1) throw NumericError("ldam: positive label with zero training count");
            margin = c / std::pow(static_cast<double>(n), 0.25);
        }
        out(i) = sigmoid(logits(i) - margin);
    }
    return out;
}

namespace {

// stable BCE from the (already margin-adjusted) logit
inline double bce_from_logit(double logit, double y) {
    return y > 0.5 ? log1pexp(-logit) : log1pexp(logit);
}

struct ExtractorGrads {
    Mat emb, conv_w, conv_b, attn_w, attn_b, out_w, out_b, proj_w, proj_b;
    GruGrads gru;
    explicit ExtractorGrads(const ExtractorModel& m)
        : emb(Mat::Zero(m.emb.rows(), m.emb.cols())),
          conv_w(Mat::Zero(m.conv.w.rows(), m.conv.w.cols())),
          conv_b(Mat::Zero(m.conv.b.rows(), 1)),
          attn_w(Mat::Zero(m.attn_w.rows(), m.attn_w.cols())),
          attn_b(Mat::Zero(m.attn_b.rows(), 1)),
          out_w(Mat::Zero(m.out_w.rows(), m.out_w.cols())),
          out_b(Mat::Zero(m.out_b.rows(), 1)),
          proj_w(m.has_proj() ? Mat(Mat::Zero(m.proj_w.rows(), m.proj_w.cols())) : Mat()),
          proj_b(m.has_proj() ? Mat(Mat::Zero(m.proj_b.rows(), 1)) : Mat()),
          gru(m.gru) {}

    std::vector<Mat> pack(const ExtractorModel& m) {
        std::vector<Mat> out{emb, conv_w, conv_b, attn_w, attn_b, out_w, out_b};
        if (m.has_proj()) {
            out.push_back(proj_w);
            out.push_back(proj_b);
        }
        for (Mat* g : gru.list()) out.push_back(*g);
        return out;
    }
};

}  // namespace

double extractor_batch_loss(const ExtractorModel& m, const LabelHierarchy& h,
                            const Eigen::SparseMatrix<double>& nmat,
                            const std::vector<const Document*>& batch,
                            const std::vector<Mat>& dropout_masks, std::vector<Mat>* grads) {
    if (batch.empty()) throw ConfigError("extractor_batch_loss: empty batch");
    const auto L = static_cast<Eigen::Index>(h.size());
    const LabelState ls = compute_label_state(m, h, nmat);

    Vec margins = Vec::Zero(L);
    if (m.cfg.use_ldam)
        for (Eigen::Index l = 0; l < L; ++l) {
            const long n = h.node(static_cast<int>(l)).train_count;
            if (n >= 1) margins(l) = m.cfg.ldam_c / std::pow(static_cast<double>(n), 0.25);
        }

    ExtractorGrads eg(m);
    Mat d_g = Mat::Zero(m.cfg.feat_dim, L);
    Mat d_v = Mat::Zero(m.cfg.emb_dim, L);
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const Document& doc = *batch[bi];
        DocForward fw;
        {
            // fixed masks so finite differencing sees the same network
            if (doc.tokens.empty()) throw FormatError("empty document " + doc.id);
            const auto n = static_cast<Eigen::Index>(doc.tokens.size());
            fw.x = Mat(n, m.cfg.emb_dim);
            for (Eigen::Index i = 0; i < n; ++i) fw.x.row(i) = m.emb.row(doc.tokens[static_cast<std::size_t>(i)]);
            if (!dropout_masks.empty()) {
                fw.mask = dropout_masks[bi];
                fw.x = fw.x.cwiseProduct(fw.mask);
            }
            fw.h = conv1d_forward(m.conv, fw.x, &fw.conv);
            fw.apre = ((fw.h * m.attn_w.transpose()).rowwise() + m.attn_b.col(0).transpose()).array().tanh();
            Mat att_logits = fw.apre * ls.v;
            fw.s = Mat(att_logits.rows(), att_logits.cols());
            for (Eigen::Index l = 0; l < L; ++l) {
                Vec col = att_logits.col(l);
                softmax_inplace(col);
                fw.s.col(l) = col;
            }
            fw.a = fw.h.transpose() * fw.s;
            fw.f = ((m.out_w * fw.a).colwise() + m.out_b.col(0)).cwiseMax(0.0);
            fw.logits = (ls.g.cwiseProduct(fw.f)).colwise().sum().transpose();
        }

        Vec y = Vec::Zero(L);
        for (const auto& code : doc.labels) {
            const int l = h.id(code);
            if (m.cfg.use_ldam && h.node(l).train_count < 1)
                throw NumericError("ldam: positive label '" + code + "' with zero training count");
            y(l) = 1.0;
        }

        Vec adj = fw.logits - margins.cwiseProduct(y);
        for (Eigen::Index l = 0; l < L; ++l) total += bce_from_logit(adj(l), y(l));

        if (!grads) continue;

        Vec dlogit(L);
        for (Eigen::Index l = 0; l < L; ++l) dlogit(l) = sigmoid(adj(l)) - y(l);

        d_g += fw.f * dlogit.asDiagonal();
        Mat d_f = ls.g * dlogit.asDiagonal();
        Mat d_pre_f = (fw.f.array() > 0.0).cast<double>() * d_f.array();
        eg.out_w += d_pre_f * fw.a.transpose();
        eg.out_b.col(0) += d_pre_f.rowwise().sum();
        Mat d_a = m.out_w.transpose() * d_pre_f;  // d_c x L
        Mat d_h = fw.s * d_a.transpose();         // n x d_c
        Mat d_s = fw.h * d_a;                     // n x L
        Mat d_att_logits(d_s.rows(), d_s.cols());
        for (Eigen::Index l = 0; l < L; ++l) {
            const double dot = fw.s.col(l).dot(d_s.col(l));
            d_att_logits.col(l) = fw.s.col(l).cwiseProduct(d_s.col(l)) - dot * fw.s.col(l);
        }
        d_v += fw.apre.transpose() * d_att_logits;
        Mat d_apre = d_att_logits * ls.v.transpose();  // n x d
        Mat d_pre_a = d_apre.array() * (1.0 - fw.apre.array().square());
        eg.attn_w += d_pre_a.transpose() * fw.h;
        eg.attn_b.col(0) += d_pre_a.colwise().sum().transpose();
        d_h += d_pre_a * m.attn_w;
        Mat d_x = conv1d_backward(m.conv, fw.conv, d_h, eg.conv_w, eg.conv_b);
        if (!dropout_masks.empty()) d_x = d_x.cwiseProduct(fw.mask);
        for (Eigen::Index i = 0; i < d_x.rows(); ++i)
            eg.emb.row(doc.tokens[static_cast<std::size_t>(i)]) += d_x.row(i);
    }

    total *= inv_b;
    if (!std::isfinite(total)) throw NumericError("extractor loss diverged (non-finite)");
    if (!grads) return total;

    // label side: graph propagation, projection, description means
    Mat dg = d_g;
    for (int s = m.cfg.prop_depth - 1; s >= 0; --s) {
        Mat dh = Mat::Zero(dg.rows(), dg.cols());
        Mat dg_prev = Mat::Zero(dg.rows(), dg.cols());
        gru_backward(m.gru, ls.caches[static_cast<std::size_t>(s)], dg, dh, dg_prev, eg.gru);
        dg_prev += dh * Eigen::SparseMatrix<double>(nmat.transpose());
        dg = std::move(dg_prev);
    }
    if (m.has_proj()) {
        eg.proj_w += dg * ls.v.transpose();
        eg.proj_b.col(0) += dg.rowwise().sum();
        d_v += m.proj_w.transpose() * dg;
    } else {
        d_v += dg;
    }
    for (Eigen::Index l = 0; l < L; ++l) {
        const auto& toks = h.node(static_cast<int>(l)).description_tokens;
        const double inv_m = 1.0 / static_cast<double>(toks.size());
        for (int t : toks) eg.emb.row(t) += d_v.col(l).transpose() * inv_m;
    }

    *grads = eg.pack(m);
    for (Mat& g : *grads) g *= inv_b;
    return total;
}

ExtractorTrainLog train_extractor(ExtractorModel& m, const LabelHierarchy& h,
                                  const std::vector<Document>& train_docs, std::uint64_t seed) {
    ExtractorTrainLog log;
    if (m.cfg.epochs <= 0) return log;
    if (train_docs.empty()) throw ConfigError("train_extractor: empty training set");

    const auto nmat = neighbor_matrix(h);
    Rng rng(seed);
    Adam opt(m.cfg.lr);
    ParamSet params = m.parameters();
    for (Mat* p : params.tensors) opt.add(p);

    std::vector<std::size_t> order(train_docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < m.cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(m.cfg.batch)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(m.cfg.batch));
            std::vector<const Document*> batch;
            std::vector<Mat> masks;
            for (std::size_t k = start; k < end; ++k) {
                const Document& d = train_docs[order[k]];
                batch.push_back(&d);
                masks.push_back(dropout_mask(static_cast<Eigen::Index>(d.tokens.size()), m.cfg.emb_dim,
                                             m.cfg.dropout, rng));
            }
            std::vector<Mat> grads;
            const double loss = extractor_batch_loss(m, h, nmat, batch, masks, &grads);
            opt.step(grads);
            m.emb.row(0).setZero();  // padding row is not a parameter
            epoch_loss += loss * static_cast<double>(batch.size());
        }
        log.epoch_losses.push_back(epoch_loss / static_cast<double>(train_docs.size()));
    }
    return log;
}

}  // namespace gzsl
