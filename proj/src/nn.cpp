#include "gzsl/nn.hpp"

namespace gzsl {

Mat glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double s = std::sqrt(2.0 / static_cast<double>(rows + cols));
    return rng.gaussian_matrix(rows, cols, s);
}

// ---- conv1d -----------------------------------------------------------------

void Conv1d::init(int width_, int in_dim_, int out_dim_, Rng& rng) {
    width = width_;
    in_dim = in_dim_;
    out_dim = out_dim_;
    w = glorot(static_cast<Eigen::Index>(width) * in_dim, out_dim, rng);
    b = Mat::Zero(out_dim, 1);
}

ParamSet Conv1d::parameters() {
    ParamSet ps;
    ps.add("w", &w);
    ps.add("b", &b);
    return ps;
}

Mat conv1d_forward(const Conv1d& c, const Mat& x, Conv1dCache* cache) {
    const Eigen::Index n = x.rows();
    const int pad = (c.width - 1) / 2;
    Mat xw = Mat::Zero(n, static_cast<Eigen::Index>(c.width) * c.in_dim);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int k = 0; k < c.width; ++k) {
            const Eigen::Index src = i + k - pad;
            if (src >= 0 && src < n) xw.block(i, static_cast<Eigen::Index>(k) * c.in_dim, 1, c.in_dim) = x.row(src);
        }
    Mat h = (xw * c.w).rowwise() + c.b.col(0).transpose();
    h = h.array().tanh();
    if (cache) {
        cache->xw = std::move(xw);
        cache->h = h;
    }
    return h;
}

Mat conv1d_backward(const Conv1d& c, const Conv1dCache& cache, const Mat& dh, Mat& dw, Mat& db) {
    const Mat dpre = dh.array() * (1.0 - cache.h.array().square());
    dw += cache.xw.transpose() * dpre;
    db.col(0) += dpre.colwise().sum().transpose();
    const Mat dxw = dpre * c.w.transpose();
    const Eigen::Index n = dh.rows();
    const int pad = (c.width - 1) / 2;
    Mat dx = Mat::Zero(n, c.in_dim);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int k = 0; k < c.width; ++k) {
            const Eigen::Index src = i + k - pad;
            if (src >= 0 && src < n)
                dx.row(src) += dxw.block(i, static_cast<Eigen::Index>(k) * c.in_dim, 1, c.in_dim);
        }
    return dx;
}

// ---- gru -----------------------------------------------------------------------

void GruParams::init(int dim, Rng& rng) {
    wz = glorot(dim, dim, rng);
    uz = glorot(dim, dim, rng);
    wr = glorot(dim, dim, rng);
    ur = glorot(dim, dim, rng);
    wh = glorot(dim, dim, rng);
    uh = glorot(dim, dim, rng);
    bz = Mat::Zero(dim, 1);
    br = Mat::Zero(dim, 1);
    bh = Mat::Zero(dim, 1);
}

ParamSet GruParams::parameters() {
    ParamSet ps;
    ps.add("wz", &wz);
    ps.add("uz", &uz);
    ps.add("wr", &wr);
    ps.add("ur", &ur);
    ps.add("wh", &wh);
    ps.add("uh", &uh);
    ps.add("bz", &bz);
    ps.add("br", &br);
    ps.add("bh", &bh);
    return ps;
}

GruGrads::GruGrads(const GruParams& p)
    : wz(Mat::Zero(p.wz.rows(), p.wz.cols())),
      uz(Mat::Zero(p.uz.rows(), p.uz.cols())),
      wr(Mat::Zero(p.wr.rows(), p.wr.cols())),
      ur(Mat::Zero(p.ur.rows(), p.ur.cols())),
      wh(Mat::Zero(p.wh.rows(), p.wh.cols())),
      uh(Mat::Zero(p.uh.rows(), p.uh.cols())),
      bz(Mat::Zero(p.bz.rows(), 1)),
      br(Mat::Zero(p.br.rows(), 1)),
      bh(Mat::Zero(p.bh.rows(), 1)) {}

std::vector<Mat*> GruGrads::list() { return {&wz, &uz, &wr, &ur, &wh, &uh, &bz, &br, &bh}; }

Mat gru_forward(const GruParams& p, const Mat& h, const Mat& g_prev, GruCache* cache) {
    Mat z = ((p.wz * h + p.uz * g_prev).colwise() + p.bz.col(0)).unaryExpr([](double v) { return sigmoid(v); });
    Mat r = ((p.wr * h + p.ur * g_prev).colwise() + p.br.col(0)).unaryExpr([](double v) { return sigmoid(v); });
    Mat cand = ((p.wh * h + p.uh * (r.cwiseProduct(g_prev))).colwise() + p.bh.col(0)).array().tanh();
    Mat g_new = (1.0 - z.array()) * g_prev.array() + z.array() * cand.array();
    if (cache) {
        cache->h = h;
        cache->g_prev = g_prev;
        cache->z = z;
        cache->r = r;
        cache->cand = cand;
    }
    return g_new;
}

void gru_backward(const GruParams& p, const GruCache& c, const Mat& dg_new, Mat& dh, Mat& dg_prev,
                  GruGrads& grads) {
    const Mat dz = dg_new.cwiseProduct(c.cand - c.g_prev);
    const Mat dcand = dg_new.cwiseProduct(c.z);
    dg_prev += dg_new.cwiseProduct(Mat::Ones(c.z.rows(), c.z.cols()) - c.z);

    const Mat dpre_h = dcand.array() * (1.0 - c.cand.array().square());
    grads.wh += dpre_h * c.h.transpose();
    grads.uh += dpre_h * (c.r.cwiseProduct(c.g_prev)).transpose();
    grads.bh.col(0) += dpre_h.rowwise().sum();
    const Mat drg = p.uh.transpose() * dpre_h;
    const Mat dr = drg.cwiseProduct(c.g_prev);
    dg_prev += drg.cwiseProduct(c.r);
    dh += p.wh.transpose() * dpre_h;

    const Mat dpre_r = dr.array() * c.r.array() * (1.0 - c.r.array());
    grads.wr += dpre_r * c.h.transpose();
    grads.ur += dpre_r * c.g_prev.transpose();
    grads.br.col(0) += dpre_r.rowwise().sum();
    dh += p.wr.transpose() * dpre_r;
    dg_prev += p.ur.transpose() * dpre_r;

    const Mat dpre_z = dz.array() * c.z.array() * (1.0 - c.z.array());
    grads.wz += dpre_z * c.h.transpose();
    grads.uz += dpre_z * c.g_prev.transpose();
    grads.bz.col(0) += dpre_z.rowwise().sum();
    dh += p.wz.transpose() * dpre_z;
    dg_prev += p.uz.transpose() * dpre_z;
}

// ---- lstm -----------------------------------------------------------------------

void LstmParams::init(int in_dim_, int hidden_, Rng& rng) {
    in_dim = in_dim_;
    hidden = hidden_;
    wi = glorot(hidden, in_dim, rng);
    ui = glorot(hidden, hidden, rng);
    wf = glorot(hidden, in_dim, rng);
    uf = glorot(hidden, hidden, rng);
    wo = glorot(hidden, in_dim, rng);
    uo = glorot(hidden, hidden, rng);
    wc = glorot(hidden, in_dim, rng);
    uc = glorot(hidden, hidden, rng);
    bi = Mat::Zero(hidden, 1);
    bf = Mat::Ones(hidden, 1);  // forget-gate bias 1
    bo = Mat::Zero(hidden, 1);
    bc = Mat::Zero(hidden, 1);
}

ParamSet LstmParams::parameters() {
    ParamSet ps;
    ps.add("wi", &wi);
    ps.add("ui", &ui);
    ps.add("wf", &wf);
    ps.add("uf", &uf);
    ps.add("wo", &wo);
    ps.add("uo", &uo);
    ps.add("wc", &wc);
    ps.add("uc", &uc);
    ps.add("bi", &bi);
    ps.add("bf", &bf);
    ps.add("bo", &bo);
    ps.add("bc", &bc);
    return ps;
}

LstmGrads::LstmGrads(const LstmParams& p)
    : wi(Mat::Zero(p.wi.rows(), p.wi.cols())),
      ui(Mat::Zero(p.ui.rows(), p.ui.cols())),
      wf(Mat::Zero(p.wf.rows(), p.wf.cols())),
      uf(Mat::Zero(p.uf.rows(), p.uf.cols())),
      wo(Mat::Zero(p.wo.rows(), p.wo.cols())),
      uo(Mat::Zero(p.uo.rows(), p.uo.cols())),
      wc(Mat::Zero(p.wc.rows(), p.wc.cols())),
      uc(Mat::Zero(p.uc.rows(), p.uc.cols())),
      bi(Mat::Zero(p.bi.rows(), 1)),
      bf(Mat::Zero(p.bf.rows(), 1)),
      bo(Mat::Zero(p.bo.rows(), 1)),
      bc(Mat::Zero(p.bc.rows(), 1)) {}

std::vector<Mat*> LstmGrads::list() {
    return {&wi, &ui, &wf, &uf, &wo, &uo, &wc, &uc, &bi, &bf, &bo, &bc};
}

Mat lstm_forward(const LstmParams& p, const Mat& x, LstmCache* cache) {
    const Eigen::Index m = x.rows();
    Mat gi(m, p.hidden), gf(m, p.hidden), go(m, p.hidden), gc(m, p.hidden), cc(m, p.hidden), hh(m, p.hidden);
    Vec h_prev = Vec::Zero(p.hidden), c_prev = Vec::Zero(p.hidden);
    for (Eigen::Index t = 0; t < m; ++t) {
        const Vec xt = x.row(t).transpose();
        const Vec i = (p.wi * xt + p.ui * h_prev + p.bi.col(0)).unaryExpr([](double v) { return sigmoid(v); });
        const Vec f = (p.wf * xt + p.uf * h_prev + p.bf.col(0)).unaryExpr([](double v) { return sigmoid(v); });
        const Vec o = (p.wo * xt + p.uo * h_prev + p.bo.col(0)).unaryExpr([](double v) { return sigmoid(v); });
        const Vec chat = (p.wc * xt + p.uc * h_prev + p.bc.col(0)).array().tanh();
        const Vec c = f.cwiseProduct(c_prev) + i.cwiseProduct(chat);
        const Vec h = o.cwiseProduct(c.array().tanh().matrix());
        gi.row(t) = i.transpose();
        gf.row(t) = f.transpose();
        go.row(t) = o.transpose();
        gc.row(t) = chat.transpose();
        cc.row(t) = c.transpose();
        hh.row(t) = h.transpose();
        h_prev = h;
        c_prev = c;
    }
    if (cache) {
        cache->x = x;
        cache->i = gi;
        cache->f = gf;
        cache->o = go;
        cache->chat = gc;
        cache->c = cc;
        cache->h = hh;
    }
    return hh;
}

Mat lstm_backward(const LstmParams& p, const LstmCache& c, const Mat& dh_up, LstmGrads& grads) {
    const Eigen::Index m = c.x.rows();
    Mat dx = Mat::Zero(m, p.in_dim);
    Vec dh_next = Vec::Zero(p.hidden), dc_next = Vec::Zero(p.hidden);
    for (Eigen::Index t = m - 1; t >= 0; --t) {
        const Vec i = c.i.row(t).transpose(), f = c.f.row(t).transpose(), o = c.o.row(t).transpose();
        const Vec chat = c.chat.row(t).transpose(), cc = c.c.row(t).transpose();
        const Vec c_prev = t > 0 ? Vec(c.c.row(t - 1).transpose()) : Vec(Vec::Zero(p.hidden));
        const Vec h_prev = t > 0 ? Vec(c.h.row(t - 1).transpose()) : Vec(Vec::Zero(p.hidden));
        const Vec xt = c.x.row(t).transpose();

        const Vec dh = dh_up.row(t).transpose() + dh_next;
        const Vec tc = cc.array().tanh();
        Vec dc = dc_next + dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
        const Vec do_ = dh.cwiseProduct(tc);
        const Vec di = dc.cwiseProduct(chat);
        const Vec dchat = dc.cwiseProduct(i);
        const Vec df = dc.cwiseProduct(c_prev);
        dc_next = dc.cwiseProduct(f);

        const Vec dpre_i = di.array() * i.array() * (1.0 - i.array());
        const Vec dpre_f = df.array() * f.array() * (1.0 - f.array());
        const Vec dpre_o = do_.array() * o.array() * (1.0 - o.array());
        const Vec dpre_c = dchat.array() * (1.0 - chat.array().square());

        grads.wi += dpre_i * xt.transpose();
        grads.ui += dpre_i * h_prev.transpose();
        grads.bi.col(0) += dpre_i;
        grads.wf += dpre_f * xt.transpose();
        grads.uf += dpre_f * h_prev.transpose();
        grads.bf.col(0) += dpre_f;
        grads.wo += dpre_o * xt.transpose();
        grads.uo += dpre_o * h_prev.transpose();
        grads.bo.col(0) += dpre_o;
        grads.wc += dpre_c * xt.transpose();
        grads.uc += dpre_c * h_prev.transpose();
        grads.bc.col(0) += dpre_c;

        dx.row(t) = (p.wi.transpose() * dpre_i + p.wf.transpose() * dpre_f +
                     p.wo.transpose() * dpre_o + p.wc.transpose() * dpre_c)
                        .transpose();
        dh_next = p.ui.transpose() * dpre_i + p.uf.transpose() * dpre_f +
                  p.uo.transpose() * dpre_o + p.uc.transpose() * dpre_c;
    }
    return dx;
}

// ---- dropout ----------------------------------------------------------------------

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double drop_rate, Rng& rng) {
    if (drop_rate <= 0.0) return Mat::Ones(rows, cols);
    const double keep = 1.0 - drop_rate;
    Mat m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
    return m;
}

}  // namespace gzsl
