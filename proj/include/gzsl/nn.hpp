#pragma once

#include <string>
#include <vector>

#include "gzsl/common.hpp"

namespace gzsl {

// Named views over a model's parameter tensors; the same list drives Adam,
// checkpoints and gradient checks.  Biases are stored as n x 1 matrices.
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Mat*> tensors;

    void add(const std::string& name, Mat* t) {
        names.push_back(name);
        tensors.push_back(t);
    }
    void append(const ParamSet& other, const std::string& prefix) {
        for (std::size_t i = 0; i < other.names.size(); ++i) add(prefix + other.names[i], other.tensors[i]);
    }
    std::vector<Mat> zero_grads() const {
        std::vector<Mat> g;
        g.reserve(tensors.size());
        for (const Mat* t : tensors) g.emplace_back(Mat::Zero(t->rows(), t->cols()));
        return g;
    }
};

Mat glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// ---- 1-D convolution over token positions, same-length output, tanh ------------

struct Conv1d {
    Mat w;  // (width * in_dim) x out_dim
    Mat b;  // out_dim x 1
    int width = 5, in_dim = 0, out_dim = 0;

    void init(int width, int in_dim, int out_dim, Rng& rng);
    ParamSet parameters();
};

struct Conv1dCache {
    Mat xw;  // n x (width * in_dim), im2col
    Mat h;   // n x out_dim, post-tanh
};

// X: n x in_dim (rows = positions) -> H: n x out_dim
Mat conv1d_forward(const Conv1d& c, const Mat& x, Conv1dCache* cache);
// returns dX; accumulates into dw/db
Mat conv1d_backward(const Conv1d& c, const Conv1dCache& cache, const Mat& dh, Mat& dw, Mat& db);

// ---- gated recurrent cell (graph propagation update) -----------------------------

struct GruParams {
    Mat wz, uz, wr, ur, wh, uh;  // dim x dim
    Mat bz, br, bh;              // dim x 1

    void init(int dim, Rng& rng);
    ParamSet parameters();
};

struct GruGrads {
    Mat wz, uz, wr, ur, wh, uh, bz, br, bh;
    explicit GruGrads(const GruParams& p);
    std::vector<Mat*> list();
};

struct GruCache {
    Mat h, g_prev, z, r, cand;
};

// column-wise batch: h, g_prev are dim x L
Mat gru_forward(const GruParams& p, const Mat& h, const Mat& g_prev, GruCache* cache);
// accumulates parameter grads; adds input grads into dh / dg_prev
void gru_backward(const GruParams& p, const GruCache& c, const Mat& dg_new, Mat& dh, Mat& dg_prev,
                  GruGrads& grads);

// ---- LSTM (label-description encoder) ---------------------------------------------

struct LstmParams {
    Mat wi, ui, wf, uf, wo, uo, wc, uc;  // hidden x in / hidden x hidden
    Mat bi, bf, bo, bc;                  // hidden x 1
    int in_dim = 0, hidden = 0;

    void init(int in_dim, int hidden, Rng& rng);
    ParamSet parameters();
};

struct LstmGrads {
    Mat wi, ui, wf, uf, wo, uo, wc, uc, bi, bf, bo, bc;
    explicit LstmGrads(const LstmParams& p);
    std::vector<Mat*> list();
};

struct LstmCache {
    Mat x;                                // M x in_dim
    Mat i, f, o, chat, c, h;              // M x hidden (rows = steps)
};

// X rows are time steps; returns H (M x hidden)
Mat lstm_forward(const LstmParams& p, const Mat& x, LstmCache* cache);
// dh: M x hidden upstream grads; accumulates param grads, returns dX
Mat lstm_backward(const LstmParams& p, const LstmCache& c, const Mat& dh, LstmGrads& grads);

// ---- dropout -------------------------------------------------------------------

// inverted dropout mask: entries are 0 or 1/keep
Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double drop_rate, Rng& rng);

}  // namespace gzsl
