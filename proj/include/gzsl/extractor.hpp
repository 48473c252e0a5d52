#pragma once

#include <Eigen/Sparse>
#include <vector>

#include "gzsl/common.hpp"
#include "gzsl/corpus.hpp"
#include "gzsl/hierarchy.hpp"
#include "gzsl/nn.hpp"

namespace gzsl {

struct ExtractorConfig {
    int emb_dim = 200;       // d, shared word embedding size
    int conv_filters = 100;  // d_c
    int conv_width = 5;
    int feat_dim = 400;      // d_f == graph embedding size
    int prop_depth = 2;      // t
    double dropout = 0.5;
    double lr = 1e-3;
    int batch = 8;
    int epochs = 40;
    bool use_ldam = false;
    double ldam_c = 1.0;  // C in margin C / n_l^(1/4)
};

// The per-label binary classifiers are the graph-propagated label embeddings:
// scoring always goes through compute_label_state, so training the propagation
// weights is training the classifiers.
struct ExtractorModel {
    ExtractorConfig cfg;
    Mat emb;  // |vocab| x d; row 0 (padding) stays all-zero
    Conv1d conv;
    Mat attn_w;  // d x d_c
    Mat attn_b;  // d x 1
    Mat out_w;   // d_f x d_c
    Mat out_b;   // d_f x 1
    Mat proj_w;  // d_f x d, only when d != d_f
    Mat proj_b;  // d_f x 1
    GruParams gru;

    bool has_proj() const { return cfg.emb_dim != cfg.feat_dim; }
    ParamSet parameters();
};

ExtractorModel init_extractor(const ExtractorConfig& cfg, Eigen::Index vocab_size, Rng& rng);
// start from a prepared embedding table instead of random word vectors
ExtractorModel init_extractor(const ExtractorConfig& cfg, const Mat& embeddings, Rng& rng);

// ---- label side -------------------------------------------------------------------

// column l of Nmat averages l's neighbors; isolated nodes keep themselves
Eigen::SparseMatrix<double> neighbor_matrix(const LabelHierarchy& h);

struct LabelState {
    Mat v;   // d x L, description mean embeddings
    Mat g0;  // d_f x L
    std::vector<Mat> h_in;          // per step, d_f x L
    std::vector<GruCache> caches;   // per step
    Mat g;   // d_f x L, classifiers
};

LabelState compute_label_state(const ExtractorModel& m, const LabelHierarchy& h,
                               const Eigen::SparseMatrix<double>& nmat);

// ---- documents ----------------------------------------------------------------------

struct DocForward {
    Mat x;      // n x d (post-dropout at train time)
    Mat mask;   // dropout mask (train only)
    Conv1dCache conv;
    Mat h;      // n x d_c
    Mat apre;   // n x d
    Mat s;      // n x L attention columns
    Mat a;      // d_c x L
    Mat f;      // d_f x L
    Vec logits; // L
};

// dropout_rng == nullptr -> inference (no dropout)
DocForward extractor_forward(const ExtractorModel& m, const LabelState& ls,
                             const std::vector<int>& tokens, Rng* dropout_rng);

// ---- spec-level operations (also exposed to python) ---------------------------------

// s_l = softmax(tanh(H W_a^T + b_a) v_l); a_l = s_l^T H
std::pair<Vec, Vec> attend_labelwise(const Mat& h, const Vec& v_l, const Mat& w_a, const Vec& b_a);
Vec extract_features(const Vec& a_l, const Mat& w_o, const Vec& b_o);

// probabilities in, epsilon-clamped logs
double bce_loss(const Vec& y, const Vec& y_hat);
// sigma(logit - 1[y=1] * C / n^(1/4)); counts must be >= 1 wherever y = 1
Vec ldam_probabilities(const Vec& logits, const std::vector<int>& y, const std::vector<long>& counts,
                       double c);

// ---- training -------------------------------------------------------------------------

struct ExtractorTrainLog {
    std::vector<double> epoch_losses;
};

// documents' labels resolved against hierarchy ids; mean BCE (or LDAM) per doc
ExtractorTrainLog train_extractor(ExtractorModel& m, const LabelHierarchy& h,
                                  const std::vector<Document>& train_docs, std::uint64_t seed);

// loss + gradients for one batch; exposed for the finite-difference tests
double extractor_batch_loss(const ExtractorModel& m, const LabelHierarchy& h,
                            const Eigen::SparseMatrix<double>& nmat,
                            const std::vector<const Document*>& batch,
                            const std::vector<Mat>& dropout_masks, std::vector<Mat>* grads);

}  // namespace gzsl
