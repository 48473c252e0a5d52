#pragma once

#include <map>
#include <vector>

#include "gzsl/common.hpp"
#include "gzsl/generation.hpp"
#include "gzsl/nn.hpp"

namespace gzsl {

struct AdaptConfig {
    int synth_count = 256;  // generated positives per code
    double lr = 1e-5;
    int batch = 128;
    int epochs = 50;             // upper bound; early stop on a held-out slice
    int neg_pool = 1024;         // real negatives sampled per code
    double pos_weight = 1.0;
    int early_stop_patience = 5;
};

struct FinetuneResult {
    Vec g;
    int epochs_ran = 0;
    double best_val_loss = 0.0;
};

// Logistic fine-tune of a single classifier vector on (positives, negatives);
// 90/10 train/val split of the pool, best-val weights returned.  Nothing else
// is touched, so per-code runs are independent.
FinetuneResult finetune_classifier(const Vec& g0, const Mat& positives, const Mat& negatives,
                                   const AdaptConfig& cfg, std::uint64_t seed);

// per-code mean of positive features; codes without positives are absent
std::map<int, Vec> build_centroids(const std::map<int, std::vector<FeatRow>>& positives);

// ---- meta-embedding baseline ---------------------------------------------------

struct MetaHead {
    Mat centroids;                    // |M| x d_f (fixed bank)
    std::vector<int> centroid_codes;  // label ids, row order
    Mat o_w1, o_b1, o_w2, o_b2;       // attention net: d_f -> hidden -> |M| softmax
    Mat e_w1, e_b1, e_w2, e_b2;       // coefficient net: d_f -> hidden -> d_f tanh

    ParamSet parameters();  // o/e only; the centroid bank is not trained
};

MetaHead init_meta_head(const std::map<int, Vec>& centroids, int feat_dim, int hidden, Rng& rng);

// attention scores / coefficients for one feature
Vec meta_attention(const MetaHead& h, const Vec& f);    // softmax, |M|
Vec meta_coefficient(const MetaHead& h, const Vec& f);  // tanh, d_f

// f + e_vec (.) (o_vec^T M) with the outputs given explicitly
Vec meta_combine(const Vec& f, const Mat& centroids, const Vec& o_vec, const Vec& e_vec);
// full network path
Vec meta_embed(const MetaHead& h, const Vec& f);

struct MetaConfig {
    double lr = 1e-4;
    int batch = 32;
    int epochs = 10;
    int hidden = 64;
};

struct MetaTrainLog {
    std::vector<double> epoch_losses;
};

// doc_features: per doc d_f x L label-wise features from the frozen extractor;
// labels: per doc 0/1 vector of length L; g: d_f x L frozen classifiers
MetaTrainLog train_meta_head(MetaHead& head, const std::vector<Mat>& doc_features,
                             const std::vector<Vec>& labels, const Mat& g, const MetaConfig& cfg,
                             std::uint64_t seed);

// mean BCE over docs plus gradients; exposed for the finite-difference tests
double meta_batch_loss(const MetaHead& head, const std::vector<const Mat*>& feats,
                       const std::vector<const Vec*>& labels, const Mat& g, std::vector<Mat>* grads);

}  // namespace gzsl
