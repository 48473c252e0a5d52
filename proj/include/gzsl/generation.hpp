#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gzsl/common.hpp"
#include "gzsl/hierarchy.hpp"
#include "gzsl/nn.hpp"

namespace gzsl {

struct GanConfig {
    int noise_dim = 100;
    int hidden = 800;      // generator / critic hidden width
    int enc_hidden = 200;  // description encoder output d_e
    int critic_steps = 5;  // critic iterations per generator iteration
    int batch = 128;
    double lr = 1e-4;
    int epochs = 60;
    double lambda_gp = 10.0;
    double beta_key = 0.1;
    double w_cls = 0.01;
    double w_cyc = 0.1;
    double leaky_slope = 0.2;
    bool use_z = false, use_key = false, use_cls = false, use_cyc = false;

    // "wgan", "wganz", optionally "+cls" / "+cyc" / "+key"
    void apply_method(const std::string& method);
    std::string method_name() const;
};

// ---- networks -----------------------------------------------------------------

struct Generator {
    Mat w1, b1, w2, b2;  // hidden x in, hidden x 1, out x hidden, out x 1
    void init(int in_dim, int hidden, int out_dim, Rng& rng);
    // column-wise batch; caches pre-activations for backward
    Mat forward(const Mat& in, Mat* hg) const;
    ParamSet parameters();
};

struct Critic {
    Mat w1, b1, w2, b2;  // hidden x (d_f + c_dim), hidden x 1, 1 x hidden, 1 x 1
    int feat_dim = 0;
    double slope = 0.2;
    void init(int feat_dim, int cond_dim, int hidden, double slope, Rng& rng);
    ParamSet parameters();
};

Vec critic_values(const Critic& d, const Mat& f, const Mat& c);
// d D / d f per column
Mat critic_feature_grads(const Critic& d, const Mat& f, const Mat& c);

struct LabelEncoder {
    LstmParams lstm;
    void init(int emb_dim, int hidden, Rng& rng);
    ParamSet parameters() { return lstm.parameters(); }
};

struct EncodeCache {
    LstmCache lstm;
    std::vector<Eigen::Index> argmax;  // winning time step per dimension
    Mat x;                             // M x d description embeddings
};

// e[j] = max over rows of h(., j); used on the LSTM hidden-state sequence
Vec dimensionwise_max(const Mat& h, std::vector<Eigen::Index>* argmax);

// dimension-wise max-pool over LSTM hidden states
Vec encode_description(const LabelEncoder& enc, const Mat& desc_emb, EncodeCache* cache);

struct GenerativeModel {
    GanConfig cfg;
    LabelEncoder enc;
    Generator gen;
    Critic critic;
    Mat q;  // keyword projection, emb_dim x d_f
    Mat r;  // cycle regression, (d_e + d_f) x d_f

    ParamSet generator_side_parameters();  // enc + gen + q + r
    ParamSet critic_parameters();
    ParamSet parameters();  // everything, for checkpoints
};

GenerativeModel init_gan(const GanConfig& cfg, int emb_dim, int feat_dim, Rng& rng);

// ---- losses ----------------------------------------------------------------------

// lambda * mean_b (||grad_{f_hat} D(f_hat, c)||_2 - 1)^2 with per-item alpha
double gradient_penalty(const Critic& d, const Mat& f_real, const Mat& f_fake, const Mat& c,
                        const Vec& alphas, double lambda);

struct WganLossValues {
    double critic;       // -(E w D(real) - E w D(fake)) + penalty   (minimized by D)
    double generator;    // -E w D(fake)                              (minimized by G)
    double wasserstein;  // E w D(real) - E w D(fake)
    double penalty;
};

// weights are 1 for Eq. 4; cosine pi(c, c_sib) for Eq. 6 (penalty unweighted)
WganLossValues wgan_losses(const Critic& d, const Mat& f_real, const Mat& f_fake, const Mat& c,
                           const Vec& alphas, double lambda, const Vec& weights);

// -sum_k max(w_k, 0) * log softmax_K(e_k . (q f))
double keyword_loss(const Mat& ek, const std::vector<std::pair<int, double>>& keywords, const Mat& q,
                    const Vec& f_fake);
double cls_loss(const Vec& g_l, const Vec& f_fake);
double cyc_loss(const Vec& c_l, const Mat& r, const Vec& f_fake);

// ---- batch objectives with analytic gradients --------------------------------------

// critic objective on a fixed batch (generator outputs given); grads in
// critic_parameters() order when non-null
double critic_batch_loss(const Critic& d, const Mat& f_real, const Mat& f_fake, const Mat& c,
                         const Vec& alphas, double lambda, const Vec& weights,
                         std::vector<Mat>* grads);

// Everything the GAN conditions on, frozen: trained word embeddings, graph label
// embeddings, description tokens, sibling map, keyword vocabulary.
struct GanContext {
    const LabelHierarchy* hierarchy = nullptr;
    Mat emb;                                   // |vocab| x d (frozen)
    Mat g;                                     // d_f x L (frozen)
    std::map<int, int> sibling;                // zero-shot id -> seen sibling id
    std::vector<int> kw_vocab;                 // sorted token ids (the global set K)
    Mat ek;                                    // |K| x d rows = emb of kw_vocab
    // per label id, per doc id: [(position in kw_vocab, clamped cosine weight)]
    std::map<int, std::unordered_map<std::string, std::vector<std::pair<int, double>>>> keywords;

    Mat description_embeddings(int label) const;
};

struct GenItem {
    int code = -1;
    double weight = 1.0;                                       // pi for Eq. 6 batches
    const std::vector<std::pair<int, double>>* keywords = nullptr;  // null -> no KEY term
};

// generator-side objective on a fixed batch: -E w D(G(z,c), c) + beta KEY + w_cls CLS
// + w_cyc CYC; grads in generator_side_parameters() order when non-null
double generator_batch_loss(const GenerativeModel& gm, const GanContext& ctx,
                            const std::vector<GenItem>& items, const Mat& z,
                            std::vector<Mat>* grads);

// ---- training ------------------------------------------------------------------------

struct FeatRow {
    std::string doc_id;
    Vec f;
};

struct GanTrainLog {
    std::vector<double> epoch_critic_loss;
    std::vector<double> epoch_generator_loss;
    long critic_steps = 0;
    long generator_steps = 0;
    long skipped_zero_shot_codes = 0;  // no sibling available
};

// positives: per seen label id, real features with y_l = 1
GanTrainLog train_gan(GenerativeModel& gm, const GanContext& ctx,
                      const std::map<int, std::vector<FeatRow>>& positives, std::uint64_t seed);

// c_l = e_l || g_l for one label, with current encoder parameters
Vec condition_vector(const GenerativeModel& gm, const GanContext& ctx, int label);

// count fresh gaussian z draws through the generator; d_f x count
Mat synthesize_features(const GenerativeModel& gm, const GanContext& ctx, int label, int count,
                        std::uint64_t seed);

}  // namespace gzsl
