#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gzsl/adaptation.hpp"
#include "gzsl/checkpoint.hpp"
#include "gzsl/config.hpp"
#include "gzsl/corpus.hpp"
#include "gzsl/evaluation.hpp"
#include "gzsl/extractor.hpp"
#include "gzsl/generation.hpp"
#include "gzsl/hierarchy.hpp"
#include "gzsl/synthetic.hpp"

namespace gzsl {

// Conventional artifact names under one root directory (env GZSL_ARTIFACTS or
// --artifacts).  Stage order: prepare -> train-extractor -> dump-features ->
// train-gan -> finetune -> evaluate; train-meta branches off dump-features.
struct ArtifactStore {
    std::string root;

    std::string prepared() const { return root + "/prepared.bin"; }
    std::string extractor() const { return root + "/extractor.ckpt"; }
    std::string extractor_log() const { return root + "/extractor_log.json"; }
    std::string features() const { return root + "/features_train.csv"; }
    std::string keywords() const { return root + "/keywords_train.csv"; }
    std::string gan(const std::string& method) const { return root + "/gan_" + method + ".ckpt"; }
    std::string gan_log(const std::string& method) const { return root + "/gan_" + method + "_log.json"; }
    std::string synth(const std::string& method) const { return root + "/synth_" + method + ".csv"; }
    std::string adapted(const std::string& method) const { return root + "/adapted_" + method + ".ckpt"; }
    std::string meta() const { return root + "/meta.ckpt"; }
    std::string report(const std::string& tag) const { return root + "/report_" + tag + ".json"; }

    void ensure_dir() const;
};

// ---- prepared corpus -----------------------------------------------------------

struct PreparedData {
    LabelHierarchy hierarchy;
    EmbeddingTable table;
    std::vector<Document> docs;
    Splits splits;
    std::string config_hash;
    long dropped_unknown_labels = 0;

    std::vector<const Document*> split_docs(const std::string& name) const;
};

PreparedData prepare_corpus(const RunConfig& cfg, const std::string& hierarchy_path,
                            const std::string& corpus_path, const std::string& embedding_path);
void save_prepared(const PreparedData& p, const std::string& path);
PreparedData load_prepared(const std::string& path);

// ---- stages: each reads its prerequisites, writes artifact + manifest sidecar ----

void stage_gen_synthetic(const RunConfig& cfg, const SyntheticSpec& spec, const std::string& out_dir);
void stage_prepare(const RunConfig& cfg, const std::string& hierarchy_path,
                   const std::string& corpus_path, const std::string& embedding_path,
                   const ArtifactStore& store);
void stage_train_extractor(const RunConfig& cfg, const ArtifactStore& store);
void stage_dump_features(const RunConfig& cfg, const ArtifactStore& store);
void stage_train_gan(const RunConfig& cfg, const std::string& method, const ArtifactStore& store,
                     std::uint64_t seed_index = 0);
void stage_synthesize(const RunConfig& cfg, const std::string& method, const std::string& cohort,
                      int count, const ArtifactStore& store, std::uint64_t seed_index = 0);
void stage_finetune(const RunConfig& cfg, const std::string& method, const std::string& cohort,
                    const ArtifactStore& store, std::uint64_t seed_index = 0);
void stage_train_meta(const RunConfig& cfg, const ArtifactStore& store);

struct EvaluateOptions {
    std::string split = "test";
    std::string adapted_method;  // empty = baseline classifiers
    bool use_meta = false;
    std::string tag;  // report file suffix; defaults to split[+method]
};

MetricsReport stage_evaluate(const RunConfig& cfg, const ArtifactStore& store,
                             const EvaluateOptions& opt);

// end-to-end method row on synthetic data, averaged over seeds
nlohmann::json reproduce_table(const RunConfig& cfg, const SyntheticSpec& spec,
                               const std::string& method, int n_seeds, const ArtifactStore& store,
                               const std::string& cohort = "zero");

// ---- shared loaders (also used by tests) -------------------------------------------

struct FeatureDump {
    int dim = 0;
    std::map<int, std::vector<FeatRow>> positives;
    std::map<int, std::vector<FeatRow>> negatives;
};

FeatureDump load_feature_dump(const std::string& path, const LabelHierarchy& h);
// keyword CSV -> GanContext keyword table + global vocabulary
void load_keywords_into(GanContext& ctx, const std::string& path, const EmbeddingTable& table,
                        const LabelHierarchy& h);

ExtractorModel extractor_from_checkpoint(const Checkpoint& ck, const PreparedData& prep);
Checkpoint extractor_to_checkpoint(const ExtractorModel& m, const std::string& config_hash,
                                   const PreparedData& prep, std::uint64_t seed, int epoch);
GenerativeModel gan_from_checkpoint(const Checkpoint& ck);
Checkpoint gan_to_checkpoint(const GenerativeModel& gm, const nlohmann::json& extra_manifest);

// builds the frozen conditioning context (trained embeddings, g, siblings,
// keyword vocab) from a trained extractor
GanContext build_gan_context(const ExtractorModel& m, const PreparedData& prep);

// doc-score matrix for a split with the given classifiers (and optional meta head)
Mat score_split(const ExtractorModel& m, const PreparedData& prep,
                const std::vector<const Document*>& docs, const Mat& g, const MetaHead* meta);
Mat gold_matrix(const PreparedData& prep, const std::vector<const Document*>& docs);

nlohmann::json read_manifest(const std::string& artifact_path);
void write_manifest(const std::string& artifact_path, const nlohmann::json& manifest);

}  // namespace gzsl
