#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include "gzsl/pipeline.hpp"

namespace {

struct GlobalOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string artifacts;
    std::optional<std::uint64_t> seed;

    gzsl::RunConfig load() const {
        gzsl::RunConfig cfg =
            config_path.empty() ? gzsl::RunConfig{} : gzsl::RunConfig::from_file(config_path);
        std::map<std::string, std::string> kv;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw gzsl::ConfigError("--set expects key=value, got '" + s + "'");
            kv[s.substr(0, eq)] = s.substr(eq + 1);
        }
        cfg.apply_overrides(kv);
        if (seed) cfg.seed = *seed;
        return cfg;
    }

    gzsl::ArtifactStore store() const {
        std::string root = artifacts;
        if (root.empty()) {
            const char* env = std::getenv("GZSL_ARTIFACTS");
            root = env ? env : "artifacts";
        }
        return gzsl::ArtifactStore{root};
    }
};

void add_global(CLI::App* cmd, GlobalOpts& g) {
    cmd->add_option("--config", g.config_path, "JSON config file (defaults used otherwise)");
    cmd->add_option("--set", g.sets, "config override, e.g. --set extractor.epochs=3")
        ->take_all();
    cmd->add_option("--artifacts", g.artifacts,
                    "artifact root directory (or env GZSL_ARTIFACTS, default ./artifacts)");
    cmd->add_option("--seed", g.seed, "master seed (overrides config)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generalized zero-shot multi-label text coding pipeline"};
    app.require_subcommand(1);
    GlobalOpts g;

    // gen-synthetic
    std::string spec_path, out_dir = "data";
    auto* c_gen = app.add_subcommand("gen-synthetic", "emit a synthetic corpus + hierarchy + embeddings");
    add_global(c_gen, g);
    c_gen->add_option("--spec", spec_path, "synthetic corpus spec (JSON)")->required();
    c_gen->add_option("--out", out_dir, "output directory");

    // prepare
    std::string hierarchy_path, corpus_path, embeddings_path;
    auto* c_prep = app.add_subcommand("prepare", "tokenize, build vocabulary, splits and cohorts");
    add_global(c_prep, g);
    c_prep->add_option("--hierarchy", hierarchy_path, "label hierarchy TSV")->required();
    c_prep->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    c_prep->add_option("--embeddings", embeddings_path, "word vector file")->required();

    auto* c_ext = app.add_subcommand("train-extractor", "train the attentive feature extractor");
    add_global(c_ext, g);

    auto* c_dump = app.add_subcommand("dump-features", "dump per-(code,doc) features and keywords");
    add_global(c_dump, g);

    // train-gan
    std::string method = "wganz+key", cohort = "zero", adapted, split = "test", tag;
    std::uint64_t seed_index = 0;
    int synth_count = 0, n_seeds = 10;
    bool use_meta = false;
    auto* c_gan = app.add_subcommand("train-gan", "train the conditional feature generator");
    add_global(c_gan, g);
    c_gan->add_option("--method", method,
                      "wgan|wganz with optional +cls +cyc +key (e.g. wganz+key)");
    c_gan->add_option("--seed-index", seed_index, "per-seed run index");

    auto* c_synth = app.add_subcommand("synthesize", "write generated features for a cohort");
    add_global(c_synth, g);
    c_synth->add_option("--method", method);
    c_synth->add_option("--cohort", cohort, "zero|few|both");
    c_synth->add_option("--count", synth_count, "features per code (default adapt.synth_count)");
    c_synth->add_option("--seed-index", seed_index);

    auto* c_ft = app.add_subcommand("finetune", "fine-tune per-code classifiers on generated features");
    add_global(c_ft, g);
    c_ft->add_option("--method", method);
    c_ft->add_option("--cohort", cohort, "zero|few|both");
    c_ft->add_option("--seed-index", seed_index);

    auto* c_meta = app.add_subcommand("train-meta", "train the centroid meta-embedding head");
    add_global(c_meta, g);

    auto* c_eval = app.add_subcommand("evaluate", "cohort metrics for a split");
    add_global(c_eval, g);
    c_eval->add_option("--split", split, "train|valid|test");
    c_eval->add_option("--adapted", adapted, "adapted checkpoint tag, e.g. wganz+key_s0");
    c_eval->add_flag("--meta", use_meta, "apply the meta-embedding head");
    c_eval->add_option("--tag", tag, "report file tag");

    auto* c_table = app.add_subcommand("reproduce-table",
                                       "run one method row end-to-end on synthetic data over seeds");
    add_global(c_table, g);
    c_table->add_option("--method", method);
    c_table->add_option("--seeds", n_seeds, "number of seeds to average");
    c_table->add_option("--spec", spec_path, "synthetic corpus spec (JSON)");
    c_table->add_option("--cohort", cohort, "cohort to fine-tune (zero|few|both)");

    CLI11_PARSE(app, argc, argv);

    try {
        const gzsl::RunConfig cfg = g.load();
        const gzsl::ArtifactStore store = g.store();

        if (c_gen->parsed()) {
            gzsl::stage_gen_synthetic(cfg, gzsl::SyntheticSpec::from_json_file(spec_path), out_dir);
            std::cout << "synthetic corpus written to " << out_dir << '\n';
        } else if (c_prep->parsed()) {
            gzsl::stage_prepare(cfg, hierarchy_path, corpus_path, embeddings_path, store);
            std::cout << "prepared -> " << store.prepared() << " (hash "
                      << gzsl::file_hash(store.prepared()) << ")\n";
        } else if (c_ext->parsed()) {
            gzsl::stage_train_extractor(cfg, store);
            std::cout << "extractor -> " << store.extractor() << '\n';
        } else if (c_dump->parsed()) {
            gzsl::stage_dump_features(cfg, store);
            std::cout << "features -> " << store.features() << "\nkeywords -> " << store.keywords()
                      << '\n';
        } else if (c_gan->parsed()) {
            gzsl::stage_train_gan(cfg, method, store, seed_index);
            std::cout << "gan -> " << store.gan(method + "_s" + std::to_string(seed_index)) << '\n';
        } else if (c_synth->parsed()) {
            gzsl::stage_synthesize(cfg, method, cohort, synth_count, store, seed_index);
            std::cout << "synthesized -> "
                      << store.synth(method + "_s" + std::to_string(seed_index)) << '\n';
        } else if (c_ft->parsed()) {
            gzsl::stage_finetune(cfg, method, cohort, store, seed_index);
            std::cout << "adapted -> " << store.adapted(method + "_s" + std::to_string(seed_index))
                      << '\n';
        } else if (c_meta->parsed()) {
            gzsl::stage_train_meta(cfg, store);
            std::cout << "meta head -> " << store.meta() << '\n';
        } else if (c_eval->parsed()) {
            gzsl::EvaluateOptions opt;
            opt.split = split;
            opt.adapted_method = adapted;
            opt.use_meta = use_meta;
            opt.tag = tag;
            const gzsl::MetricsReport report = gzsl::stage_evaluate(cfg, store, opt);
            std::cout << report.to_table();
        } else if (c_table->parsed()) {
            gzsl::SyntheticSpec spec;
            if (!spec_path.empty()) spec = gzsl::SyntheticSpec::from_json_file(spec_path);
            gzsl::reproduce_table(cfg, spec, method, n_seeds, store, cohort);
        }
        return 0;
    } catch (const gzsl::MissingPrerequisite& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const gzsl::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const gzsl::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const gzsl::FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
