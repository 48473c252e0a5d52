#include "gzsl/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gzsl {

using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "gzsl 0.1.0";

std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

void require_file(const std::string& path, const std::string& producing_stage) {
    if (!std::filesystem::exists(path))
        throw MissingPrerequisite("missing artifact '" + path + "'; run the " + producing_stage +
                                  " stage first");
}

void check_config_hash(const json& manifest, const RunConfig& cfg, const std::string& what) {
    const std::string recorded = manifest.value("config_hash", "");
    if (!recorded.empty() && recorded != cfg.hash())
        throw ConfigError(what + " was produced with a different config (hash " + recorded +
                          " vs " + cfg.hash() + "); re-run the pipeline");
}

std::string seed_tag(const std::string& method, std::uint64_t seed_index) {
    return method + "_s" + std::to_string(seed_index);
}

}  // namespace

void ArtifactStore::ensure_dir() const { std::filesystem::create_directories(root); }

nlohmann::json read_manifest(const std::string& artifact_path) {
    const std::string mpath = artifact_path + ".manifest.json";
    std::ifstream in(mpath);
    if (!in) throw MissingPrerequisite("missing manifest: " + mpath);
    return json::parse(in);
}

void write_manifest(const std::string& artifact_path, const json& manifest) {
    json m = manifest;
    m["tool"] = kToolVersion;
    m["timestamp"] = utc_timestamp();
    std::ofstream out(artifact_path + ".manifest.json");
    out << m.dump(2) << '\n';
}

// ---- prepare -------------------------------------------------------------------------

std::vector<const Document*> PreparedData::split_docs(const std::string& name) const {
    const std::vector<std::size_t>* idx = nullptr;
    if (name == "train")
        idx = &splits.train;
    else if (name == "valid")
        idx = &splits.valid;
    else if (name == "test")
        idx = &splits.test;
    else
        throw ConfigError("unknown split '" + name + "'");
    std::vector<const Document*> out;
    out.reserve(idx->size());
    for (std::size_t i : *idx) out.push_back(&docs[i]);
    return out;
}

PreparedData prepare_corpus(const RunConfig& cfg, const std::string& hierarchy_path,
                            const std::string& corpus_path, const std::string& embedding_path) {
    auto raw = read_corpus_file(corpus_path);

    // tokenize, drop records that end up empty
    std::vector<RawRecord> records;
    std::vector<std::vector<std::string>> token_lists;
    for (auto& r : raw) {
        auto toks = tokenize(r.text, cfg.tokenizer);
        if (toks.empty()) continue;
        records.push_back(std::move(r));
        token_lists.push_back(std::move(toks));
    }
    if (records.empty()) throw FormatError("prepare: no usable documents");

    SplitSpec split = cfg.split;
    split.seed = derive_seed(cfg.seed, "split");
    const Splits splits = build_splits(records, split);

    // structure first (zero counts), counts from the train split after label filtering
    std::ifstream hin(hierarchy_path);
    if (!hin) throw MissingPrerequisite("hierarchy file not found: " + hierarchy_path);
    std::vector<std::array<std::string, 3>> hrecords;
    {
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(hin, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto a = line.find('\t');
            const auto b = a == std::string::npos ? std::string::npos : line.find('\t', a + 1);
            if (a == std::string::npos || b == std::string::npos)
                throw FormatError("hierarchy line " + std::to_string(lineno) + ": expected 3 fields");
            hrecords.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1)});
        }
    }
    PreparedData p;
    p.hierarchy = parse_hierarchy(hrecords, {});

    long dropped = 0;
    for (auto& r : records) {
        std::vector<std::string> kept;
        for (const auto& l : r.labels) {
            if (p.hierarchy.code_index.count(l))
                kept.push_back(l);
            else
                ++dropped;
        }
        r.labels = std::move(kept);
    }
    p.dropped_unknown_labels = dropped;

    std::map<std::string, long> counts;
    for (std::size_t i : splits.train)
        for (const auto& l : records[i].labels) ++counts[l];
    p.hierarchy.set_counts(counts);

    // shared vocabulary: corpus tokens plus description tokens
    std::vector<std::vector<std::string>> vocab_lists = token_lists;
    for (const auto& n : p.hierarchy.nodes) vocab_lists.push_back(tokenize(n.description, cfg.tokenizer));

    int file_dim = 0;
    auto pretrained = load_word_vectors(embedding_path, file_dim);
    if (file_dim != cfg.extractor.emb_dim)
        throw ConfigError("embedding file dimension " + std::to_string(file_dim) +
                          " != configured emb_dim " + std::to_string(cfg.extractor.emb_dim));
    p.table = build_embedding_table(vocab_lists, cfg.extractor.emb_dim, &pretrained,
                                    derive_seed(cfg.seed, "embed-init"));

    for (auto& n : p.hierarchy.nodes) {
        n.description_tokens.clear();
        for (const auto& t : tokenize(n.description, cfg.tokenizer))
            n.description_tokens.push_back(p.table.lookup(t));
        if (n.description_tokens.empty())
            throw FormatError("label '" + n.code + "' has an empty description after tokenization");
    }

    p.docs.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        Document d;
        d.id = records[i].id;
        d.group = records[i].group;
        d.labels = records[i].labels;
        for (const auto& t : token_lists[i]) d.tokens.push_back(p.table.lookup(t));
        p.docs.push_back(std::move(d));
    }
    p.splits = splits;
    p.config_hash = cfg.hash();
    return p;
}

void save_prepared(const PreparedData& p, const std::string& path) {
    Checkpoint ck;
    ck.tensors["emb"] = p.table.vectors;
    json m;
    m["stage"] = "prepare";
    m["config_hash"] = p.config_hash;
    m["dropped_unknown_labels"] = p.dropped_unknown_labels;
    m["vocab"] = p.table.tokens;
    json docs = json::array();
    for (const auto& d : p.docs) {
        json dj;
        dj["id"] = d.id;
        dj["tokens"] = d.tokens;
        dj["labels"] = d.labels;
        if (!d.group.empty()) dj["group"] = d.group;
        docs.push_back(std::move(dj));
    }
    m["docs"] = std::move(docs);
    json hier = json::array();
    for (const auto& n : p.hierarchy.nodes) {
        json nj;
        nj["code"] = n.code;
        nj["parent"] = n.parent ? json(*n.parent) : json("");
        nj["description"] = n.description;
        nj["desc_tokens"] = n.description_tokens;
        nj["count"] = n.train_count;
        hier.push_back(std::move(nj));
    }
    m["hierarchy"] = std::move(hier);
    m["splits"] = {{"train", p.splits.train}, {"valid", p.splits.valid}, {"test", p.splits.test}};
    ck.manifest = std::move(m);
    ck.save(path);
}

PreparedData load_prepared(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw MissingPrerequisite("missing artifact '" + path + "'; run the prepare stage first");
    Checkpoint ck = Checkpoint::load(path, "prepare");
    const json& m = ck.manifest;
    PreparedData p;
    p.config_hash = m.value("config_hash", "");
    p.dropped_unknown_labels = m.value("dropped_unknown_labels", 0L);

    p.table.tokens = m.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < p.table.tokens.size(); ++i)
        p.table.index[p.table.tokens[i]] = static_cast<int>(i);
    p.table.vectors = ck.tensor("emb");

    std::vector<std::array<std::string, 3>> hrecords;
    std::map<std::string, long> counts;
    for (const auto& nj : m.at("hierarchy")) {
        hrecords.push_back({nj.at("code").get<std::string>(), nj.at("parent").get<std::string>(),
                            nj.at("description").get<std::string>()});
        counts[nj.at("code").get<std::string>()] = nj.at("count").get<long>();
    }
    p.hierarchy = parse_hierarchy(hrecords, counts);
    for (const auto& nj : m.at("hierarchy")) {
        auto& node = p.hierarchy.nodes[static_cast<std::size_t>(p.hierarchy.id(nj.at("code").get<std::string>()))];
        node.description_tokens = nj.at("desc_tokens").get<std::vector<int>>();
    }

    for (const auto& dj : m.at("docs")) {
        Document d;
        d.id = dj.at("id").get<std::string>();
        d.tokens = dj.at("tokens").get<std::vector<int>>();
        d.labels = dj.at("labels").get<std::vector<std::string>>();
        d.group = dj.value("group", "");
        p.docs.push_back(std::move(d));
    }
    p.splits.train = m.at("splits").at("train").get<std::vector<std::size_t>>();
    p.splits.valid = m.at("splits").at("valid").get<std::vector<std::size_t>>();
    p.splits.test = m.at("splits").at("test").get<std::vector<std::size_t>>();
    return p;
}

// ---- checkpoint adapters ----------------------------------------------------------------

Checkpoint extractor_to_checkpoint(const ExtractorModel& m, const std::string& config_hash,
                                   const PreparedData& prep, std::uint64_t seed, int epoch) {
    Checkpoint ck;
    ExtractorModel& mm = const_cast<ExtractorModel&>(m);
    ParamSet ps = mm.parameters();
    for (std::size_t i = 0; i < ps.names.size(); ++i) ck.tensors[ps.names[i]] = *ps.tensors[i];
    json cfg;
    cfg["emb_dim"] = m.cfg.emb_dim;
    cfg["conv_filters"] = m.cfg.conv_filters;
    cfg["conv_width"] = m.cfg.conv_width;
    cfg["feat_dim"] = m.cfg.feat_dim;
    cfg["prop_depth"] = m.cfg.prop_depth;
    cfg["dropout"] = m.cfg.dropout;
    cfg["lr"] = m.cfg.lr;
    cfg["batch"] = m.cfg.batch;
    cfg["epochs"] = m.cfg.epochs;
    cfg["use_ldam"] = m.cfg.use_ldam;
    cfg["ldam_c"] = m.cfg.ldam_c;
    ck.manifest["stage"] = "train-extractor";
    ck.manifest["extractor_config"] = cfg;
    ck.manifest["config_hash"] = config_hash;
    ck.manifest["vocab_hash"] = hash_hex(prep.table.vocab_hash());
    ck.manifest["seed"] = seed;
    ck.manifest["epoch"] = epoch;
    return ck;
}

ExtractorModel extractor_from_checkpoint(const Checkpoint& ck, const PreparedData& prep) {
    const json& c = ck.manifest.at("extractor_config");
    ExtractorConfig cfg;
    cfg.emb_dim = c.at("emb_dim").get<int>();
    cfg.conv_filters = c.at("conv_filters").get<int>();
    cfg.conv_width = c.at("conv_width").get<int>();
    cfg.feat_dim = c.at("feat_dim").get<int>();
    cfg.prop_depth = c.at("prop_depth").get<int>();
    cfg.dropout = c.at("dropout").get<double>();
    cfg.lr = c.at("lr").get<double>();
    cfg.batch = c.at("batch").get<int>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.use_ldam = c.at("use_ldam").get<bool>();
    cfg.ldam_c = c.at("ldam_c").get<double>();

    const std::string recorded_vocab = ck.manifest.value("vocab_hash", "");
    if (!recorded_vocab.empty() && recorded_vocab != hash_hex(prep.table.vocab_hash()))
        throw ConfigError("extractor checkpoint was trained on a different vocabulary");

    Rng rng(0);
    ExtractorModel m = init_extractor(cfg, ck.tensor("emb").rows(), rng);
    ParamSet ps = m.parameters();
    for (std::size_t i = 0; i < ps.names.size(); ++i) *ps.tensors[i] = ck.tensor(ps.names[i]);
    return m;
}

Checkpoint gan_to_checkpoint(const GenerativeModel& gm, const json& extra_manifest) {
    Checkpoint ck;
    GenerativeModel& g = const_cast<GenerativeModel&>(gm);
    ParamSet ps = g.parameters();
    for (std::size_t i = 0; i < ps.names.size(); ++i) ck.tensors[ps.names[i]] = *ps.tensors[i];
    json cfg;
    cfg["noise_dim"] = gm.cfg.noise_dim;
    cfg["hidden"] = gm.cfg.hidden;
    cfg["enc_hidden"] = gm.cfg.enc_hidden;
    cfg["critic_steps"] = gm.cfg.critic_steps;
    cfg["batch"] = gm.cfg.batch;
    cfg["lr"] = gm.cfg.lr;
    cfg["epochs"] = gm.cfg.epochs;
    cfg["lambda_gp"] = gm.cfg.lambda_gp;
    cfg["beta_key"] = gm.cfg.beta_key;
    cfg["w_cls"] = gm.cfg.w_cls;
    cfg["w_cyc"] = gm.cfg.w_cyc;
    cfg["leaky_slope"] = gm.cfg.leaky_slope;
    cfg["method"] = gm.cfg.method_name();
    ck.manifest = extra_manifest;
    ck.manifest["stage"] = "train-gan";
    ck.manifest["gan_config"] = cfg;
    return ck;
}

GenerativeModel gan_from_checkpoint(const Checkpoint& ck) {
    const json& c = ck.manifest.at("gan_config");
    GanConfig cfg;
    cfg.noise_dim = c.at("noise_dim").get<int>();
    cfg.hidden = c.at("hidden").get<int>();
    cfg.enc_hidden = c.at("enc_hidden").get<int>();
    cfg.critic_steps = c.at("critic_steps").get<int>();
    cfg.batch = c.at("batch").get<int>();
    cfg.lr = c.at("lr").get<double>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.lambda_gp = c.at("lambda_gp").get<double>();
    cfg.beta_key = c.at("beta_key").get<double>();
    cfg.w_cls = c.at("w_cls").get<double>();
    cfg.w_cyc = c.at("w_cyc").get<double>();
    cfg.leaky_slope = c.at("leaky_slope").get<double>();
    cfg.apply_method(c.at("method").get<std::string>());

    const int emb_dim = static_cast<int>(ck.tensor("enc.wi").cols());
    const int feat_dim = static_cast<int>(ck.tensor("gen.w2").rows());
    Rng rng(0);
    GenerativeModel gm = init_gan(cfg, emb_dim, feat_dim, rng);
    ParamSet ps = gm.parameters();
    for (std::size_t i = 0; i < ps.names.size(); ++i) *ps.tensors[i] = ck.tensor(ps.names[i]);
    return gm;
}

// ---- feature dump / keywords --------------------------------------------------------------

FeatureDump load_feature_dump(const std::string& path, const LabelHierarchy& h) {
    require_file(path, "dump-features");
    std::ifstream in(path);
    FeatureDump dump;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.rfind("code_id,", 0) == 0) continue;
        const auto parts = split_csv_line(line);
        if (parts.size() < 4) throw FormatError("feature dump line " + std::to_string(lineno));
        const int code = h.id(parts[0]);
        FeatRow row;
        row.doc_id = parts[1];
        const int y = std::stoi(parts[2]);
        row.f = Vec(static_cast<Eigen::Index>(parts.size() - 3));
        for (std::size_t i = 3; i < parts.size(); ++i)
            row.f(static_cast<Eigen::Index>(i - 3)) = std::strtod(parts[i].c_str(), nullptr);
        if (dump.dim == 0) dump.dim = static_cast<int>(row.f.size());
        if (dump.dim != static_cast<int>(row.f.size()))
            throw FormatError("feature dump: inconsistent dimensions");
        (y == 1 ? dump.positives : dump.negatives)[code].push_back(std::move(row));
    }
    if (dump.positives.empty()) throw FormatError("feature dump has no positive rows: " + path);
    return dump;
}

void load_keywords_into(GanContext& ctx, const std::string& path, const EmbeddingTable& table,
                        const LabelHierarchy& h) {
    require_file(path, "dump-features");
    std::ifstream in(path);
    std::string line;
    struct RawKw {
        int code;
        std::string doc;
        int token;
        double score;
    };
    std::vector<RawKw> rows;
    std::set<int> vocab;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.rfind("doc_id,", 0) == 0) continue;
        const auto parts = split_csv_line(line);
        if (parts.size() != 4) throw FormatError("keyword file line " + std::to_string(lineno));
        RawKw r;
        r.doc = parts[0];
        r.code = h.id(parts[1]);
        auto it = table.index.find(parts[2]);
        if (it == table.index.end())
            throw FormatError("keyword file: unknown token '" + parts[2] + "'");
        r.token = it->second;
        r.score = std::strtod(parts[3].c_str(), nullptr);
        rows.push_back(std::move(r));
        vocab.insert(r.token);
    }
    ctx.kw_vocab.assign(vocab.begin(), vocab.end());
    std::map<int, int> pos_of;
    for (std::size_t i = 0; i < ctx.kw_vocab.size(); ++i) pos_of[ctx.kw_vocab[i]] = static_cast<int>(i);
    ctx.ek = Mat(static_cast<Eigen::Index>(ctx.kw_vocab.size()), ctx.emb.cols());
    for (std::size_t i = 0; i < ctx.kw_vocab.size(); ++i)
        ctx.ek.row(static_cast<Eigen::Index>(i)) = ctx.emb.row(ctx.kw_vocab[i]);
    for (const auto& r : rows)
        ctx.keywords[r.code][r.doc].emplace_back(pos_of.at(r.token), std::max(r.score, 0.0));
}

GanContext build_gan_context(const ExtractorModel& m, const PreparedData& prep) {
    GanContext ctx;
    ctx.hierarchy = &prep.hierarchy;
    ctx.emb = m.emb;
    const auto nmat = neighbor_matrix(prep.hierarchy);
    const LabelState ls = compute_label_state(m, prep.hierarchy, nmat);
    ctx.g = ls.g;
    const Mat v_rows = ls.v.transpose();  // codes x d
    for (int u : prep.hierarchy.zero_shot) {
        auto sib = nearest_sibling(u, prep.hierarchy, v_rows);
        if (sib) ctx.sibling[u] = *sib;
    }
    return ctx;
}

// ---- scoring --------------------------------------------------------------------------------

Mat score_split(const ExtractorModel& m, const PreparedData& prep,
                const std::vector<const Document*>& docs, const Mat& g, const MetaHead* meta) {
    const auto nmat = neighbor_matrix(prep.hierarchy);
    const LabelState ls = compute_label_state(m, prep.hierarchy, nmat);
    const auto L = static_cast<Eigen::Index>(prep.hierarchy.size());
    Mat scores(static_cast<Eigen::Index>(docs.size()), L);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const DocForward fw = extractor_forward(m, ls, docs[i]->tokens, nullptr);
        Mat f = fw.f;
        if (meta) {
            const Mat ho = ((meta->o_w1 * f).colwise() + meta->o_b1.col(0)).cwiseMax(0.0);
            Mat o_logits = (meta->o_w2 * ho).colwise() + meta->o_b2.col(0);
            Mat o(o_logits.rows(), o_logits.cols());
            for (Eigen::Index l = 0; l < L; ++l) {
                Vec col = o_logits.col(l);
                softmax_inplace(col);
                o.col(l) = col;
            }
            const Mat he = ((meta->e_w1 * f).colwise() + meta->e_b1.col(0)).cwiseMax(0.0);
            const Mat e = (((meta->e_w2 * he).colwise() + meta->e_b2.col(0)).array().tanh()).matrix();
            f = f + e.cwiseProduct(meta->centroids.transpose() * o);
        }
        for (Eigen::Index l = 0; l < L; ++l)
            scores(static_cast<Eigen::Index>(i), l) = sigmoid(g.col(l).dot(f.col(l)));
    }
    return scores;
}

Mat gold_matrix(const PreparedData& prep, const std::vector<const Document*>& docs) {
    const auto L = static_cast<Eigen::Index>(prep.hierarchy.size());
    Mat gold = Mat::Zero(static_cast<Eigen::Index>(docs.size()), L);
    for (std::size_t i = 0; i < docs.size(); ++i)
        for (const auto& code : docs[i]->labels)
            gold(static_cast<Eigen::Index>(i), prep.hierarchy.id(code)) = 1.0;
    return gold;
}

// ---- stages ----------------------------------------------------------------------------------

void stage_gen_synthetic(const RunConfig& cfg, const SyntheticSpec& spec, const std::string& out_dir) {
    const auto out = generate_synthetic_corpus(spec, derive_seed(cfg.seed, "synthetic"), out_dir);
    json m;
    m["stage"] = "gen-synthetic";
    m["config_hash"] = cfg.hash();
    m["master_seed"] = cfg.seed;
    m["stage_seed"] = derive_seed(cfg.seed, "synthetic");
    m["outputs"] = {{"hierarchy", file_hash(out.hierarchy_path)},
                    {"corpus", file_hash(out.corpus_path)},
                    {"embeddings", file_hash(out.embedding_path)}};
    write_manifest(out.corpus_path, m);
}

void stage_prepare(const RunConfig& cfg, const std::string& hierarchy_path,
                   const std::string& corpus_path, const std::string& embedding_path,
                   const ArtifactStore& store) {
    require_file(hierarchy_path, "gen-synthetic (or provide input data)");
    require_file(corpus_path, "gen-synthetic (or provide input data)");
    require_file(embedding_path, "gen-synthetic (or provide input data)");
    store.ensure_dir();
    PreparedData p = prepare_corpus(cfg, hierarchy_path, corpus_path, embedding_path);
    save_prepared(p, store.prepared());
    json m;
    m["stage"] = "prepare";
    m["config_hash"] = cfg.hash();
    m["master_seed"] = cfg.seed;
    m["inputs"] = {{"hierarchy", file_hash(hierarchy_path)},
                   {"corpus", file_hash(corpus_path)},
                   {"embeddings", file_hash(embedding_path)}};
    m["outputs"] = {{"prepared", file_hash(store.prepared())}};
    m["dropped_unknown_labels"] = p.dropped_unknown_labels;
    write_manifest(store.prepared(), m);
}

void stage_train_extractor(const RunConfig& cfg, const ArtifactStore& store) {
    PreparedData prep = load_prepared(store.prepared());
    check_config_hash(json{{"config_hash", prep.config_hash}}, cfg, "prepared corpus");

    Rng init_rng(derive_seed(cfg.seed, "extractor-init"));
    ExtractorModel model = init_extractor(cfg.extractor, prep.table.vectors, init_rng);

    std::vector<Document> train_docs;
    for (const Document* d : prep.split_docs("train")) train_docs.push_back(*d);
    const std::uint64_t train_seed = derive_seed(cfg.seed, "extractor-train");
    const ExtractorTrainLog log = train_extractor(model, prep.hierarchy, train_docs, train_seed);

    Checkpoint ck = extractor_to_checkpoint(model, cfg.hash(), prep, train_seed, cfg.extractor.epochs);
    ck.save(store.extractor());
    json lj;
    lj["epoch_losses"] = log.epoch_losses;
    std::ofstream lout(store.extractor_log());
    lout << lj.dump(2) << '\n';

    json m;
    m["stage"] = "train-extractor";
    m["config_hash"] = cfg.hash();
    m["master_seed"] = cfg.seed;
    m["stage_seed"] = train_seed;
    m["inputs"] = {{"prepared", file_hash(store.prepared())}};
    m["outputs"] = {{"extractor", file_hash(store.extractor())}};
    write_manifest(store.extractor(), m);
}

void stage_dump_features(const RunConfig& cfg, const ArtifactStore& store) {
    PreparedData prep = load_prepared(store.prepared());
    require_file(store.extractor(), "train-extractor");
    const Checkpoint eck = Checkpoint::load(store.extractor(), "train-extractor");
    check_config_hash(eck.manifest, cfg, "extractor checkpoint");
    const ExtractorModel model = extractor_from_checkpoint(eck, prep);

    const auto nmat = neighbor_matrix(prep.hierarchy);
    const LabelState ls = compute_label_state(model, prep.hierarchy, nmat);
    const auto train_docs = prep.split_docs("train");
    const auto L = static_cast<Eigen::Index>(prep.hierarchy.size());

    // choose the negative (doc, code) pairs up front, bounded per code
    std::vector<std::vector<char>> doc_is_pos(train_docs.size(), std::vector<char>(static_cast<std::size_t>(L), 0));
    for (std::size_t i = 0; i < train_docs.size(); ++i)
        for (const auto& code : train_docs[i]->labels)
            doc_is_pos[i][static_cast<std::size_t>(prep.hierarchy.id(code))] = 1;
    std::vector<std::vector<char>> emit_neg(train_docs.size(), std::vector<char>(static_cast<std::size_t>(L), 0));
    for (Eigen::Index l = 0; l < L; ++l) {
        std::vector<std::size_t> cand;
        for (std::size_t i = 0; i < train_docs.size(); ++i)
            if (!doc_is_pos[i][static_cast<std::size_t>(l)]) cand.push_back(i);
        Rng rng(derive_seed(cfg.seed, "dump-negatives", static_cast<std::uint64_t>(l)));
        rng.shuffle(cand);
        const std::size_t keep = std::min<std::size_t>(cand.size(), static_cast<std::size_t>(cfg.adapt.neg_pool));
        for (std::size_t k = 0; k < keep; ++k) emit_neg[cand[k]][static_cast<std::size_t>(l)] = 1;
    }

    std::ofstream fout(store.features());
    std::ofstream kout(store.keywords());
    fout << "code_id,doc_id,y";
    for (int j = 0; j < model.cfg.feat_dim; ++j) fout << ",f" << j;
    fout << '\n';
    kout << "doc_id,code_id,token,score\n";

    for (std::size_t i = 0; i < train_docs.size(); ++i) {
        const Document& doc = *train_docs[i];
        const DocForward fw = extractor_forward(model, ls, doc.tokens, nullptr);
        for (Eigen::Index l = 0; l < L; ++l) {
            const bool pos = doc_is_pos[i][static_cast<std::size_t>(l)];
            if (!pos && !emit_neg[i][static_cast<std::size_t>(l)]) continue;
            fout << prep.hierarchy.node(static_cast<int>(l)).code << ',' << doc.id << ',' << (pos ? 1 : 0);
            for (Eigen::Index j = 0; j < fw.f.rows(); ++j) fout << ',' << fmt_double(fw.f(j, l));
            fout << '\n';
            if (pos) {
                const auto kws =
                    extract_keywords(doc.tokens, ls.v.col(l), model.emb, cfg.keywords_per_pair);
                for (const auto& kw : kws)
                    kout << doc.id << ',' << prep.hierarchy.node(static_cast<int>(l)).code << ','
                         << prep.table.tokens[static_cast<std::size_t>(kw.token)] << ','
                         << fmt_double(kw.score) << '\n';
            }
        }
    }
    fout.close();
    kout.close();

    json m;
    m["stage"] = "dump-features";
    m["config_hash"] = cfg.hash();
    m["master_seed"] = cfg.seed;
    m["inputs"] = {{"prepared", file_hash(store.prepared())}, {"extractor", file_hash(store.extractor())}};
    m["outputs"] = {{"features", file_hash(store.features())}, {"keywords", file_hash(store.keywords())}};
    write_manifest(store.features(), m);
}

void stage_train_gan(const RunConfig& cfg, const std::string& method, const ArtifactStore& store,
                     std::uint64_t seed_index) {
    PreparedData prep = load_prepared(store.prepared());
    require_file(store.extractor(), "train-extractor");
    const Checkpoint eck = Checkpoint::load(store.extractor(), "train-extractor");
    check_config_hash(eck.manifest, cfg, "extractor checkpoint");
    const ExtractorModel model = extractor_from_checkpoint(eck, prep);

    const FeatureDump dump = load_feature_dump(store.features(), prep.hierarchy);
    if (dump.dim != cfg.extractor.feat_dim)
        throw ConfigError("feature dump dimension " + std::to_string(dump.dim) +
                          " != configured feat_dim " + std::to_string(cfg.extractor.feat_dim));

    GanContext ctx = build_gan_context(model, prep);
    load_keywords_into(ctx, store.keywords(), prep.table, prep.hierarchy);

    GanConfig gcfg = cfg.gan;
    gcfg.apply_method(method);
    Rng init_rng(derive_seed(cfg.seed, "gan-init", seed_index));
    GenerativeModel gm = init_gan(gcfg, cfg.extractor.emb_dim, cfg.extractor.feat_dim, init_rng);
    const std::uint64_t train_seed = derive_seed(cfg.seed, "gan-train", seed_index);
    const GanTrainLog log = train_gan(gm, ctx, dump.positives, train_seed);

    json extra;
    extra["config_hash"] = cfg.hash();
    extra["seed"] = train_seed;
    extra["seed_index"] = seed_index;
    extra["extractor_hash"] = file_hash(store.extractor());
    extra["epoch"] = gcfg.epochs;
    Checkpoint ck = gan_to_checkpoint(gm, extra);
    const std::string path = store.gan(seed_tag(method, seed_index));
    ck.save(path);

    json lj;
    lj["epoch_critic_loss"] = log.epoch_critic_loss;
    lj["epoch_generator_loss"] = log.epoch_generator_loss;
    lj["critic_steps"] = log.critic_steps;
    lj["generator_steps"] = log.generator_steps;
    lj["skipped_zero_shot_codes"] = log.skipped_zero_shot_codes;
    std::ofstream lout(store.gan_log(seed_tag(method, seed_index)));
    lout << lj.dump(2) << '\n';

    json m;
    m["stage"] = "train-gan";
    m["method"] = method;
    m["config_hash"] = cfg.hash();
    m["master_seed"] = cfg.seed;
    m["stage_seed"] = train_seed;
    m["seed_index"] = seed_index;
    m["inputs"] = {{"prepared", file_hash(store.prepared())},
                   {"extractor", file_hash(store.extractor())},
                   {"features", file_hash(store.features())},
                   {"keywords", file_hash(store.keywords())}};
    m["outputs"] = {{"gan", file_hash(path)}};
    write_manifest(path, m);
}

namespace {

std::vector<int> cohort_codes(const LabelHierarchy& h, const std::string& cohort) {
    if (cohort == "zero") return h.zero_shot;
    if (cohort == "few") return h.few_shot;
    if (cohort == "both") {
        std::vector<int> out = h.zero_shot;
        out.insert(out.end(), h.few_shot.begin(), h.few_shot.end());
        std::sort(out.begin(), out.end());
        return out;
    }
    throw ConfigError("unknown cohort '" + cohort + "' (expected zero, few or both)");
}

struct GanLoaded {
    PreparedData prep;
    ExtractorModel model;
    GenerativeModel gm;
    GanContext ctx;
    std::string gan_path;
};

GanLoaded load_gan_chain(const RunConfig& cfg, const std::string& method, const ArtifactStore& store,
                         std::uint64_t seed_index) {
    GanLoaded out{load_prepared(store.prepared()), {}, {}, {}, {}};
    require_file(store.extractor(), "train-extractor");
    const Checkpoint eck = Checkpoint::load(store.extractor(), "train-extractor");
    check_config_hash(eck.manifest, cfg, "extractor checkpoint");
    out.model = extractor_from_checkpoint(eck, out.prep);
    out.gan_path = store.gan(seed_tag(method, seed_index));
    require_file(out.gan_path, "train-gan");
    const Checkpoint gck = Checkpoint::load(out.gan_path, "train-gan");
    check_config_hash(gck.manifest, cfg, "gan checkpoint");
    const std::string recorded = gck.manifest.value("extractor_hash", "");
    if (!recorded.empty() && recorded != file_hash(store.extractor()))
        throw ConfigError("gan checkpoint lineage mismatch: retrain the gan for this extractor");
    out.gm = gan_from_checkpoint(gck);
    out.ctx = build_gan_context(out.model, out.prep);
    return out;
}

}  // namespace

void stage_synthesize(const RunConfig& cfg, const std::string& method, const std::string& cohort,
                      int count, const ArtifactStore& store, std::uint64_t seed_index) {
    GanLoaded g = load_gan_chain(cfg, method, store, seed_index);
    if (count <= 0) count = cfg.adapt.synth_count;
    const std::string path = store.synth(seed_tag(method, seed_index));
    std::ofstream out(path);
    out << "code_id,sample";
    for (int j = 0; j < cfg.extractor.feat_dim; ++j) out << ",f" << j;
    out << '\n';
    for (int code : cohort_codes(g.prep.hierarchy, cohort)) {
        const Mat f = synthesize_features(
            g.gm, g.ctx, code, count,
            derive_seed(cfg.seed, "synthesize", (seed_index << 20) + static_cast<std::uint64_t>(code)));
        for (Eigen::Index s = 0; s < f.cols(); ++s) {
            out << g.prep.hierarchy.node(code).code << ',' << s;
            for (Eigen::Index j = 0; j < f.rows(); ++j) out << ',' << fmt_double(f(j, s));
            out << '\n';
        }
    }
    out.close();
    json m;
    m["stage"] = "synthesize";
    m["method"] = method;
    m["config_hash"] = cfg.hash();
    m["seed_index"] = seed_index;
    m["inputs"] = {{"gan", file_hash(g.gan_path)}};
    m["outputs"] = {{"synth", file_hash(path)}};
    write_manifest(path, m);
}

void stage_finetune(const RunConfig& cfg, const std::string& method, const std::string& cohort,
                    const ArtifactStore& store, std::uint64_t seed_index) {
    GanLoaded g = load_gan_chain(cfg, method, store, seed_index);
    const FeatureDump dump = load_feature_dump(store.features(), g.prep.hierarchy);

    Mat g_adapted = g.ctx.g;
    std::vector<std::string> finetuned;
    for (int code : cohort_codes(g.prep.hierarchy, cohort)) {
        const Mat pos = synthesize_features(
            g.gm, g.ctx, code, cfg.adapt.synth_count,
            derive_seed(cfg.seed, "finetune-synth", (seed_index << 20) + static_cast<std::uint64_t>(code)));
        auto nit = dump.negatives.find(code);
        if (nit == dump.negatives.end() || nit->second.empty())
            throw MissingPrerequisite("empty negative pool for code '" +
                                      g.prep.hierarchy.node(code).code +
                                      "'; re-run dump-features with a larger neg_pool");
        Mat neg(dump.dim, static_cast<Eigen::Index>(nit->second.size()));
        for (std::size_t i = 0; i < nit->second.size(); ++i)
            neg.col(static_cast<Eigen::Index>(i)) = nit->second[i].f;
        const FinetuneResult res = finetune_classifier(
            g.ctx.g.col(code), pos, neg, cfg.adapt,
            derive_seed(cfg.seed, "finetune", (seed_index << 20) + static_cast<std::uint64_t>(code)));
        g_adapted.col(code) = res.g;
        finetuned.push_back(g.prep.hierarchy.node(code).code);
    }

    Checkpoint ck;
    ck.tensors["g"] = g_adapted;
    ck.manifest["stage"] = "finetune";
    ck.manifest["method"] = method;
    ck.manifest["cohort"] = cohort;
    ck.manifest["config_hash"] = cfg.hash();
    ck.manifest["seed_index"] = seed_index;
    ck.manifest["finetuned_codes"] = finetuned;
    ck.manifest["extractor_hash"] = file_hash(store.extractor());
    ck.manifest["gan_hash"] = file_hash(g.gan_path);
    const std::string path = store.adapted(seed_tag(method, seed_index));
    ck.save(path);

    json m;
    m["stage"] = "finetune";
    m["method"] = method;
    m["cohort"] = cohort;
    m["config_hash"] = cfg.hash();
    m["seed_index"] = seed_index;
    m["inputs"] = {{"gan", file_hash(g.gan_path)},
                   {"features", file_hash(store.features())},
                   {"extractor", file_hash(store.extractor())}};
    m["outputs"] = {{"adapted", file_hash(path)}};
    write_manifest(path, m);
}

void stage_train_meta(const RunConfig& cfg, const ArtifactStore& store) {
    PreparedData prep = load_prepared(store.prepared());
    require_file(store.extractor(), "train-extractor");
    const Checkpoint eck = Checkpoint::load(store.extractor(), "train-extractor");
    check_config_hash(eck.manifest, cfg, "extractor checkpoint");
    const ExtractorModel model = extractor_from_checkpoint(eck, prep);
    const FeatureDump dump = load_feature_dump(store.features(), prep.hierarchy);

    const auto centroids = build_centroids(dump.positives);
    Rng rng(derive_seed(cfg.seed, "meta-init"));
    MetaHead head = init_meta_head(centroids, cfg.extractor.feat_dim, cfg.meta.hidden, rng);

    const auto nmat = neighbor_matrix(prep.hierarchy);
    const LabelState ls = compute_label_state(model, prep.hierarchy, nmat);
    const auto L = static_cast<Eigen::Index>(prep.hierarchy.size());
    std::vector<Mat> feats;
    std::vector<Vec> ys;
    for (const Document* d : prep.split_docs("valid")) {
        const DocForward fw = extractor_forward(model, ls, d->tokens, nullptr);
        feats.push_back(fw.f);
        Vec y = Vec::Zero(L);
        for (const auto& code : d->labels) y(prep.hierarchy.id(code)) = 1.0;
        ys.push_back(std::move(y));
    }
    const MetaTrainLog log = train_meta_head(head, feats, ys, ls.g, cfg.meta,
                                             derive_seed(cfg.seed, "meta-train"));

    Checkpoint ck;
    ParamSet ps = head.parameters();
    for (std::size_t i = 0; i < ps.names.size(); ++i) ck.tensors[ps.names[i]] = *ps.tensors[i];
    ck.tensors["centroids"] = head.centroids;
    ck.manifest["stage"] = "train-meta";
    ck.manifest["config_hash"] = cfg.hash();
    ck.manifest["centroid_codes"] = head.centroid_codes;
    ck.manifest["epoch_losses"] = log.epoch_losses;
    ck.manifest["extractor_hash"] = file_hash(store.extractor());
    ck.save(store.meta());

    json m;
    m["stage"] = "train-meta";
    m["config_hash"] = cfg.hash();
    m["inputs"] = {{"prepared", file_hash(store.prepared())},
                   {"extractor", file_hash(store.extractor())},
                   {"features", file_hash(store.features())}};
    m["outputs"] = {{"meta", file_hash(store.meta())}};
    write_manifest(store.meta(), m);
}

MetricsReport stage_evaluate(const RunConfig& cfg, const ArtifactStore& store,
                             const EvaluateOptions& opt) {
    PreparedData prep = load_prepared(store.prepared());
    require_file(store.extractor(), "train-extractor");
    const Checkpoint eck = Checkpoint::load(store.extractor(), "train-extractor");
    check_config_hash(eck.manifest, cfg, "extractor checkpoint");
    const ExtractorModel model = extractor_from_checkpoint(eck, prep);

    json meta_info;
    meta_info["split"] = opt.split;
    meta_info["config_hash"] = cfg.hash();
    meta_info["threshold"] = cfg.threshold;
    meta_info["extractor_hash"] = file_hash(store.extractor());

    Mat g_eval;
    if (!opt.adapted_method.empty()) {
        const std::string path = store.adapted(opt.adapted_method);
        if (!std::filesystem::exists(path))
            throw MissingPrerequisite("missing adapted checkpoint '" + path +
                                      "'; run the finetune stage first");
        const Checkpoint ack = Checkpoint::load(path, "finetune");
        check_config_hash(ack.manifest, cfg, "adapted checkpoint");
        const std::string recorded = ack.manifest.value("extractor_hash", "");
        if (!recorded.empty() && recorded != meta_info["extractor_hash"].get<std::string>())
            throw ConfigError("adapted checkpoint lineage mismatch: re-run finetune");
        g_eval = ack.tensor("g");
        meta_info["adapted"] = opt.adapted_method;
        meta_info["adapted_hash"] = file_hash(path);
    } else {
        const auto nmat = neighbor_matrix(prep.hierarchy);
        g_eval = compute_label_state(model, prep.hierarchy, nmat).g;
        meta_info["adapted"] = nullptr;
    }

    std::optional<MetaHead> meta_head;
    if (opt.use_meta) {
        if (!std::filesystem::exists(store.meta()))
            throw MissingPrerequisite("missing meta checkpoint '" + store.meta() +
                                      "'; run the train-meta stage first");
        const Checkpoint mck = Checkpoint::load(store.meta(), "train-meta");
        check_config_hash(mck.manifest, cfg, "meta checkpoint");
        MetaHead head;
        head.centroids = mck.tensor("centroids");
        head.centroid_codes = mck.manifest.at("centroid_codes").get<std::vector<int>>();
        head.o_w1 = mck.tensor("o_w1");
        head.o_b1 = mck.tensor("o_b1");
        head.o_w2 = mck.tensor("o_w2");
        head.o_b2 = mck.tensor("o_b2");
        head.e_w1 = mck.tensor("e_w1");
        head.e_b1 = mck.tensor("e_b1");
        head.e_w2 = mck.tensor("e_w2");
        head.e_b2 = mck.tensor("e_b2");
        meta_head = std::move(head);
        meta_info["meta"] = true;
    }

    const auto docs = prep.split_docs(opt.split);
    const Mat scores = score_split(model, prep, docs, g_eval, meta_head ? &*meta_head : nullptr);
    const Mat gold = gold_matrix(prep, docs);
    std::vector<int> code_ids(prep.hierarchy.size());
    for (std::size_t i = 0; i < code_ids.size(); ++i) code_ids[i] = static_cast<int>(i);

    MetricsReport report = evaluate_predictions(scores, gold, code_ids, prep.hierarchy,
                                                cfg.threshold, cfg.eval_min_examples);
    report.metadata = meta_info;

    const std::string tag = opt.tag.empty()
                                ? (opt.adapted_method.empty() ? opt.split : opt.split + "_" + opt.adapted_method)
                                : opt.tag;
    std::ofstream out(store.report(tag));
    out << report.to_json().dump(2) << '\n';
    return report;
}

nlohmann::json reproduce_table(const RunConfig& cfg, const SyntheticSpec& spec,
                               const std::string& method, int n_seeds, const ArtifactStore& store,
                               const std::string& cohort) {
    store.ensure_dir();
    const std::string data_dir = store.root + "/data";
    const std::string corpus_path = data_dir + "/corpus.jsonl";

    auto artifact_current = [&](const std::string& path) {
        if (!std::filesystem::exists(path) || !std::filesystem::exists(path + ".manifest.json"))
            return false;
        try {
            return read_manifest(path).value("config_hash", "") == cfg.hash();
        } catch (...) {
            return false;
        }
    };

    if (!artifact_current(corpus_path)) stage_gen_synthetic(cfg, spec, data_dir);
    if (!artifact_current(store.prepared()))
        stage_prepare(cfg, data_dir + "/hierarchy.tsv", corpus_path, data_dir + "/embeddings.txt", store);
    if (!artifact_current(store.extractor())) stage_train_extractor(cfg, store);
    if (!artifact_current(store.features())) stage_dump_features(cfg, store);

    EvaluateOptions base_opt;
    base_opt.split = "test";
    base_opt.tag = "baseline_test";
    const MetricsReport baseline = stage_evaluate(cfg, store, base_opt);

    std::vector<MetricsReport> reports;
    for (int k = 0; k < n_seeds; ++k) {
        const auto tag = seed_tag(method, static_cast<std::uint64_t>(k));
        if (!artifact_current(store.gan(tag)))
            stage_train_gan(cfg, method, store, static_cast<std::uint64_t>(k));
        if (!artifact_current(store.adapted(tag)))
            stage_finetune(cfg, method, cohort, store, static_cast<std::uint64_t>(k));
        EvaluateOptions opt;
        opt.split = "test";
        opt.adapted_method = tag;
        opt.tag = "test_" + tag;
        reports.push_back(stage_evaluate(cfg, store, opt));
    }

    json agg = aggregate_reports(reports);
    json out;
    out["method"] = method;
    out["cohort_finetuned"] = cohort;
    out["n_seeds"] = n_seeds;
    out["config_hash"] = cfg.hash();
    out["baseline"] = baseline.to_json();
    out["aggregate"] = agg;
    std::ofstream f(store.report("table_" + method));
    f << out.dump(2) << '\n';
    std::cout << "=== method " << method << " (finetuned cohort: " << cohort << ", " << n_seeds
              << " seeds) ===\n"
              << aggregate_table(agg) << std::flush;
    return out;
}

}  // namespace gzsl
