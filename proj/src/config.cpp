#include "gzsl/config.hpp"

#include <fstream>

namespace gzsl {

using nlohmann::json;

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["threshold"] = threshold;
    j["eval_min_examples"] = eval_min_examples;
    j["keywords_per_pair"] = keywords_per_pair;
    j["eval_seeds"] = eval_seeds;
    j["tokenizer"] = {{"min_token_len", tokenizer.min_token_len},
                      {"max_doc_tokens", tokenizer.max_doc_tokens}};
    j["split"] = {{"train", split.train}, {"valid", split.valid}, {"test", split.test}};
    j["extractor"] = {{"emb_dim", extractor.emb_dim},
                      {"conv_filters", extractor.conv_filters},
                      {"conv_width", extractor.conv_width},
                      {"feat_dim", extractor.feat_dim},
                      {"prop_depth", extractor.prop_depth},
                      {"dropout", extractor.dropout},
                      {"lr", extractor.lr},
                      {"batch", extractor.batch},
                      {"epochs", extractor.epochs},
                      {"use_ldam", extractor.use_ldam},
                      {"ldam_c", extractor.ldam_c}};
    j["gan"] = {{"noise_dim", gan.noise_dim},
                {"hidden", gan.hidden},
                {"enc_hidden", gan.enc_hidden},
                {"critic_steps", gan.critic_steps},
                {"batch", gan.batch},
                {"lr", gan.lr},
                {"epochs", gan.epochs},
                {"lambda_gp", gan.lambda_gp},
                {"beta_key", gan.beta_key},
                {"w_cls", gan.w_cls},
                {"w_cyc", gan.w_cyc},
                {"leaky_slope", gan.leaky_slope}};
    j["adapt"] = {{"synth_count", adapt.synth_count},
                  {"lr", adapt.lr},
                  {"batch", adapt.batch},
                  {"epochs", adapt.epochs},
                  {"neg_pool", adapt.neg_pool},
                  {"pos_weight", adapt.pos_weight},
                  {"early_stop_patience", adapt.early_stop_patience}};
    j["meta"] = {{"lr", meta.lr}, {"batch", meta.batch}, {"epochs", meta.epochs}, {"hidden", meta.hidden}};
    return j;
}

namespace {
template <typename T>
void get_if(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}
}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    try {
        get_if(j, "seed", c.seed);
        get_if(j, "threshold", c.threshold);
        get_if(j, "eval_min_examples", c.eval_min_examples);
        get_if(j, "keywords_per_pair", c.keywords_per_pair);
        get_if(j, "eval_seeds", c.eval_seeds);
        if (j.contains("tokenizer")) {
            get_if(j["tokenizer"], "min_token_len", c.tokenizer.min_token_len);
            get_if(j["tokenizer"], "max_doc_tokens", c.tokenizer.max_doc_tokens);
        }
        if (j.contains("split")) {
            get_if(j["split"], "train", c.split.train);
            get_if(j["split"], "valid", c.split.valid);
            get_if(j["split"], "test", c.split.test);
        }
        if (j.contains("extractor")) {
            const json& e = j["extractor"];
            get_if(e, "emb_dim", c.extractor.emb_dim);
            get_if(e, "conv_filters", c.extractor.conv_filters);
            get_if(e, "conv_width", c.extractor.conv_width);
            get_if(e, "feat_dim", c.extractor.feat_dim);
            get_if(e, "prop_depth", c.extractor.prop_depth);
            get_if(e, "dropout", c.extractor.dropout);
            get_if(e, "lr", c.extractor.lr);
            get_if(e, "batch", c.extractor.batch);
            get_if(e, "epochs", c.extractor.epochs);
            get_if(e, "use_ldam", c.extractor.use_ldam);
            get_if(e, "ldam_c", c.extractor.ldam_c);
        }
        if (j.contains("gan")) {
            const json& g = j["gan"];
            get_if(g, "noise_dim", c.gan.noise_dim);
            get_if(g, "hidden", c.gan.hidden);
            get_if(g, "enc_hidden", c.gan.enc_hidden);
            get_if(g, "critic_steps", c.gan.critic_steps);
            get_if(g, "batch", c.gan.batch);
            get_if(g, "lr", c.gan.lr);
            get_if(g, "epochs", c.gan.epochs);
            get_if(g, "lambda_gp", c.gan.lambda_gp);
            get_if(g, "beta_key", c.gan.beta_key);
            get_if(g, "w_cls", c.gan.w_cls);
            get_if(g, "w_cyc", c.gan.w_cyc);
            get_if(g, "leaky_slope", c.gan.leaky_slope);
        }
        if (j.contains("adapt")) {
            const json& a = j["adapt"];
            get_if(a, "synth_count", c.adapt.synth_count);
            get_if(a, "lr", c.adapt.lr);
            get_if(a, "batch", c.adapt.batch);
            get_if(a, "epochs", c.adapt.epochs);
            get_if(a, "neg_pool", c.adapt.neg_pool);
            get_if(a, "pos_weight", c.adapt.pos_weight);
            get_if(a, "early_stop_patience", c.adapt.early_stop_patience);
        }
        if (j.contains("meta")) {
            const json& m = j["meta"];
            get_if(m, "lr", c.meta.lr);
            get_if(m, "batch", c.meta.batch);
            get_if(m, "epochs", c.meta.epochs);
            get_if(m, "hidden", c.meta.hidden);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }
    return from_json(j);
}

void RunConfig::apply_overrides(const std::map<std::string, std::string>& kv) {
    if (kv.empty()) return;
    json j = to_json();
    for (const auto& [path, value] : kv) {
        json* node = &j;
        std::string rest = path;
        std::size_t dot;
        while ((dot = rest.find('.')) != std::string::npos) {
            const std::string head = rest.substr(0, dot);
            if (!node->contains(head)) throw ConfigError("unknown config key: " + path);
            node = &(*node)[head];
            rest = rest.substr(dot + 1);
        }
        if (!node->contains(rest)) throw ConfigError("unknown config key: " + path);
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const json::parse_error&) {
            parsed = value;  // plain string
        }
        (*node)[rest] = parsed;
    }
    *this = from_json(j);
}

std::string RunConfig::hash() const { return hash_hex(fnv1a64(to_json().dump())); }

}  // namespace gzsl
