#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "gzsl/adaptation.hpp"
#include "gzsl/common.hpp"
#include "gzsl/corpus.hpp"
#include "gzsl/extractor.hpp"
#include "gzsl/generation.hpp"

namespace gzsl {

// Every default is a published training detail of the method this implements;
// see README for the table.  Precedence: CLI overrides > config file > defaults.
struct RunConfig {
    std::uint64_t seed = 1234;
    double threshold = 0.5;       // decision threshold on sigmoid scores
    long eval_min_examples = 5;   // evaluate codes with strictly more split examples
    int keywords_per_pair = 10;   // k keywords per (doc, label)
    int eval_seeds = 10;
    TokenizerOptions tokenizer;
    SplitSpec split;
    ExtractorConfig extractor;
    GanConfig gan;
    AdaptConfig adapt;
    MetaConfig meta;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);  // defaults overlaid with file
    // dotted-path overrides, e.g. {"extractor.epochs", "3"}
    void apply_overrides(const std::map<std::string, std::string>& kv);
    std::string hash() const;
};

}  // namespace gzsl
