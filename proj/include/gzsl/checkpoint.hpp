#pragma once

#include <map>
#include <string>

#include "gzsl/common.hpp"

#include <json.hpp>

namespace gzsl {

// Single-file archive: every parameter tensor by hierarchical name plus a JSON
// manifest (config hash, input hashes, seed, epoch, stage-specific metadata).
struct Checkpoint {
    nlohmann::json manifest;
    std::map<std::string, Mat> tensors;  // ordered -> deterministic bytes

    const Mat& tensor(const std::string& name) const;
    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path, const std::string& expected_stage = "");
};

}  // namespace gzsl
