#include "gzsl/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace gzsl {

namespace {
constexpr char kMagic[8] = {'G', 'Z', 'S', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("checkpoint: truncated file");
    return v;
}
}  // namespace

const Mat& Checkpoint::tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint: missing tensor '" + name + "'");
    return it->second;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    const std::string m = manifest.dump();
    write_pod(out, static_cast<std::uint64_t>(m.size()));
    out.write(m.data(), static_cast<std::streamsize>(m.size()));
    write_pod(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, static_cast<std::uint64_t>(t.rows()));
        write_pod(out, static_cast<std::uint64_t>(t.cols()));
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(sizeof(double) * t.size()));
    }
    if (!out) throw FormatError("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path, const std::string& expected_stage) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingPrerequisite("checkpoint not found: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion) throw FormatError("checkpoint: unsupported version");
    const auto mlen = read_pod<std::uint64_t>(in);
    std::string mstr(mlen, '\0');
    in.read(mstr.data(), static_cast<std::streamsize>(mlen));
    Checkpoint ck;
    ck.manifest = nlohmann::json::parse(mstr);
    const auto count = read_pod<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto nlen = read_pod<std::uint32_t>(in);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        const auto rows = read_pod<std::uint64_t>(in);
        const auto cols = read_pod<std::uint64_t>(in);
        Mat t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(sizeof(double) * rows * cols));
        if (!in) throw FormatError("checkpoint: truncated tensor data");
        ck.tensors.emplace(std::move(name), std::move(t));
    }
    if (!expected_stage.empty()) {
        const std::string stage = ck.manifest.value("stage", "");
        if (stage != expected_stage)
            throw MissingPrerequisite("expected a '" + expected_stage + "' checkpoint, got '" +
                                      stage + "' (" + path + "); run the " + expected_stage +
                                      " stage first");
    }
    return ck;
}

}  // namespace gzsl
