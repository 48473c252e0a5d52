#include "gzsl/common.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gzsl {

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed) {
    return fnv1a64(s.data(), s.size(), seed);
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingPrerequisite("cannot open file for hashing: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return hash_hex(h);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index) {
    std::uint64_t h = fnv1a64(&master, sizeof(master));
    h = fnv1a64(stage.data(), stage.size(), h);
    h = fnv1a64(&index, sizeof(index), h);
    return h;
}

}  // namespace gzsl
