#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "consub/types.hpp"

namespace consub {

/// FNV-1a over raw bytes; used for run provenance, not security.
inline std::uint64_t fnv1a(const void* data, std::size_t size,
                           std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a(double value, std::uint64_t seed) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &value, sizeof(bits));
    return fnv1a(&bits, sizeof(bits), seed);
}

inline std::uint64_t fnv1a(const Vec& v, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (Index i = 0; i < v.size(); ++i) h = fnv1a(v[i], h);
    return h;
}

inline std::string hex_digest(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace consub
