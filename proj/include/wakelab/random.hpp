#pragma once

#include <cstdint>
#include <string_view>

namespace wakelab {

/// Independent seed for a named sub-stream (env, agent-init, replay-sampling, ...) of a root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0) {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    for (char c : stream) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    std::uint64_t z = root ^ h ^ (index * 0x9E3779B97F4A7C15ull);
    // splitmix64 finaliser
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace wakelab
