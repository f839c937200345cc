#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

namespace vgot {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// FNV-1a over `bytes`, keyed by `seed`, then mixed.
constexpr std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed = 0) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull ^ mix64(seed);
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return mix64(h);
}

/// Domain-separated child seed. Every random stream in a run is derived from
/// the root seed through this function, so one integer reproduces everything.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view domain,
                                 std::initializer_list<std::int64_t> parts = {}) noexcept {
    std::uint64_t h = hash_bytes(domain, root);
    for (auto p : parts) {
        h = mix64(h ^ mix64(static_cast<std::uint64_t>(p)));
    }
    return h;
}

/// Standard normal variates from a seeded mt19937_64.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    double next() { return dist_(engine_); }

    void fill(std::span<double> out) {
        for (auto& v : out) v = dist_(engine_);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

} // namespace vgot
