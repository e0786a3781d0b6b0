// Deterministic stream derivation. Every consumer of randomness gets its own
// engine, seeded as stream_id = hash(master seed, purpose tag [, indices]).
// The mixer is splitmix64, a counter-based generator, so streams for distinct
// purposes or indices never alias.
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace uedhvac::rng {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// FNV-1a over the tag bytes. Tags are short literals like "ou-var" or
// "rollout"; collisions across the tag set would merge streams, so tags are
// kept distinct by convention and the hash is 64-bit.
inline constexpr std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char ch : tag) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ull;
    }
    return h;
}

inline constexpr std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
    return splitmix64(seed ^ hash_tag(tag));
}

inline constexpr std::uint64_t derive(std::uint64_t seed, std::string_view tag, std::uint64_t a) {
    return splitmix64(derive(seed, tag) ^ splitmix64(a));
}

inline constexpr std::uint64_t derive(std::uint64_t seed, std::string_view tag, std::uint64_t a,
                                      std::uint64_t b) {
    return splitmix64(derive(seed, tag, a) ^ splitmix64(b ^ 0x6a09e667f3bcc909ull));
}

inline std::mt19937_64 engine(std::uint64_t stream_id) {
    return std::mt19937_64{stream_id};
}

}  // namespace uedhvac::rng
