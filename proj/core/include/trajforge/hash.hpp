#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace trajforge {

// Lowercase-hex SHA-256 digest of the given bytes.
std::string sha256_hex(std::string_view bytes);

// Stable dedup key for a raw record: sha256 over source || 0x00 || raw_bytes.
// The NUL separator keeps ("a","bc") and ("ab","c") from colliding.
std::string trajectory_id_of(std::string_view source, std::string_view raw_bytes);

// Seeded 64-bit hash used for train/eval split assignment. Normative for
// reproducibility: FNV-1a over the id bytes, xor with the seed, then one
// splitmix64 finalization round. Changing this breaks stored-split compat.
std::uint64_t seeded_id_hash(std::string_view id, std::uint64_t seed);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace trajforge
