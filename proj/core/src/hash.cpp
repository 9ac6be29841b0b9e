#include "trajforge/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace trajforge {

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("EVP_Digest(sha256) failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0f]);
    }
    return out;
}

std::string trajectory_id_of(std::string_view source, std::string_view raw_bytes) {
    std::string preimage;
    preimage.reserve(source.size() + 1 + raw_bytes.size());
    preimage.append(source);
    preimage.push_back('\0');
    preimage.append(raw_bytes);
    return sha256_hex(preimage);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t seeded_id_hash(std::string_view id, std::uint64_t seed) {
    return splitmix64(fnv1a64(id) ^ seed);
}

}  // namespace trajforge
