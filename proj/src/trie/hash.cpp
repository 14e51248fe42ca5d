#include "batchdex/trie/hash.hpp"

#include <sodium.h>
#include <cstring>
#include <stdexcept>

namespace batchdex {

static_assert(sizeof(crypto_generichash_state) <= 384);

Hasher::Hasher() {
    crypto_generichash_init(reinterpret_cast<crypto_generichash_state*>(state_), nullptr, 0, 32);
}

void Hasher::update(std::span<const uint8_t> bytes) {
    crypto_generichash_update(reinterpret_cast<crypto_generichash_state*>(state_), bytes.data(), bytes.size());
}

void Hasher::update_u16(uint16_t v) {
    uint8_t b[2] = {uint8_t(v >> 8), uint8_t(v)};
    update({b, 2});
}

void Hasher::update_u32(uint32_t v) {
    uint8_t b[4];
    for (int i = 0; i < 4; i++) b[i] = uint8_t(v >> (8 * (3 - i)));
    update({b, 4});
}

void Hasher::update_u64(uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; i++) b[i] = uint8_t(v >> (8 * (7 - i)));
    update({b, 8});
}

Digest Hasher::finish() {
    Digest d;
    crypto_generichash_final(reinterpret_cast<crypto_generichash_state*>(state_), d.data(), d.size());
    return d;
}

Digest hash_bytes(std::span<const uint8_t> bytes) {
    Hasher h;
    h.update(bytes);
    return h.finish();
}

} // namespace batchdex
