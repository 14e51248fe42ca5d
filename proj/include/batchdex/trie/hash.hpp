#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace batchdex {

using Digest = std::array<uint8_t, 32>;

// BLAKE2b-256 streaming hasher.
class Hasher {
  public:
    Hasher();
    void update(std::span<const uint8_t> bytes);
    void update_u8(uint8_t v) { update({&v, 1}); }
    void update_u16(uint16_t v);
    void update_u32(uint32_t v);
    void update_u64(uint64_t v);
    Digest finish();

  private:
    alignas(64) unsigned char state_[384];
};

Digest hash_bytes(std::span<const uint8_t> bytes);

} // namespace batchdex
