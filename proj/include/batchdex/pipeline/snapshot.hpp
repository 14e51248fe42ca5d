#pragma once

#include <functional>
#include <memory>
#include <string>

#include "batchdex/engine/state.hpp"

namespace batchdex {

// Versioned canonical state container with a trailing BLAKE2b checksum.
// The account section precedes the orderbook section so a restore never sees
// books newer than balances. Files are written temp + fsync + rename.
class Snapshot {
  public:
    static std::vector<uint8_t> serialize(const BlockState& state);
    static std::unique_ptr<BlockState> restore(std::span<const uint8_t> bytes);

    // Deep copy through the canonical encoding.
    static std::unique_ptr<BlockState> clone(const BlockState& state);

    // fault hook: called with the byte count about to be written; throwing
    // simulates a crash mid-write (temp file left behind, no rename).
    using WriteFault = std::function<void(size_t bytes_written)>;
    static void write_file(const std::string& path, std::span<const uint8_t> bytes,
                           const WriteFault& fault = nullptr);
    static std::vector<uint8_t> read_file(const std::string& path); // verifies checksum
};

} // namespace batchdex
