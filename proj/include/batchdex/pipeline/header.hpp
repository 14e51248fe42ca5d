#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "batchdex/core/tx.hpp"
#include "batchdex/engine/executor.hpp"
#include "batchdex/trie/hash.hpp"

namespace batchdex {

// Commits to everything a validator needs to replay the block without
// re-running the solver: prices, price-scaled trade amounts, and per-pair
// marginal keys.
struct BlockHeader {
    uint64_t height = 0;
    Digest prev_hash{};
    Digest state_root{};
    Digest tx_set_hash{};
    std::vector<Digest> orderbook_roots;

    std::vector<Price> prices;
    std::vector<uint128_t> y;
    uint8_t eps_exp = 0;
    uint8_t mu_exp = 10;
    bool used_lower_bounds = false;
    bool converged = false;
    std::vector<OfferKey> marginal_keys;
    std::vector<uint64_t> marginal_sold;
    std::vector<uint8_t> any_executed;

    Digest hash() const;
    std::vector<uint8_t> serialize() const;
    static BlockHeader deserialize(std::span<const uint8_t> bytes);

    friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

struct Block {
    std::vector<Transaction> txs; // the proposed batch, pre-filter
    BlockHeader header;

    std::vector<uint8_t> serialize() const;
    static Block deserialize(std::span<const uint8_t> bytes);
};

Digest tx_set_hash(const std::vector<Transaction>& txs);

} // namespace batchdex
