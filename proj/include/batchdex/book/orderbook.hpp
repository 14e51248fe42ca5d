#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "batchdex/core/types.hpp"
#include "batchdex/trie/merkle_trie.hpp"

namespace batchdex {

// Directed asset pairs (sell, buy) index a flat array of N*(N-1) books.
inline uint32_t pair_index(uint16_t n_assets, AssetId sell, AssetId buy) {
    uint32_t b = buy.id > sell.id ? buy.id - 1u : buy.id;
    return uint32_t(sell.id) * (n_assets - 1u) + b;
}

struct PairId {
    AssetId sell;
    AssetId buy;
};

inline PairId pair_from_index(uint16_t n_assets, uint32_t idx) {
    uint16_t sell = static_cast<uint16_t>(idx / (n_assets - 1u));
    uint16_t buy = static_cast<uint16_t>(idx % (n_assets - 1u));
    if (buy >= sell) buy++;
    return PairId{AssetId{sell}, AssetId{buy}};
}

inline std::vector<uint8_t> encode_endowment(Amount e) {
    std::vector<uint8_t> v(8);
    put_be64(v.data(), e.units);
    return v;
}

inline Amount decode_endowment(std::span<const uint8_t> v) {
    if (v.size() != 8) throw MalformedError("bad offer leaf value");
    return Amount{get_be64(v.data())};
}

// One completed or partial fill against the auctioneer.
struct Execution {
    OfferKey key;
    OfferId owner;
    Amount sold;
    Amount paid; // buy-asset units credited to the owner
    bool partial = false;
};

// floor(sold * rate * (1 - eps)): the one rounding point per execution,
// always in the auctioneer's favor.
inline Amount execution_payout(Amount sold, Price rate, ApproxParams params) {
    uint128_t v = checked_mul_u64(sold.units, rate.raw());
    v = params.skim(v);
    uint128_t b = v >> Price::kRadix;
    if (b > UINT64_MAX) throw OverflowError("payout overflow");
    return Amount{static_cast<uint64_t>(b)};
}

struct ClearPairResult {
    std::vector<Execution> executions;
    OfferKey marginal_key{};  // all-zero sentinel when nothing executed
    Amount marginal_sold{};   // amount sold by the offer at the marginal key
    bool any_executed = false;
};

// Walks the book in key order, fully executing offers until x is covered,
// with at most one partial fill for the residual. Executed keys are removed
// as a dense range; a partial fill shrinks the resting endowment in place.
ClearPairResult clear_pair(MerkleTrie& book, Price rate, Amount x, ApproxParams params);

// Validator fast path: replays a proposer's clearing from the header's
// marginal key without re-deriving it. Bit-identical to clear_pair.
// MarginalKeyMismatch if the implied total sold differs from x_expected.
ClearPairResult execute_from_marginal_key(MerkleTrie& book, const OfferKey& marginal_key,
                                          Amount marginal_sold, bool any_executed, Price rate,
                                          Amount x_expected, ApproxParams params);

// Delete-marks a resting offer; the refund (remaining endowment) is credited
// by the engine in the end-of-block commit phase.
Amount cancel_offer(MerkleTrie& book, const OfferKey& key);

// The per-pair orderbook tries. Offers selling A for B live in book (A, B),
// keyed by offer_key so the trie itself is the price sort.
class OrderbookSet {
  public:
    explicit OrderbookSet(uint16_t n_assets);

    uint16_t n_assets() const { return n_assets_; }
    uint32_t pair_count() const { return uint32_t(n_assets_) * (n_assets_ - 1u); }

    MerkleTrie& book(AssetId sell, AssetId buy) { return *books_[pair_index(n_assets_, sell, buy)]; }
    MerkleTrie& book(uint32_t pair_idx) { return *books_[pair_idx]; }
    const MerkleTrie& book(uint32_t pair_idx) const { return *books_[pair_idx]; }

    uint64_t total_open_offers() const;
    std::vector<Digest> root_hashes(); // per pair, compacting as needed

  private:
    uint16_t n_assets_;
    std::vector<std::unique_ptr<MerkleTrie>> books_;
};

} // namespace batchdex
