#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "batchdex/book/orderbook.hpp"
#include "batchdex/core/asset_registry.hpp"
#include "batchdex/core/tx.hpp"
#include "batchdex/trie/merkle_trie.hpp"

namespace batchdex {

// Gap-tolerant replay prevention: a block may consume sequence numbers in
// (last_committed, last_committed + 64], each at most once, claimed with an
// atomic bit-set.
struct SequenceBitmap {
    uint64_t last_committed = 0;
    std::atomic<uint64_t> window{0};

    static constexpr uint64_t kWindow = 64;

    bool in_window(uint64_t seq) const {
        return seq > last_committed && seq - last_committed <= kWindow;
    }

    // atomic test-and-set; false if out of window or already consumed
    bool reserve(uint64_t seq) {
        if (!in_window(seq)) return false;
        uint64_t bit = uint64_t(1) << (seq - last_committed - 1);
        uint64_t prev = window.fetch_or(bit, std::memory_order_acq_rel);
        return (prev & bit) == 0;
    }

    // end-of-block: the highest consumed offset becomes the new base
    void advance() {
        uint64_t w = window.load(std::memory_order_relaxed);
        if (w != 0) last_committed += 64 - static_cast<uint64_t>(std::countl_zero(w));
        window.store(0, std::memory_order_relaxed);
    }
};

struct AccountRecord {
    std::array<uint8_t, 32> pubkey{};
    std::unique_ptr<std::atomic<uint64_t>[]> available;
    std::unique_ptr<std::atomic<uint64_t>[]> locked;
    SequenceBitmap seqs;

    explicit AccountRecord(uint16_t n_assets)
        : available(new std::atomic<uint64_t>[n_assets]), locked(new std::atomic<uint64_t>[n_assets]) {
        for (uint16_t i = 0; i < n_assets; i++) {
            available[i].store(0, std::memory_order_relaxed);
            locked[i].store(0, std::memory_order_relaxed);
        }
    }
};

struct OfferLocation {
    uint32_t pair_idx = 0;
    OfferKey key{};
};

struct OfferIdHash {
    size_t operator()(const OfferId& id) const {
        uint64_t h = id.account * 0x9E3779B97F4A7C15ull;
        h ^= id.seq + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        return static_cast<size_t>(h);
    }
};

// The replicated exchange state: balances, per-pair books, sequence windows,
// and the hashable commitments over them.
class BlockState {
  public:
    explicit BlockState(AssetRegistry registry);

    const AssetRegistry& registry() const { return registry_; }
    uint16_t n_assets() const { return registry_.count(); }
    uint64_t height() const { return height_; }
    void set_height(uint64_t h) { height_ = h; }

    AccountRecord* find_account(AccountId id);
    const AccountRecord* find_account(AccountId id) const;
    size_t account_count() const { return accounts_.size(); }

    // Genesis/metadata-commit account creation; marks the account dirty.
    AccountRecord& create_account(AccountId id, const std::array<uint8_t, 32>& key);
    void fund_account(AccountId id, AssetId asset, Amount amount); // genesis issuance

    OrderbookSet& books() { return books_; }
    const OrderbookSet& books() const { return books_; }

    std::optional<OfferLocation> find_offer(const OfferId& id) const;
    void index_offer(const OfferId& id, const OfferLocation& loc);
    void unindex_offer(const OfferId& id);
    size_t open_offer_count() const { return offer_index_.size(); }

    void add_burned(AssetId asset, uint64_t amount) {
        burned_[asset.id].fetch_add(amount, std::memory_order_relaxed);
    }
    uint64_t burned(AssetId asset) const { return burned_[asset.id].load(std::memory_order_relaxed); }

    void mark_dirty(AccountId id); // single-threaded bookkeeping path
    // Refresh trie leaves for dirty accounts and recompute commitments.
    Digest commit_account_trie(const std::vector<AccountId>& dirty);
    Digest state_root(); // hash over account root, book roots, height

    std::vector<Price>& last_prices() { return last_prices_; }
    const std::vector<Price>& last_prices() const { return last_prices_; }
    std::vector<uint128_t>& last_volumes() { return last_volumes_; }
    const std::vector<uint128_t>& last_volumes() const { return last_volumes_; }

    // Per-asset issued supply must equal available + locked + burned.
    uint128_t total_available(AssetId asset) const;
    uint128_t total_locked(AssetId asset) const;
    uint128_t issued(AssetId asset) const { return issued_[asset.id]; }
    void account_ids(std::vector<AccountId>& out) const;

    std::vector<uint8_t> encode_account(const AccountRecord& rec) const;

  private:
    AssetRegistry registry_;
    std::unordered_map<AccountId, std::unique_ptr<AccountRecord>> accounts_;
    OrderbookSet books_;
    std::unordered_map<OfferId, OfferLocation, OfferIdHash> offer_index_;
    MerkleTrie account_trie_{8};
    std::vector<std::atomic<uint64_t>> burned_;
    std::vector<uint128_t> issued_;
    uint64_t height_ = 0;
    std::vector<Price> last_prices_;
    std::vector<uint128_t> last_volumes_;

    friend class Snapshot;
};

} // namespace batchdex
