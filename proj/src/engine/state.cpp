#include "batchdex/engine/state.hpp"

#include <algorithm>
#include <bit>

namespace batchdex {

BlockState::BlockState(AssetRegistry registry)
    : registry_(std::move(registry)), books_(registry_.count()), burned_(registry_.count()),
      issued_(registry_.count(), 0) {
    for (auto& b : burned_) b.store(0, std::memory_order_relaxed);
    last_prices_.assign(n_assets(), Price::one());
    last_volumes_.assign(n_assets(), 0);
}

AccountRecord* BlockState::find_account(AccountId id) {
    auto it = accounts_.find(id);
    return it == accounts_.end() ? nullptr : it->second.get();
}

const AccountRecord* BlockState::find_account(AccountId id) const {
    auto it = accounts_.find(id);
    return it == accounts_.end() ? nullptr : it->second.get();
}

AccountRecord& BlockState::create_account(AccountId id, const std::array<uint8_t, 32>& key) {
    auto [it, inserted] = accounts_.emplace(id, std::make_unique<AccountRecord>(n_assets()));
    if (!inserted) throw DuplicateKeyError("account already exists");
    it->second->pubkey = key;
    mark_dirty(id);
    return *it->second;
}

void BlockState::fund_account(AccountId id, AssetId asset, Amount amount) {
    AccountRecord* rec = find_account(id);
    if (!rec) throw NotFoundError("no such account");
    rec->available[asset.id].fetch_add(amount.units, std::memory_order_relaxed);
    issued_[asset.id] += amount.units;
    mark_dirty(id);
}

std::optional<OfferLocation> BlockState::find_offer(const OfferId& id) const {
    auto it = offer_index_.find(id);
    if (it == offer_index_.end()) return std::nullopt;
    return it->second;
}

void BlockState::index_offer(const OfferId& id, const OfferLocation& loc) {
    auto [it, inserted] = offer_index_.emplace(id, loc);
    if (!inserted) throw DuplicateKeyError("offer id already indexed");
}

void BlockState::unindex_offer(const OfferId& id) { offer_index_.erase(id); }

std::vector<uint8_t> BlockState::encode_account(const AccountRecord& rec) const {
    std::vector<uint8_t> v;
    v.reserve(32 + 8 + size_t(n_assets()) * 16);
    v.insert(v.end(), rec.pubkey.begin(), rec.pubkey.end());
    uint8_t buf[8];
    put_be64(buf, rec.seqs.last_committed);
    v.insert(v.end(), buf, buf + 8);
    for (uint16_t a = 0; a < n_assets(); a++) {
        put_be64(buf, rec.available[a].load(std::memory_order_relaxed));
        v.insert(v.end(), buf, buf + 8);
        put_be64(buf, rec.locked[a].load(std::memory_order_relaxed));
        v.insert(v.end(), buf, buf + 8);
    }
    return v;
}

void BlockState::mark_dirty(AccountId id) {
    const AccountRecord* rec = find_account(id);
    if (!rec) return;
    uint8_t key[8];
    put_be64(key, id);
    account_trie_.upsert({key, 8}, encode_account(*rec));
}

Digest BlockState::commit_account_trie(const std::vector<AccountId>& dirty) {
    for (AccountId id : dirty) mark_dirty(id);
    return account_trie_.root_hash();
}

Digest BlockState::state_root() {
    Hasher h;
    h.update(account_trie_.root_hash());
    for (const Digest& d : books_.root_hashes()) h.update(d);
    h.update_u64(height_);
    return h.finish();
}

uint128_t BlockState::total_available(AssetId asset) const {
    uint128_t total = 0;
    for (const auto& [id, rec] : accounts_)
        total += rec->available[asset.id].load(std::memory_order_relaxed);
    return total;
}

uint128_t BlockState::total_locked(AssetId asset) const {
    uint128_t total = 0;
    for (const auto& [id, rec] : accounts_)
        total += rec->locked[asset.id].load(std::memory_order_relaxed);
    return total;
}

void BlockState::account_ids(std::vector<AccountId>& out) const {
    out.clear();
    out.reserve(accounts_.size());
    for (const auto& [id, rec] : accounts_) out.push_back(id);
    std::sort(out.begin(), out.end());
}

} // namespace batchdex
