#include "oracle/oracle.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace batchdex::oracle {

std::vector<Transaction> reference_filter(const std::vector<Transaction>& txs,
                                          const BlockState& state) {
    // straight-line reimplementation with ordered maps and two passes
    std::vector<Transaction> unique;
    for (const auto& tx : txs) {
        bool dup = false;
        for (const auto& prev : unique) {
            if (prev.account == tx.account && prev.seq == tx.seq && prev == tx) {
                dup = true;
                break;
            }
        }
        if (!dup) unique.push_back(tx);
    }

    auto valid = [&](const Transaction& tx) -> bool {
        if (tx.signature.size() > 512) return false;
        const AccountRecord* acct = state.find_account(tx.account);
        if (!acct || !acct->seqs.in_window(tx.seq)) return false;
        if (const auto* op = std::get_if<CreateOfferOp>(&tx.op)) {
            Offer o{op->sell, op->buy, op->endowment, op->limit_price, OfferId{tx.account, tx.seq}};
            return op->sell.id < state.n_assets() && op->buy.id < state.n_assets() && o.well_formed();
        }
        if (const auto* op = std::get_if<PaymentOp>(&tx.op))
            return op->asset.id < state.n_assets() && op->amount.units > 0 &&
                   state.find_account(op->dest) != nullptr;
        if (const auto* op = std::get_if<CancelOfferOp>(&tx.op))
            return op->target.account == tx.account && state.find_offer(op->target).has_value();
        return state.find_account(std::get<CreateAccountOp>(tx.op).new_id) == nullptr;
    };

    std::vector<Transaction> structural;
    for (const auto& tx : unique)
        if (valid(tx)) structural.push_back(tx);

    std::map<AccountId, std::map<uint16_t, uint128_t>> spend;
    std::map<AccountId, std::multiset<uint64_t>> seqs;
    std::map<AccountId, std::multiset<uint64_t>> cancels;
    std::map<AccountId, uint32_t> creates;

    for (const auto& tx : structural) {
        seqs[tx.account].insert(tx.seq);
        uint16_t fee_asset = 0;
        if (const auto* op = std::get_if<PaymentOp>(&tx.op)) {
            spend[tx.account][op->asset.id] += op->amount.units;
            fee_asset = op->asset.id;
        } else if (const auto* op = std::get_if<CreateOfferOp>(&tx.op)) {
            spend[tx.account][op->sell.id] += op->endowment.units;
            fee_asset = op->sell.id;
        } else if (const auto* op = std::get_if<CancelOfferOp>(&tx.op)) {
            cancels[tx.account].insert(op->target.seq);
            fee_asset = pair_from_index(state.n_assets(), state.find_offer(op->target)->pair_idx).sell.id;
        } else {
            creates[std::get<CreateAccountOp>(tx.op).new_id]++;
        }
        spend[tx.account][fee_asset] += tx.fee.units;
    }

    std::set<AccountId> banned;
    for (auto& [id, assets] : spend) {
        const AccountRecord* rec = state.find_account(id);
        for (auto& [asset, total] : assets)
            if (total > rec->available[asset].load()) banned.insert(id);
    }
    for (auto& [id, s] : seqs) {
        for (auto it = s.begin(); it != s.end(); ++it)
            if (s.count(*it) > 1) banned.insert(id);
    }
    for (auto& [id, c] : cancels) {
        for (auto it = c.begin(); it != c.end(); ++it)
            if (c.count(*it) > 1) banned.insert(id);
    }

    std::vector<Transaction> kept;
    for (const auto& tx : structural) {
        if (banned.contains(tx.account)) continue;
        if (const auto* op = std::get_if<CreateAccountOp>(&tx.op); op && creates[op->new_id] > 1)
            continue;
        kept.push_back(tx);
    }
    return kept;
}

Digest sequential_reference_apply(BlockState& state, const std::vector<Transaction>& kept,
                                  const ClearingPlan& plan) {
    const uint16_t n = state.n_assets();
    std::vector<AccountId> dirty;
    std::vector<std::pair<OfferId, OfferLocation>> cancelled;
    std::vector<CreateAccountOp> creates;
    std::vector<AccountId> seq_accounts;

    // phase 1, one transaction at a time, direct trie inserts
    for (const auto& tx : kept) {
        AccountRecord* acct = state.find_account(tx.account);
        if (!acct->seqs.reserve(tx.seq)) throw std::logic_error("reference: seq conflict");
        seq_accounts.push_back(tx.account);
        dirty.push_back(tx.account);

        if (const auto* op = std::get_if<PaymentOp>(&tx.op)) {
            acct->available[op->asset.id] -= op->amount.units + tx.fee.units;
            state.find_account(op->dest)->available[op->asset.id] += op->amount.units;
            state.add_burned(op->asset, tx.fee.units);
            dirty.push_back(op->dest);
        } else if (const auto* op = std::get_if<CreateOfferOp>(&tx.op)) {
            acct->available[op->sell.id] -= op->endowment.units + tx.fee.units;
            acct->locked[op->sell.id] += op->endowment.units;
            state.add_burned(op->sell, tx.fee.units);
            Offer offer = tx.to_offer();
            OfferKey key = offer_key(offer);
            uint32_t pair = pair_index(n, op->sell, op->buy);
            state.books().book(pair).insert(key, encode_endowment(op->endowment));
            state.index_offer(offer.owner, OfferLocation{pair, key});
        } else if (const auto* op = std::get_if<CancelOfferOp>(&tx.op)) {
            auto loc = state.find_offer(op->target);
            AssetId sell = pair_from_index(n, loc->pair_idx).sell;
            acct->available[sell.id] -= tx.fee.units;
            state.add_burned(sell, tx.fee.units);
            Amount refund = cancel_offer(state.books().book(loc->pair_idx), loc->key);
            // end-of-block refund, recorded here
            cancelled.emplace_back(op->target, *loc);
            acct->locked[sell.id] -= refund.units;
            acct->available[sell.id] += refund.units;
        } else {
            acct->available[0] -= tx.fee.units;
            state.add_burned(AssetId{0}, tx.fee.units);
            creates.push_back(std::get<CreateAccountOp>(tx.op));
        }
    }

    // phase 3, pair by pair in index order
    std::vector<uint128_t> collected(n, 0), paid(n, 0);
    for (uint32_t idx = 0; idx < state.books().pair_count(); idx++) {
        if (plan.x[idx] == 0) continue;
        PairId pair = pair_from_index(n, idx);
        Price rate = fp_div(plan.prices[pair.sell.id], plan.prices[pair.buy.id]);
        ClearPairResult res =
            clear_pair(state.books().book(idx), rate, Amount{plan.x[idx]}, plan.params);
        collected[pair.sell.id] += plan.x[idx];
        for (const Execution& e : res.executions) {
            AccountRecord* owner = state.find_account(e.owner.account);
            owner->locked[pair.sell.id] -= e.sold.units;
            owner->available[pair.buy.id] += e.paid.units;
            paid[pair.buy.id] += e.paid.units;
            dirty.push_back(e.owner.account);
            if (!e.partial) state.unindex_offer(e.owner);
        }
    }
    for (uint16_t a = 0; a < n; a++) {
        uint128_t surplus = collected[a] - paid[a];
        if (surplus > 0) state.add_burned(AssetId{a}, static_cast<uint64_t>(surplus));
    }

    for (auto& [id, loc] : cancelled) state.unindex_offer(id);
    for (const auto& op : creates) state.create_account(op.new_id, op.key);

    std::sort(seq_accounts.begin(), seq_accounts.end());
    seq_accounts.erase(std::unique(seq_accounts.begin(), seq_accounts.end()), seq_accounts.end());
    for (AccountId id : seq_accounts) state.find_account(id)->seqs.advance();

    std::sort(dirty.begin(), dirty.end());
    dirty.erase(std::unique(dirty.begin(), dirty.end()), dirty.end());
    state.commit_account_trie(dirty);
    state.set_height(state.height() + 1);
    return state.state_root();
}

} // namespace batchdex::oracle
