#include "batchdex/engine/filter.hpp"

#include <algorithm>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace batchdex {

const char* reject_reason_name(RejectReason r) {
    switch (r) {
    case RejectReason::None: return "none";
    case RejectReason::DuplicateTx: return "duplicate-tx";
    case RejectReason::BadSignature: return "bad-signature";
    case RejectReason::UnknownAccount: return "unknown-account";
    case RejectReason::UnknownDestination: return "unknown-destination";
    case RejectReason::MalformedOp: return "malformed-op";
    case RejectReason::SeqOutOfWindow: return "seq-out-of-window";
    case RejectReason::DuplicateSeq: return "duplicate-seq";
    case RejectReason::Overspend: return "overspend";
    case RejectReason::DoubleCancel: return "double-cancel";
    case RejectReason::CancelTargetMissing: return "cancel-target-missing";
    case RejectReason::DuplicateAccountCreate: return "duplicate-account-create";
    case RejectReason::AccountExists: return "account-exists";
    }
    return "unknown";
}

bool accept_all_signatures(const Transaction& tx) { return tx.signature.size() <= 512; }

namespace {

// Which asset the fee is charged in. Cancels pay in the cancelled offer's
// sell asset; account creation pays in asset 0.
AssetId fee_asset(const Transaction& tx, const BlockState& state) {
    if (const auto* op = std::get_if<PaymentOp>(&tx.op)) return op->asset;
    if (const auto* op = std::get_if<CreateOfferOp>(&tx.op)) return op->sell;
    if (const auto* op = std::get_if<CancelOfferOp>(&tx.op)) {
        auto loc = state.find_offer(op->target);
        if (loc) return pair_from_index(state.n_assets(), loc->pair_idx).sell;
        return AssetId{0};
    }
    return AssetId{0};
}

struct AccountAgg {
    std::vector<std::pair<uint16_t, uint128_t>> spend; // small flat map asset -> total
    std::vector<uint64_t> seqs;
    std::vector<OfferId> cancels;
    bool overspend = false;
    bool dup_seq = false;
    bool dup_cancel = false;

    void add_spend(uint16_t asset, uint128_t v) {
        for (auto& [a, t] : spend) {
            if (a == asset) {
                t += v;
                return;
            }
        }
        spend.emplace_back(asset, v);
    }
};

RejectReason structural_check(const Transaction& tx, const BlockState& state,
                              SignatureCheck sig_check) {
    if (!sig_check(tx)) return RejectReason::BadSignature;
    const AccountRecord* acct = state.find_account(tx.account);
    if (!acct) return RejectReason::UnknownAccount;
    if (!acct->seqs.in_window(tx.seq)) return RejectReason::SeqOutOfWindow;

    if (const auto* op = std::get_if<CreateOfferOp>(&tx.op)) {
        Offer o{op->sell, op->buy, op->endowment, op->limit_price, OfferId{tx.account, tx.seq}};
        if (op->sell.id >= state.n_assets() || op->buy.id >= state.n_assets() || !o.well_formed())
            return RejectReason::MalformedOp;
    } else if (const auto* op = std::get_if<PaymentOp>(&tx.op)) {
        if (op->asset.id >= state.n_assets() || op->amount.units == 0)
            return RejectReason::MalformedOp;
        if (!state.find_account(op->dest)) return RejectReason::UnknownDestination;
    } else if (const auto* op = std::get_if<CancelOfferOp>(&tx.op)) {
        if (op->target.account != tx.account) return RejectReason::MalformedOp;
        if (!state.find_offer(op->target)) return RejectReason::CancelTargetMissing;
    } else {
        const auto& create = std::get<CreateAccountOp>(tx.op);
        if (state.find_account(create.new_id)) return RejectReason::AccountExists;
    }
    return RejectReason::None;
}

} // namespace

FilterResult filter_block(const std::vector<Transaction>& txs, const BlockState& state,
                          size_t threads, SignatureCheck sig_check) {
    const size_t n = txs.size();
    std::vector<RejectReason> reasons(n, RejectReason::None);

    // pass 0: collapse byte-identical replays (a block is a set of txs);
    // distinct transactions sharing a sequence number stay for pass B
    {
        std::unordered_map<uint64_t, std::vector<size_t>> by_seq_key;
        by_seq_key.reserve(n);
        for (size_t i = 0; i < n; i++) {
            uint64_t k = txs[i].account * 0x9E3779B97F4A7C15ull ^ txs[i].seq;
            auto& bucket = by_seq_key[k];
            for (size_t j : bucket) {
                if (txs[j] == txs[i]) {
                    reasons[i] = RejectReason::DuplicateTx;
                    break;
                }
            }
            if (reasons[i] == RejectReason::None) bucket.push_back(i);
        }
    }

    // pass A: per-transaction structural checks, embarrassingly parallel
    auto structural_range = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; i++) {
            if (reasons[i] == RejectReason::None)
                reasons[i] = structural_check(txs[i], state, sig_check);
        }
    };
    if (threads > 1 && n > 4096) {
        std::vector<std::thread> pool;
        size_t chunk = (n + threads - 1) / threads;
        for (size_t t = 0; t < threads; t++) {
            size_t b = t * chunk, e = std::min(n, b + chunk);
            if (b >= e) break;
            pool.emplace_back(structural_range, b, e);
        }
        for (auto& t : pool) t.join();
    } else {
        structural_range(0, n);
    }

    // pass B: per-account aggregation over the structural survivors. The
    // per-thread maps merge commutatively, so thread count is invisible.
    auto aggregate_range = [&](size_t begin, size_t end,
                               std::unordered_map<AccountId, AccountAgg>& agg,
                               std::unordered_map<AccountId, uint32_t>& creates) {
        for (size_t i = begin; i < end; i++) {
            if (reasons[i] != RejectReason::None) continue;
            const Transaction& tx = txs[i];
            AccountAgg& a = agg[tx.account];
            a.seqs.push_back(tx.seq);
            a.add_spend(fee_asset(tx, state).id, tx.fee.units);
            if (const auto* op = std::get_if<PaymentOp>(&tx.op)) {
                a.add_spend(op->asset.id, op->amount.units);
            } else if (const auto* op = std::get_if<CreateOfferOp>(&tx.op)) {
                a.add_spend(op->sell.id, op->endowment.units);
            } else if (const auto* op = std::get_if<CancelOfferOp>(&tx.op)) {
                a.cancels.push_back(op->target);
            } else {
                creates[std::get<CreateAccountOp>(tx.op).new_id]++;
            }
        }
    };

    std::unordered_map<AccountId, AccountAgg> agg;
    std::unordered_map<AccountId, uint32_t> creates;
    if (threads > 1 && n > 4096) {
        size_t workers = threads;
        std::vector<std::unordered_map<AccountId, AccountAgg>> local_agg(workers);
        std::vector<std::unordered_map<AccountId, uint32_t>> local_creates(workers);
        std::vector<std::thread> pool;
        size_t chunk = (n + workers - 1) / workers;
        for (size_t t = 0; t < workers; t++) {
            size_t b = t * chunk, e = std::min(n, b + chunk);
            if (b >= e) break;
            pool.emplace_back(aggregate_range, b, e, std::ref(local_agg[t]), std::ref(local_creates[t]));
        }
        for (auto& t : pool) t.join();
        for (size_t t = 0; t < workers; t++) {
            for (auto& [id, a] : local_agg[t]) {
                AccountAgg& dst = agg[id];
                for (auto& [asset, v] : a.spend) dst.add_spend(asset, v);
                dst.seqs.insert(dst.seqs.end(), a.seqs.begin(), a.seqs.end());
                dst.cancels.insert(dst.cancels.end(), a.cancels.begin(), a.cancels.end());
            }
            for (auto& [id, c] : local_creates[t]) creates[id] += c;
        }
    } else {
        aggregate_range(0, n, agg, creates);
    }

    // evaluate per-account removal predicates
    for (auto& [id, a] : agg) {
        std::sort(a.seqs.begin(), a.seqs.end());
        a.dup_seq = std::adjacent_find(a.seqs.begin(), a.seqs.end()) != a.seqs.end();
        std::sort(a.cancels.begin(), a.cancels.end());
        a.dup_cancel = std::adjacent_find(a.cancels.begin(), a.cancels.end()) != a.cancels.end();
        const AccountRecord* rec = state.find_account(id);
        for (auto& [asset, total] : a.spend) {
            if (total > rec->available[asset].load(std::memory_order_relaxed)) {
                a.overspend = true;
                break;
            }
        }
    }

    FilterResult out;
    out.kept.reserve(n);
    for (size_t i = 0; i < n; i++) {
        RejectReason r = reasons[i];
        if (r == RejectReason::None) {
            const AccountAgg& a = agg[txs[i].account];
            if (a.overspend) r = RejectReason::Overspend;
            else if (a.dup_seq) r = RejectReason::DuplicateSeq;
            else if (a.dup_cancel) r = RejectReason::DoubleCancel;
            else if (const auto* op = std::get_if<CreateAccountOp>(&txs[i].op);
                     op && creates[op->new_id] > 1)
                r = RejectReason::DuplicateAccountCreate;
        }
        if (r == RejectReason::None) out.kept.push_back(txs[i]);
        else out.removed.emplace_back(i, r);
    }
    return out;
}

} // namespace batchdex
