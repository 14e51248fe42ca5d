#include "batchdex/engine/executor.hpp"

#include <algorithm>
#include <cassert>
#include <thread>

namespace batchdex {

void ExecutionReport::verify_conservation() const {
    for (size_t a = 0; a < collected.size(); a++) {
        if (collected[a] < ceiling[a])
            throw ConservationViolation("collected below payout ceiling");
        if (ceiling[a] < paid[a])
            throw ConservationViolation("payout ceiling below actual payouts");
        // rounding part of the surplus is at most one unit per floor taken
        if (ceiling[a] - paid[a] > uint128_t(exec_count_in[a]) + pairs_in[a])
            throw ConservationViolation("rounding surplus exceeds execution count bound");
    }
}

BlockExecutor::BlockExecutor(BlockState& state, size_t threads)
    : state_(state), threads_(std::max<size_t>(1, threads)), locals_(threads_),
      executed_offer_ids_(state.books().pair_count()) {
    for (auto& fx : locals_) {
        fx.offer_tries.resize(state.books().pair_count());
        fx.fees_burned.assign(state.n_assets(), 0);
    }
}

void BlockExecutor::apply_tx(const Transaction& tx, ThreadLocalFx& fx) {
    AccountRecord* acct = state_.find_account(tx.account);
    assert(acct);
    bool reserved = acct->seqs.reserve(tx.seq);
    assert(reserved);
    (void)reserved;
    fx.seq_touched.push_back(tx.account);
    fx.dirty.push_back(tx.account);

    auto debit = [&](AccountRecord* rec, AssetId asset, uint64_t units) {
        rec->available[asset.id].fetch_sub(units, std::memory_order_relaxed);
    };

    if (const auto* op = std::get_if<PaymentOp>(&tx.op)) {
        debit(acct, op->asset, op->amount.units + tx.fee.units);
        AccountRecord* dest = state_.find_account(op->dest);
        assert(dest);
        dest->available[op->asset.id].fetch_add(op->amount.units, std::memory_order_relaxed);
        fx.fees_burned[op->asset.id] += tx.fee.units;
        fx.dirty.push_back(op->dest);
    } else if (const auto* op = std::get_if<CreateOfferOp>(&tx.op)) {
        debit(acct, op->sell, op->endowment.units + tx.fee.units);
        acct->locked[op->sell.id].fetch_add(op->endowment.units, std::memory_order_relaxed);
        fx.fees_burned[op->sell.id] += tx.fee.units;

        Offer offer = tx.to_offer();
        OfferKey key = offer_key(offer);
        uint32_t pair = pair_index(state_.n_assets(), op->sell, op->buy);
        if (!fx.offer_tries[pair])
            fx.offer_tries[pair] = std::make_unique<EphemeralTrie>(sizeof(OfferKey));
        fx.offer_tries[pair]->insert(key, encode_endowment(op->endowment));
        fx.new_offers.emplace_back(pair, key, op->endowment.units);
    } else if (const auto* op = std::get_if<CancelOfferOp>(&tx.op)) {
        auto loc = state_.find_offer(op->target);
        assert(loc);
        AssetId sell = pair_from_index(state_.n_assets(), loc->pair_idx).sell;
        debit(acct, sell, tx.fee.units);
        fx.fees_burned[sell.id] += tx.fee.units;
        Amount refund = cancel_offer(state_.books().book(loc->pair_idx), loc->key);
        fx.cancel_refunds.emplace_back(op->target, refund.units);
        fx.cancel_locs.emplace_back(op->target, *loc);
    } else {
        debit(acct, AssetId{0}, tx.fee.units);
        fx.fees_burned[0] += tx.fee.units;
        fx.staged_creates.push_back(std::get<CreateAccountOp>(tx.op));
    }
}

void BlockExecutor::phase1(const std::vector<Transaction>& kept) {
    const size_t n = kept.size();
    if (threads_ > 1 && n > 512) {
        std::vector<std::thread> pool;
        size_t chunk = (n + threads_ - 1) / threads_;
        for (size_t t = 0; t < threads_; t++) {
            size_t b = t * chunk, e = std::min(n, b + chunk);
            if (b >= e) break;
            pool.emplace_back([this, &kept, b, e, t]() {
                for (size_t i = b; i < e; i++) apply_tx(kept[i], locals_[t]);
            });
        }
        for (auto& t : pool) t.join();
    } else {
        for (const auto& tx : kept) apply_tx(tx, locals_[0]);
    }

    // barrier: merge per-thread offer tries into the books, pair by pair
    std::vector<const EphemeralTrie*> merge_set;
    for (uint32_t pair = 0; pair < state_.books().pair_count(); pair++) {
        merge_set.clear();
        for (auto& fx : locals_) {
            if (fx.offer_tries[pair] && !fx.offer_tries[pair]->empty())
                merge_set.push_back(fx.offer_tries[pair].get());
        }
        if (!merge_set.empty()) state_.books().book(pair).batch_merge(merge_set);
    }
    for (auto& fx : locals_) {
        for (auto& [pair, key, endow] : fx.new_offers)
            state_.index_offer(offer_id_from_key(key), OfferLocation{pair, key});
    }
}

ExecutionReport BlockExecutor::run_phase3(const ClearingPlan* header_plan, ClearingPlan& plan) {
    const uint16_t n = state_.n_assets();
    const uint32_t pairs = state_.books().pair_count();
    plan.marginal_keys.assign(pairs, OfferKey{});
    plan.marginal_sold.assign(pairs, 0);
    plan.any_executed.assign(pairs, 0);

    struct PairStats {
        uint64_t paid_total = 0;
        uint32_t exec_count = 0;
    };
    std::vector<PairStats> stats(pairs);
    std::vector<std::vector<AccountId>> pair_dirty(pairs);

    auto run_pair = [&](uint32_t idx) {
        if (plan.x[idx] == 0 && !(header_plan && header_plan->any_executed[idx])) return;
        PairId pair = pair_from_index(n, idx);
        Price rate = fp_div(plan.prices[pair.sell.id], plan.prices[pair.buy.id]);
        MerkleTrie& book = state_.books().book(idx);
        ClearPairResult res;
        if (header_plan) {
            res = execute_from_marginal_key(book, header_plan->marginal_keys[idx],
                                            Amount{header_plan->marginal_sold[idx]},
                                            header_plan->any_executed[idx] != 0, rate,
                                            Amount{plan.x[idx]}, plan.params);
        } else {
            res = clear_pair(book, rate, Amount{plan.x[idx]}, plan.params);
        }
        plan.marginal_keys[idx] = res.marginal_key;
        plan.marginal_sold[idx] = res.marginal_sold.units;
        plan.any_executed[idx] = res.any_executed ? 1 : 0;

        for (const Execution& e : res.executions) {
            AccountRecord* owner = state_.find_account(e.owner.account);
            assert(owner);
            owner->locked[pair.sell.id].fetch_sub(e.sold.units, std::memory_order_relaxed);
            owner->available[pair.buy.id].fetch_add(e.paid.units, std::memory_order_relaxed);
            stats[idx].paid_total += e.paid.units;
            stats[idx].exec_count++;
            pair_dirty[idx].push_back(e.owner.account);
            if (!e.partial) executed_offer_ids_[idx].push_back(e.owner);
        }
    };

    if (threads_ > 1 && pairs > 4) {
        std::atomic<uint32_t> next{0};
        auto worker = [&]() {
            while (true) {
                uint32_t idx = next.fetch_add(1, std::memory_order_relaxed);
                if (idx >= pairs) return;
                run_pair(idx);
            }
        };
        std::vector<std::thread> pool;
        for (size_t t = 1; t < threads_; t++) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
    } else {
        for (uint32_t idx = 0; idx < pairs; idx++) run_pair(idx);
    }

    // deterministic reduction into the per-asset report
    ExecutionReport report;
    report.collected.assign(n, 0);
    report.ceiling.assign(n, 0);
    report.paid.assign(n, 0);
    report.exec_count_in.assign(n, 0);
    report.pairs_in.assign(n, 0);
    for (uint32_t idx = 0; idx < pairs; idx++) {
        PairId pair = pair_from_index(n, idx);
        uint64_t x = plan.x[idx];
        if (x == 0 && stats[idx].exec_count == 0) continue;
        Price rate = fp_div(plan.prices[pair.sell.id], plan.prices[pair.buy.id]);
        report.collected[pair.sell.id] += x;
        report.ceiling[pair.buy.id] += pair_payout_ceiling(x, rate, plan.params);
        report.paid[pair.buy.id] += stats[idx].paid_total;
        report.exec_count_in[pair.buy.id] += stats[idx].exec_count;
        report.pairs_in[pair.buy.id] += 1;
        for (AccountId id : pair_dirty[idx]) locals_[0].dirty.push_back(id);
    }
    return report;
}

ExecutionReport BlockExecutor::phase3_propose(ClearingPlan& plan) {
    return run_phase3(nullptr, plan);
}

ExecutionReport BlockExecutor::phase3_validate(const ClearingPlan& plan) {
    ClearingPlan replay = plan;
    return run_phase3(&plan, replay);
}

Digest BlockExecutor::commit(const ClearingPlan& plan, const ExecutionReport& report) {
    const uint16_t n = state_.n_assets();

    // executed offers leave the index; refunds and metadata land now
    for (auto& ids : executed_offer_ids_) {
        for (const OfferId& id : ids) state_.unindex_offer(id);
    }
    for (auto& fx : locals_) {
        for (size_t i = 0; i < fx.cancel_refunds.size(); i++) {
            const auto& [id, refund] = fx.cancel_refunds[i];
            state_.unindex_offer(id);
            AccountRecord* owner = state_.find_account(id.account);
            assert(owner);
            AssetId sell = pair_from_index(n, fx.cancel_locs[i].second.pair_idx).sell;
            owner->locked[sell.id].fetch_sub(refund, std::memory_order_relaxed);
            owner->available[sell.id].fetch_add(refund, std::memory_order_relaxed);
            fx.dirty.push_back(id.account);
        }
        for (const auto& op : fx.staged_creates) {
            state_.create_account(op.new_id, op.key);
        }
        for (uint16_t a = 0; a < n; a++) {
            uint128_t f = fx.fees_burned[a];
            if (f > UINT64_MAX) throw OverflowError("fee burn overflow");
            if (f > 0) state_.add_burned(AssetId{a}, static_cast<uint64_t>(f));
        }
    }

    // auctioneer surplus is burned
    for (uint16_t a = 0; a < n; a++) {
        uint128_t surplus = report.collected[a] - report.paid[a];
        if (surplus > UINT64_MAX) throw OverflowError("surplus overflow");
        if (surplus > 0) state_.add_burned(AssetId{a}, static_cast<uint64_t>(surplus));
    }

    // advance sequence windows once per touched account
    std::vector<AccountId> seq_accounts;
    std::vector<AccountId> dirty;
    for (auto& fx : locals_) {
        seq_accounts.insert(seq_accounts.end(), fx.seq_touched.begin(), fx.seq_touched.end());
        dirty.insert(dirty.end(), fx.dirty.begin(), fx.dirty.end());
        for (const auto& op : fx.staged_creates) dirty.push_back(op.new_id);
    }
    std::sort(seq_accounts.begin(), seq_accounts.end());
    seq_accounts.erase(std::unique(seq_accounts.begin(), seq_accounts.end()), seq_accounts.end());
    for (AccountId id : seq_accounts) state_.find_account(id)->seqs.advance();

    std::sort(dirty.begin(), dirty.end());
    dirty.erase(std::unique(dirty.begin(), dirty.end()), dirty.end());
    state_.commit_account_trie(dirty);

    state_.set_height(state_.height() + 1);
    state_.last_prices() = plan.prices;
    // prior-block volume estimate: value collected per asset
    for (uint16_t a = 0; a < n; a++) {
        uint256_t v = mul_u128(report.collected[a], plan.prices[a].raw());
        state_.last_volumes()[a] = v.hi ? ~uint128_t(0) : v.lo;
    }
    return state_.state_root();
}

} // namespace batchdex
