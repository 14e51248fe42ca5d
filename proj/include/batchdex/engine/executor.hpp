#pragma once

#include <vector>

#include "batchdex/demand/supply_curve.hpp"
#include "batchdex/engine/filter.hpp"
#include "batchdex/engine/state.hpp"
#include "batchdex/lp/clearing_lp.hpp"

namespace batchdex {

// Everything phase 3 needs, and everything the block header commits to.
struct ClearingPlan {
    std::vector<Price> prices;
    std::vector<uint128_t> y; // per pair, price-scaled amounts
    std::vector<uint64_t> x;  // per pair, integer units (derived from y)
    ApproxParams params;
    bool used_lower_bounds = false;
    bool converged = false;

    // filled in by execution
    std::vector<OfferKey> marginal_keys;
    std::vector<uint64_t> marginal_sold;
    std::vector<uint8_t> any_executed;
};

// Per-asset integer accounting of one block's clearing, with the exact
// decomposition surplus = slack + rounding used by the conservation audit:
//   collected  units received from sellers (= sum of x over outgoing pairs)
//   ceiling    sum over incoming pairs of floor((1-eps) * x * rate)
//   paid       units actually paid out to buyers
//   surplus = (collected - ceiling) + (ceiling - paid); both parts >= 0,
//   and ceiling - paid <= executions + pair count (one floor each).
struct ExecutionReport {
    std::vector<uint128_t> collected;
    std::vector<uint128_t> ceiling;
    std::vector<uint128_t> paid;
    std::vector<uint64_t> exec_count_in;
    std::vector<uint64_t> pairs_in;

    void verify_conservation() const; // throws ConservationViolation
};

// Three-phase commutative block application. Phase 1 runs transactions in
// parallel (atomic balance updates, per-thread offer tries, staged
// metadata); the solver runs between phases; phase 3 executes the clearing
// and the commit applies deferred effects and recomputes commitments.
class BlockExecutor {
  public:
    BlockExecutor(BlockState& state, size_t threads);

    // Transactions must have passed filter_block (or the proposer-assisted
    // pre-audit); violations are programming errors here.
    void phase1(const std::vector<Transaction>& kept);

    // Proposer path: derive each pair's marginal key by walking the book.
    ExecutionReport phase3_propose(ClearingPlan& plan);

    // Validator path: replay from the header's marginal keys.
    ExecutionReport phase3_validate(const ClearingPlan& plan);

    // Deferred effects: refunds, staged account creates, sequence window
    // advance, fee burns, account trie refresh. Returns the state root.
    Digest commit(const ClearingPlan& plan, const ExecutionReport& report);

  private:
    ExecutionReport run_phase3(const ClearingPlan* header_plan, ClearingPlan& plan);

    struct ThreadLocalFx {
        std::vector<std::unique_ptr<EphemeralTrie>> offer_tries; // per pair
        std::vector<std::tuple<uint32_t, OfferKey, uint64_t>> new_offers;
        std::vector<std::pair<OfferId, uint64_t>> cancel_refunds; // with pair idx in loc
        std::vector<std::pair<OfferId, OfferLocation>> cancel_locs;
        std::vector<CreateAccountOp> staged_creates;
        std::vector<AccountId> dirty;
        std::vector<AccountId> seq_touched;
        std::vector<uint128_t> fees_burned; // per asset
    };

    void apply_tx(const Transaction& tx, ThreadLocalFx& fx);

    BlockState& state_;
    size_t threads_;
    std::vector<ThreadLocalFx> locals_;
    std::vector<std::vector<OfferId>> executed_offer_ids_; // per pair
};

} // namespace batchdex
