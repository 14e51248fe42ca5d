#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "batchdex/core/tx.hpp"
#include "batchdex/engine/state.hpp"

namespace batchdex {

enum class RejectReason : uint8_t {
    None = 0,
    DuplicateTx, // byte-identical replay within the batch; one copy survives
    BadSignature,
    UnknownAccount,
    UnknownDestination,
    MalformedOp,
    SeqOutOfWindow,
    DuplicateSeq,
    Overspend,
    DoubleCancel,
    CancelTargetMissing,
    DuplicateAccountCreate,
    AccountExists,
};

const char* reject_reason_name(RejectReason r);

struct FilterResult {
    std::vector<Transaction> kept;                     // input order
    std::vector<std::pair<size_t, RejectReason>> removed; // index into input
};

// Pluggable signature hook; the default accepts anything of plausible length.
using SignatureCheck = bool (*)(const Transaction&);
bool accept_all_signatures(const Transaction& tx);

// Deterministic commutativity-conflict removal in one parallelizable pass:
// structurally invalid transactions drop individually, then any account that
// over-spends, reuses a sequence number, or cancels an offer twice loses all
// of its transactions, and duplicate creations of one account id remove both.
// Output depends only on the transaction set, never on order or threads.
FilterResult filter_block(const std::vector<Transaction>& txs, const BlockState& state,
                          size_t threads, SignatureCheck sig_check = accept_all_signatures);

} // namespace batchdex
