#pragma once

#include <cstdint>
#include <variant>
#include <vector>
#include <span>
#include <array>

#include "batchdex/core/types.hpp"

namespace batchdex {

struct CreateAccountOp {
    AccountId new_id = 0;
    std::array<uint8_t, 32> key{};
    friend bool operator==(const CreateAccountOp&, const CreateAccountOp&) = default;
};

struct CreateOfferOp {
    AssetId sell;
    AssetId buy;
    Amount endowment;
    Price limit_price;
    friend bool operator==(const CreateOfferOp&, const CreateOfferOp&) = default;
};

struct CancelOfferOp {
    OfferId target;
    friend bool operator==(const CancelOfferOp&, const CancelOfferOp&) = default;
};

struct PaymentOp {
    AccountId dest = 0;
    AssetId asset;
    Amount amount;
    friend bool operator==(const PaymentOp&, const PaymentOp&) = default;
};

using TxOp = std::variant<CreateAccountOp, CreateOfferOp, CancelOfferOp, PaymentOp>;

// One operation per transaction; every parameter is self-contained so that
// transactions in the same block commute.
struct Transaction {
    AccountId account = 0;
    uint64_t seq = 0;
    Amount fee;
    TxOp op;
    std::vector<uint8_t> signature;

    bool is_offer() const { return std::holds_alternative<CreateOfferOp>(op); }

    // The offer created by this transaction; owner is (account, seq).
    Offer to_offer() const {
        const auto& c = std::get<CreateOfferOp>(op);
        return Offer{c.sell, c.buy, c.endowment, c.limit_price, OfferId{account, seq}};
    }

    friend bool operator==(const Transaction&, const Transaction&) = default;
};

// Canonical binary layout (all integers big-endian, fixed width):
//   account u64 | seq u64 | fee u64 | op_tag u8 | op_body | sig_len u16 | sig
// op_body by tag:
//   0 CreateAccount: new_id u64 | key[32]
//   1 CreateOffer:   sell u16 | buy u16 | endowment u64 | limit_price u64
//   2 CancelOffer:   target_account u64 | target_seq u64
//   3 Payment:       dest u64 | asset u16 | amount u64
// There is exactly one encoding per value; deserialize rejects any other.
std::vector<uint8_t> serialize_tx(const Transaction& tx);
Transaction deserialize_tx(std::span<const uint8_t> bytes); // throws MalformedError

// Length-prefixed batch framing: u32 count, then per record u32 len | tx.
std::vector<uint8_t> serialize_tx_batch(const std::vector<Transaction>& txs);
std::vector<Transaction> deserialize_tx_batch(std::span<const uint8_t> bytes);

} // namespace batchdex
