#pragma once

#include <cstdint>
#include <array>
#include <compare>
#include <cstring>
#include <limits>

#include "batchdex/core/errors.hpp"
#include "batchdex/core/price.hpp"

namespace batchdex {

using AccountId = uint64_t;

// Index into the asset registry fixed at genesis.
struct AssetId {
    uint16_t id = 0;
    friend auto operator<=>(const AssetId&, const AssetId&) = default;
};

// Count of an asset's minimum unit. Arithmetic never wraps silently.
struct Amount {
    uint64_t units = 0;

    Amount checked_add(Amount o) const {
        if (units > std::numeric_limits<uint64_t>::max() - o.units)
            throw OverflowError("amount add overflow");
        return {units + o.units};
    }
    Amount checked_sub(Amount o) const {
        if (o.units > units) throw OverflowError("amount underflow");
        return {units - o.units};
    }
    friend auto operator<=>(const Amount&, const Amount&) = default;
};

// Offers are identified by creating account and per-account sequence number.
struct OfferId {
    AccountId account = 0;
    uint64_t seq = 0;
    friend auto operator<=>(const OfferId&, const OfferId&) = default;
};

// Limit sell order: sell up to `endowment` units of `sell` for `buy`,
// at no less than `limit_price` buy-units per sell-unit.
struct Offer {
    AssetId sell;
    AssetId buy;
    Amount endowment;
    Price limit_price;
    OfferId owner;

    bool well_formed() const {
        return sell != buy && endowment.units > 0 && limit_price.key_exact();
    }
};

// 22-byte orderbook trie key: big-endian truncated price, account, seq.
// Lexicographic key order == (limit_price, account, seq) order.
using OfferKey = std::array<uint8_t, 22>;

inline void put_be64(uint8_t* p, uint64_t v) {
    for (int i = 7; i >= 0; i--) { p[i] = static_cast<uint8_t>(v); v >>= 8; }
}
inline uint64_t get_be64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v = (v << 8) | p[i];
    return v;
}

inline OfferKey offer_key(const Offer& o) {
    uint64_t shifted = o.limit_price.raw() >> (Price::kRadix - Price::kKeyRadix);
    if (!o.limit_price.key_exact() || shifted >= (uint64_t(1) << 48))
        throw PriceOutOfKeyRange("limit price not representable in 48-bit key prefix");
    OfferKey k;
    for (int i = 5; i >= 0; i--) { k[i] = static_cast<uint8_t>(shifted); shifted >>= 8; }
    put_be64(k.data() + 6, o.owner.account);
    put_be64(k.data() + 14, o.owner.seq);
    return k;
}

inline Price price_from_key(const OfferKey& k) {
    uint64_t v = 0;
    for (int i = 0; i < 6; i++) v = (v << 8) | k[i];
    return Price::from_raw(v << (Price::kRadix - Price::kKeyRadix));
}

inline OfferId offer_id_from_key(const OfferKey& k) {
    return OfferId{get_be64(k.data() + 6), get_be64(k.data() + 14)};
}

// Commission and execution-slack fractions, both powers of two. eps_exp == 0
// encodes a zero commission (2^0 = 1 is not a valid commission anyway).
struct ApproxParams {
    uint8_t eps_exp = 15; // epsilon = 2^-15 unless 0
    uint8_t mu_exp = 10;  // mu = 2^-10

    bool valid() const { return mu_exp >= 1 && mu_exp < 64 && eps_exp < 64; }
    bool zero_commission() const { return eps_exp == 0; }

    // v - floor(v * epsilon): the post-commission payout numerator.
    uint128_t skim(uint128_t v) const {
        return eps_exp == 0 ? v : v - (v >> eps_exp);
    }
    // rate - floor(rate * mu): the mandatory-execution price boundary.
    Price mandatory_boundary(Price rate) const {
        return Price::from_raw(rate.raw() - (rate.raw() >> mu_exp));
    }
};

} // namespace batchdex
