#pragma once

#include <cstdint>
#include <compare>

#include "batchdex/core/errors.hpp"

namespace batchdex {

using int128_t = __int128;
using uint128_t = unsigned __int128;

inline uint128_t checked_add_u128(uint128_t a, uint128_t b) {
    uint128_t r = a + b;
    if (r < a) throw OverflowError("u128 add overflow");
    return r;
}

inline uint128_t checked_mul_u64(uint64_t a, uint64_t b) {
    return static_cast<uint128_t>(a) * b;
}

// 256-bit unsigned accumulator, enough for sums of squared 128-bit demand
// values. Only the operations the solver heuristic needs.
struct uint256_t {
    uint128_t lo = 0;
    uint128_t hi = 0;

    void add(uint256_t o) {
        uint128_t nl = lo + o.lo;
        hi += o.hi + (nl < lo ? 1 : 0);
        lo = nl;
    }

    friend auto operator<=>(const uint256_t& a, const uint256_t& b) {
        if (auto c = a.hi <=> b.hi; c != 0) return c;
        return a.lo <=> b.lo;
    }
    friend bool operator==(const uint256_t&, const uint256_t&) = default;
};

// Full 128x128 -> 256 product via 64-bit limbs.
inline uint256_t mul_u128(uint128_t a, uint128_t b) {
    uint64_t a0 = static_cast<uint64_t>(a), a1 = static_cast<uint64_t>(a >> 64);
    uint64_t b0 = static_cast<uint64_t>(b), b1 = static_cast<uint64_t>(b >> 64);
    uint128_t p00 = checked_mul_u64(a0, b0);
    uint128_t p01 = checked_mul_u64(a0, b1);
    uint128_t p10 = checked_mul_u64(a1, b0);
    uint128_t p11 = checked_mul_u64(a1, b1);

    uint256_t r;
    r.lo = p00;
    r.hi = p11;
    // add middle terms shifted by 64
    uint128_t mid = p01;
    uint128_t carry = 0;
    {
        uint128_t m2 = mid + p10;
        if (m2 < mid) carry = 1;
        mid = m2;
    }
    uint128_t mid_lo = mid << 64;
    uint128_t mid_hi = (mid >> 64) + (carry << 64);
    uint128_t nl = r.lo + mid_lo;
    r.hi += mid_hi + (nl < r.lo ? 1 : 0);
    r.lo = nl;
    return r;
}

inline uint256_t square_i128(int128_t v) {
    uint128_t a = v < 0 ? static_cast<uint128_t>(-v) : static_cast<uint128_t>(v);
    return mul_u128(a, a);
}

// floor(z * 2^shift / w) for signed z, positive w, without overflowing the
// intermediate. Quotient magnitude must fit in int128.
inline int128_t div_shifted(int128_t z, uint128_t w, unsigned shift) {
    bool neg = z < 0;
    uint128_t a = neg ? static_cast<uint128_t>(-z) : static_cast<uint128_t>(z);
    uint128_t q = a / w;
    uint128_t rem = a % w;
    for (unsigned i = 0; i < shift; i++) {
        q <<= 1;
        rem <<= 1;
        if (rem >= w) { rem -= w; q |= 1; }
        if (q >> 127) throw OverflowError("div_shifted quotient overflow");
    }
    return neg ? -static_cast<int128_t>(q) : static_cast<int128_t>(q);
}

} // namespace batchdex
