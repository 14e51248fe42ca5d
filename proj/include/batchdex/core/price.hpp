#pragma once

#include <cstdint>
#include <compare>

#include "batchdex/core/errors.hpp"
#include "batchdex/core/wide.hpp"

namespace batchdex {

// Unsigned fixed-point asset valuation. All exchange-rate arithmetic happens
// on these. 32 fractional bits internally; offer limit prices are quantized
// to 24 fractional bits so the 6-byte big-endian key prefix is lossless.
class Price {
  public:
    static constexpr unsigned kRadix = 32;
    static constexpr unsigned kKeyRadix = 24;
    // Valid limit prices cover ratios in [2^-24, 2^24).
    static constexpr uint64_t kMinRaw = uint64_t(1) << (kRadix - kKeyRadix);
    static constexpr uint64_t kMaxRaw = uint64_t(1) << (kRadix + kKeyRadix);

    constexpr Price() : raw_(0) {}
    static constexpr Price from_raw(uint64_t raw) { return Price(raw); }
    static constexpr Price one() { return Price(uint64_t(1) << kRadix); }

    // Quantizes toward zero to key precision. Used by generators and config
    // parsing; offer admission requires key-exact prices.
    static Price from_double(double v);
    double to_double() const { return static_cast<double>(raw_) / static_cast<double>(uint64_t(1) << kRadix); }

    constexpr uint64_t raw() const { return raw_; }
    constexpr bool is_zero() const { return raw_ == 0; }

    // True iff usable as an offer limit price: positive, in key range, and
    // exactly representable at the 24-bit key radix.
    constexpr bool key_exact() const {
        return raw_ >= kMinRaw && raw_ < kMaxRaw && (raw_ & ((uint64_t(1) << (kRadix - kKeyRadix)) - 1)) == 0;
    }

    friend auto operator<=>(const Price&, const Price&) = default;

  private:
    explicit constexpr Price(uint64_t raw) : raw_(raw) {}
    uint64_t raw_;
};

// floor((a.raw * b.raw) / 2^radix), rounding toward zero.
inline Price fp_mul(Price a, Price b) {
    uint128_t p = checked_mul_u64(a.raw(), b.raw()) >> Price::kRadix;
    if (p > UINT64_MAX) throw OverflowError("fp_mul overflow");
    return Price::from_raw(static_cast<uint64_t>(p));
}

// floor((a.raw * 2^radix) / b.raw), rounding toward zero.
inline Price fp_div(Price a, Price b) {
    if (b.raw() == 0) throw OverflowError("fp_div by zero");
    uint128_t q = (static_cast<uint128_t>(a.raw()) << Price::kRadix) / b.raw();
    if (q > UINT64_MAX) throw OverflowError("fp_div overflow");
    return Price::from_raw(static_cast<uint64_t>(q));
}

// floor(amount * rate / 2^radix): integer units bought when selling `amount`
// units at `rate`. Result as a wide integer; callers range-check.
inline uint128_t fp_scale_amount(uint64_t amount, Price rate) {
    return checked_mul_u64(amount, rate.raw()) >> Price::kRadix;
}

} // namespace batchdex
