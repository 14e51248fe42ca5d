#include "batchdex/solver/utility.hpp"

#include <limits>

namespace batchdex {

namespace {

// (p_sell << 32) * units - p_buy * price_endow, clamped at zero. Both terms
// are 2^64-scaled utility mass.
uint256_t surplus_term(uint64_t p_sell_raw, uint64_t p_buy_raw, uint128_t units,
                       uint128_t price_endow) {
    uint256_t gross = mul_u128(units, static_cast<uint128_t>(p_sell_raw) << 32);
    uint256_t cost = mul_u128(price_endow, p_buy_raw);
    if (cost >= gross) return {};
    // gross - cost
    uint256_t out;
    out.lo = gross.lo - cost.lo;
    out.hi = gross.hi - cost.hi - (gross.lo < cost.lo ? 1 : 0);
    return out;
}

} // namespace

UtilityReport utility_report(const MarketCurves& curves, const std::vector<Price>& prices,
                             const std::vector<uint64_t>& x_units, ApproxParams params) {
    (void)params;
    UtilityReport rep;
    uint16_t n = curves.n_assets();
    for (uint32_t idx = 0; idx < curves.pair_count(); idx++) {
        const SupplyCurve& curve = curves.curve(idx);
        if (curve.empty()) continue;
        PairId pair = pair_from_index(n, idx);
        uint64_t p_sell = prices[pair.sell.id].raw();
        uint64_t p_buy = prices[pair.buy.id].raw();
        Price rate = fp_div(prices[pair.sell.id], prices[pair.buy.id]);

        auto itm = curve.at_most(rate.raw());
        if (itm.endow == 0) continue;

        // executed units form the lowest-limit-price prefix of the curve
        uint128_t x = x_units[idx];
        if (x > itm.endow) x = itm.endow;

        uint128_t exec_units = 0, exec_price_endow = 0;
        if (x > 0) {
            size_t lo = 0, hi = curve.size();
            // rightmost entry with cum_endow <= x
            while (lo < hi) {
                size_t mid = (lo + hi) / 2;
                if (curve.entry(mid).cum_endow <= x) lo = mid + 1;
                else hi = mid;
            }
            if (lo > 0) {
                exec_units = curve.entry(lo - 1).cum_endow;
                exec_price_endow = curve.entry(lo - 1).cum_price_endow;
            }
            if (exec_units < x) {
                // partial fill at the marginal entry
                uint128_t part = x - exec_units;
                uint64_t mp = curve.entry(lo).price_raw;
                exec_units += part;
                exec_price_endow += part * mp;
            }
        }

        rep.realized.add(surplus_term(p_sell, p_buy, exec_units, exec_price_endow));
        rep.unrealized.add(
            surplus_term(p_sell, p_buy, itm.endow - exec_units, itm.price_endow - exec_price_endow));
    }
    rep.infinite = rep.realized == uint256_t{} && !(rep.unrealized == uint256_t{});
    return rep;
}

double UtilityReport::ratio() const {
    auto to_double = [](const uint256_t& v) {
        return static_cast<double>(v.hi) * 340282366920938463463374607431768211456.0 +
               static_cast<double>(v.lo);
    };
    double r = to_double(realized);
    if (r == 0.0) return infinite ? std::numeric_limits<double>::infinity() : 0.0;
    return to_double(unrealized) / r;
}

bool ratio_within_one_twentieth(const UtilityReport& r) {
    if (r.infinite) return false;
    // 20 * unrealized <= realized
    uint256_t scaled = r.unrealized;
    uint256_t four = scaled;
    for (int i = 0; i < 2; i++) { // *4
        uint256_t t = four;
        t.add(four);
        four = t;
    }
    // four = unrealized * 4? careful: loop doubles twice -> *4
    uint256_t sixteen = four;
    for (int i = 0; i < 2; i++) {
        uint256_t t = sixteen;
        t.add(sixteen);
        sixteen = t;
    }
    uint256_t twenty = sixteen;
    twenty.add(four);
    return !(twenty > r.realized);
}

} // namespace batchdex
