#include "batchdex/lp/clearing_lp.hpp"

namespace batchdex {

BoundsSet build_bounds(const MarketCurves& curves, const std::vector<Price>& prices,
                       ApproxParams params) {
    BoundsSet b;
    b.n_assets = curves.n_assets();
    b.prices = prices;
    b.rates.resize(b.pair_count());
    b.pairs.resize(b.pair_count());
    for (uint32_t idx = 0; idx < b.pair_count(); idx++) {
        PairId pair = pair_from_index(b.n_assets, idx);
        Price p_sell = prices[pair.sell.id];
        Price p_buy = prices[pair.buy.id];
        Price rate = fp_div(p_sell, p_buy);
        b.rates[idx] = rate;
        const SupplyCurve& curve = curves.curve(idx);
        if (curve.empty()) continue;

        uint64_t t2 = rate.raw();
        uint64_t t1 = params.mandatory_boundary(rate).raw();
        uint128_t lower_units = curve.below(t1).endow;
        uint128_t upper_units = curve.at_most(t2).endow;

        PairBounds& pb = b.pairs[idx];
        pb.lower_units = lower_units;
        pb.upper_units = upper_units;
        uint256_t lo = mul_u128(lower_units, p_sell.raw());
        uint256_t hi = mul_u128(upper_units, p_sell.raw());
        if (lo.hi != 0 || hi.hi != 0) throw OverflowError("price-scaled bound overflow");
        pb.lower = lo.lo;
        pb.upper = hi.lo;
    }
    return b;
}

} // namespace batchdex
