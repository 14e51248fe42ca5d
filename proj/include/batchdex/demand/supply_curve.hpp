#pragma once

#include <cstdint>
#include <vector>

#include "batchdex/book/orderbook.hpp"
#include "batchdex/core/types.hpp"
#include "batchdex/core/wide.hpp"

namespace batchdex {

// Per-pair prefix sums over distinct limit prices, laid out contiguously so
// a demand query is two binary searches instead of an offer walk.
class SupplyCurve {
  public:
    struct Entry {
        uint64_t price_raw;        // distinct, ascending
        uint128_t cum_endow;       // sum of E over offers with mp <= price
        uint128_t cum_price_endow; // sum of mp_raw * E over the same offers
    };

    struct Cum {
        uint128_t endow = 0;
        uint128_t price_endow = 0;
    };

    static SupplyCurve build(const MerkleTrie& book);
    static SupplyCurve from_offers(std::vector<std::pair<uint64_t, uint64_t>> price_endow_pairs);

    bool empty() const { return entries_.empty(); }
    size_t size() const { return entries_.size(); }
    const Entry& entry(size_t i) const { return entries_[i]; }
    uint128_t total_endowment() const { return entries_.empty() ? 0 : entries_.back().cum_endow; }

    Cum below(uint64_t price_raw) const;   // offers with mp <  price_raw
    Cum at_most(uint64_t price_raw) const; // offers with mp <= price_raw

  private:
    std::vector<Entry> entries_;
};

// Smoothed supply for one pair at rate alpha: full mass below (1-mu)*alpha
// plus the linear interpolation (alpha - mp)/(mu*alpha) across the band.
// `sold` is in sell-asset units, `value_sold` is p_sell * sold.
struct PairSupply {
    uint128_t sold = 0;
    uint128_t value_sold = 0;
};

// Spelled-out arithmetic shared with the execution bounds: t2 = rate =
// fp_div(p_sell, p_buy); t1 = t2 - (t2 >> mu_exp); band numerator
// D = rate * band_endow - band_price_endow; band sold = (D << mu_exp) / rate.
PairSupply pair_supply(const SupplyCurve& curve, Price p_sell, Price p_buy, ApproxParams params);
uint128_t pair_supply_at_rate(const SupplyCurve& curve, Price rate, ApproxParams params);

// Immutable set of curves for one solve, one per directed pair.
class MarketCurves {
  public:
    MarketCurves(uint16_t n_assets) : n_assets_(n_assets), curves_(uint32_t(n_assets) * (n_assets - 1u)) {}

    static MarketCurves build(OrderbookSet& books);
    static MarketCurves build(OrderbookSet& books, size_t threads);

    uint16_t n_assets() const { return n_assets_; }
    uint32_t pair_count() const { return uint32_t(n_assets_) * (n_assets_ - 1u); }
    const SupplyCurve& curve(uint32_t pair_idx) const { return curves_[pair_idx]; }
    SupplyCurve& curve_mut(uint32_t pair_idx) { return curves_[pair_idx]; }
    uint128_t total_open_mass() const;

  private:
    uint16_t n_assets_;
    std::vector<SupplyCurve> curves_;
};

// Price-normalized net demand: z[i] = p_i * Z_i, so each pair contributes
// -value_sold to its sell asset and +value_sold to its buy asset and the
// vector sums to zero exactly.
struct DemandVector {
    std::vector<int128_t> z;
    std::vector<uint128_t> sold_value;   // per asset, sum of outgoing value
    std::vector<uint128_t> bought_value; // per asset, sum of incoming value
};

DemandVector demand_query(const MarketCurves& curves, const std::vector<Price>& prices,
                          ApproxParams params);

// Fills values[pair_idx] = value_sold for pair_idx in [begin, end); used to
// split one query across helper threads.
void demand_query_range(const MarketCurves& curves, const std::vector<Price>& prices,
                        ApproxParams params, uint32_t begin, uint32_t end, uint128_t* values);

// Deterministic reduction of per-pair values into a DemandVector.
DemandVector reduce_demand(const MarketCurves& curves, const uint128_t* values);

} // namespace batchdex
