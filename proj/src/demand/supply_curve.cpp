#include "batchdex/demand/supply_curve.hpp"

#include <algorithm>
#include <thread>

namespace batchdex {

SupplyCurve SupplyCurve::build(const MerkleTrie& book) {
    SupplyCurve c;
    book.visit_in_order([&](std::span<const uint8_t> key, std::span<const uint8_t> value) {
        OfferKey k;
        std::copy(key.begin(), key.end(), k.begin());
        uint64_t price_raw = price_from_key(k).raw();
        uint64_t endow = decode_endowment(value).units;
        if (!c.entries_.empty() && c.entries_.back().price_raw == price_raw) {
            auto& e = c.entries_.back();
            e.cum_endow = checked_add_u128(e.cum_endow, endow);
            e.cum_price_endow = checked_add_u128(e.cum_price_endow, checked_mul_u64(price_raw, endow));
        } else {
            Entry e;
            e.price_raw = price_raw;
            e.cum_endow = c.entries_.empty() ? 0 : c.entries_.back().cum_endow;
            e.cum_price_endow = c.entries_.empty() ? 0 : c.entries_.back().cum_price_endow;
            e.cum_endow = checked_add_u128(e.cum_endow, endow);
            e.cum_price_endow = checked_add_u128(e.cum_price_endow, checked_mul_u64(price_raw, endow));
            c.entries_.push_back(e);
        }
        return true;
    });
    return c;
}

SupplyCurve SupplyCurve::from_offers(std::vector<std::pair<uint64_t, uint64_t>> price_endow_pairs) {
    std::sort(price_endow_pairs.begin(), price_endow_pairs.end());
    SupplyCurve c;
    for (auto [price_raw, endow] : price_endow_pairs) {
        if (!c.entries_.empty() && c.entries_.back().price_raw == price_raw) {
            auto& e = c.entries_.back();
            e.cum_endow = checked_add_u128(e.cum_endow, endow);
            e.cum_price_endow = checked_add_u128(e.cum_price_endow, checked_mul_u64(price_raw, endow));
        } else {
            Entry e;
            e.price_raw = price_raw;
            e.cum_endow = c.entries_.empty() ? 0 : c.entries_.back().cum_endow;
            e.cum_price_endow = c.entries_.empty() ? 0 : c.entries_.back().cum_price_endow;
            e.cum_endow = checked_add_u128(e.cum_endow, endow);
            e.cum_price_endow = checked_add_u128(e.cum_price_endow, checked_mul_u64(price_raw, endow));
            c.entries_.push_back(e);
        }
    }
    return c;
}

SupplyCurve::Cum SupplyCurve::below(uint64_t price_raw) const {
    // rightmost entry with price < price_raw
    auto it = std::lower_bound(entries_.begin(), entries_.end(), price_raw,
                               [](const Entry& e, uint64_t p) { return e.price_raw < p; });
    if (it == entries_.begin()) return {};
    --it;
    return {it->cum_endow, it->cum_price_endow};
}

SupplyCurve::Cum SupplyCurve::at_most(uint64_t price_raw) const {
    // rightmost entry with price <= price_raw
    auto it = std::upper_bound(entries_.begin(), entries_.end(), price_raw,
                               [](uint64_t p, const Entry& e) { return p < e.price_raw; });
    if (it == entries_.begin()) return {};
    --it;
    return {it->cum_endow, it->cum_price_endow};
}

uint128_t pair_supply_at_rate(const SupplyCurve& curve, Price rate, ApproxParams params) {
    if (curve.empty() || rate.raw() == 0) return 0;
    uint64_t t2 = rate.raw();
    uint64_t t1 = params.mandatory_boundary(rate).raw();

    auto full = curve.below(t1);
    auto upto = curve.at_most(t2);

    uint128_t band_endow = upto.endow - full.endow;
    uint128_t band_price_endow = upto.price_endow - full.price_endow;

    uint128_t sold = full.endow;
    if (band_endow > 0) {
        // D = rate * band_endow - band_price_endow >= 0 since mp <= rate in band
        uint256_t prod = mul_u128(band_endow, t2);
        if (prod.hi != 0) throw OverflowError("band mass overflow");
        uint128_t d = prod.lo - band_price_endow;
        if (d >> (127 - params.mu_exp)) throw OverflowError("band numerator overflow");
        uint128_t band_sold = (d << params.mu_exp) / t2;
        sold = checked_add_u128(sold, band_sold);
    }
    return sold;
}

PairSupply pair_supply(const SupplyCurve& curve, Price p_sell, Price p_buy, ApproxParams params) {
    PairSupply out;
    if (curve.empty()) return out;
    Price rate = fp_div(p_sell, p_buy);
    out.sold = pair_supply_at_rate(curve, rate, params);
    uint256_t v = mul_u128(out.sold, p_sell.raw());
    if (v.hi != 0) throw OverflowError("pair value overflow");
    out.value_sold = v.lo;
    return out;
}

MarketCurves MarketCurves::build(OrderbookSet& books) {
    return build(books, 1);
}

MarketCurves MarketCurves::build(OrderbookSet& books, size_t threads) {
    MarketCurves mc(books.n_assets());
    uint32_t pairs = mc.pair_count();
    if (threads <= 1 || pairs < 8) {
        for (uint32_t i = 0; i < pairs; i++) mc.curves_[i] = SupplyCurve::build(books.book(i));
        return mc;
    }
    std::atomic<uint32_t> next{0};
    auto worker = [&]() {
        while (true) {
            uint32_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= pairs) return;
            mc.curves_[i] = SupplyCurve::build(books.book(i));
        }
    };
    std::vector<std::thread> pool;
    for (size_t t = 1; t < threads; t++) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return mc;
}

uint128_t MarketCurves::total_open_mass() const {
    uint128_t total = 0;
    for (const auto& c : curves_) total = checked_add_u128(total, c.total_endowment());
    return total;
}

void demand_query_range(const MarketCurves& curves, const std::vector<Price>& prices,
                        ApproxParams params, uint32_t begin, uint32_t end, uint128_t* values) {
    uint16_t n = curves.n_assets();
    for (uint32_t idx = begin; idx < end; idx++) {
        PairId pair = pair_from_index(n, idx);
        values[idx] = pair_supply(curves.curve(idx), prices[pair.sell.id], prices[pair.buy.id], params).value_sold;
    }
}

DemandVector reduce_demand(const MarketCurves& curves, const uint128_t* values) {
    uint16_t n = curves.n_assets();
    DemandVector d;
    d.z.assign(n, 0);
    d.sold_value.assign(n, 0);
    d.bought_value.assign(n, 0);
    for (uint32_t idx = 0; idx < curves.pair_count(); idx++) {
        PairId pair = pair_from_index(n, idx);
        uint128_t v = values[idx];
        d.z[pair.sell.id] -= static_cast<int128_t>(v);
        d.z[pair.buy.id] += static_cast<int128_t>(v);
        d.sold_value[pair.sell.id] = checked_add_u128(d.sold_value[pair.sell.id], v);
        d.bought_value[pair.buy.id] = checked_add_u128(d.bought_value[pair.buy.id], v);
    }
    return d;
}

DemandVector demand_query(const MarketCurves& curves, const std::vector<Price>& prices,
                          ApproxParams params) {
    std::vector<uint128_t> values(curves.pair_count());
    demand_query_range(curves, prices, params, 0, curves.pair_count(), values.data());
    return reduce_demand(curves, values.data());
}

} // namespace batchdex
