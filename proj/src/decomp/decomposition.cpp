#include "batchdex/decomp/decomposition.hpp"

#include <algorithm>

#include "batchdex/lp/clearing_lp.hpp"

namespace batchdex {

MarketPartition MarketPartition::from_registry(const AssetRegistry& registry) {
    MarketPartition p;
    for (uint16_t i = 0; i < registry.count(); i++) {
        const auto& e = registry.entry(AssetId{i});
        if (e.anchor) p.stocks.emplace_back(i, *e.anchor);
        else p.pricing.push_back(i);
    }
    for (auto& [stock, anchor] : p.stocks) {
        if (!std::binary_search(p.pricing.begin(), p.pricing.end(), anchor))
            throw PartitionViolation("stock anchored to another stock");
    }
    return p;
}

bool MarketPartition::is_stock(uint16_t asset) const {
    for (auto& [s, a] : stocks)
        if (s == asset) return true;
    return false;
}

void validate_partition(const MarketPartition& partition, const MarketCurves& curves) {
    auto anchor_of = [&](uint16_t s) -> int32_t {
        for (auto& [stock, anchor] : partition.stocks)
            if (stock == s) return anchor;
        return -1;
    };
    for (uint32_t idx = 0; idx < curves.pair_count(); idx++) {
        if (curves.curve(idx).empty()) continue;
        PairId pair = pair_from_index(curves.n_assets(), idx);
        int32_t a_sell = anchor_of(pair.sell.id);
        int32_t a_buy = anchor_of(pair.buy.id);
        if (a_sell < 0 && a_buy < 0) continue; // core pair
        bool ok = (a_sell >= 0 && a_buy < 0 && a_sell == pair.buy.id) ||
                  (a_buy >= 0 && a_sell < 0 && a_buy == pair.sell.id);
        if (!ok) throw PartitionViolation("offer trades a stock off its anchor");
    }
}

std::pair<Price, Price> bisect_two_asset(const SupplyCurve& sell_curve,
                                         const SupplyCurve& buy_curve, ApproxParams params,
                                         Price anchor_price) {
    MarketCurves curves(2);
    curves.curve_mut(pair_index(2, AssetId{0}, AssetId{1})) = sell_curve;
    curves.curve_mut(pair_index(2, AssetId{1}, AssetId{0})) = buy_curve;

    Price p1 = anchor_price;
    auto z0 = [&](uint64_t p0_raw) -> int128_t {
        std::vector<Price> prices{Price::from_raw(p0_raw), p1};
        return demand_query(curves, prices, params).z[0];
    };

    // z0 is nonincreasing in p0: find the flip point
    uint64_t lo = Price::kMinRaw, hi = Price::kMaxRaw - 1;
    for (int i = 0; i < 64 && lo < hi; i++) {
        uint64_t mid = lo + (hi - lo) / 2;
        if (z0(mid) > 0) lo = mid + 1;
        else hi = mid;
    }
    std::vector<Price> prices{Price::from_raw(lo), p1};
    if (feasibility_probe(curves, prices, params)) return {prices[0], p1};

    // The feasible pockets sit just above the books' own limit prices:
    // the rate must be in [level, level/(1-mu)) on one side or the other.
    // Probe candidate rates at each nearby level with the anchor fixed.
    Price flip_rate = fp_div(prices[0], p1);
    std::vector<uint64_t> candidate_p0;
    auto push_p0 = [&](uint128_t raw) {
        if (raw >= Price::kMinRaw && raw < Price::kMaxRaw)
            candidate_p0.push_back(static_cast<uint64_t>(raw));
    };

    // pocket candidates: the rate lands just above one side's limit price
    auto collect_levels = [&](const SupplyCurve& c, bool invert) {
        for (size_t i = 0; i < c.size(); i++) {
            uint64_t level = c.entry(i).price_raw;
            uint64_t q = invert ? fp_div(Price::one(), Price::from_raw(level)).raw() : level;
            if (q > flip_rate.raw() - (flip_rate.raw() >> 3) &&
                q < flip_rate.raw() + (flip_rate.raw() >> 3))
                push_p0(fp_mul(Price::from_raw(q), p1).raw());
        }
    };
    collect_levels(sell_curve, false);
    collect_levels(buy_curve, true);

    // value-balance candidates: with point bounds on both sides the flows
    // must coincide, p0 * M01 == p1 * M10, giving exact p0 targets
    {
        uint64_t r = flip_rate.raw();
        uint64_t inv = fp_div(p1, prices[0]).raw();
        std::vector<uint128_t> m01{sell_curve.below(r).endow, sell_curve.at_most(r).endow};
        std::vector<uint128_t> m10{buy_curve.below(inv).endow, buy_curve.at_most(inv).endow};
        for (uint128_t a : m01)
            for (uint128_t b : m10)
                if (a > 0 && b > 0) push_p0(uint128_t(p1.raw()) * b / a);
    }

    std::sort(candidate_p0.begin(), candidate_p0.end(), [&](uint64_t a, uint64_t b) {
        uint64_t f = prices[0].raw();
        uint64_t fa = a > f ? a - f : f - a;
        uint64_t fb = b > f ? b - f : f - b;
        return fa != fb ? fa < fb : a < b;
    });
    candidate_p0.erase(std::unique(candidate_p0.begin(), candidate_p0.end()), candidate_p0.end());
    for (uint64_t base : candidate_p0) {
        for (int64_t nudge = -2; nudge <= 8; nudge++) {
            int128_t raw = static_cast<int128_t>(base) + nudge;
            if (raw < static_cast<int128_t>(Price::kMinRaw) ||
                raw >= static_cast<int128_t>(Price::kMaxRaw))
                continue;
            prices[0] = Price::from_raw(static_cast<uint64_t>(raw));
            if (feasibility_probe(curves, prices, params)) return {prices[0], p1};
        }
    }

    // last resort: a short solver polish, then re-pin the anchor
    SolverConfig config;
    config.params = params;
    config.use_wall_clock = false;
    config.max_iters = 20000;
    config.feasibility_period = 100;
    prices[0] = Price::from_raw(lo);
    SolveOutcome out = run(config, curves, prices);
    if (out.prices[1] == p1) return {out.prices[0], p1};
    // rescale the solved ratio back onto the fixed anchor
    Price rescaled = fp_div(fp_mul(out.prices[0], p1), out.prices[1]);
    return {rescaled, p1};
}

DecomposedSolution solve_decomposed(const MarketPartition& partition, const MarketCurves& curves,
                                    const std::vector<SolverConfig>& configs, MultiMode mode,
                                    const std::vector<Price>& initial_prices) {
    validate_partition(partition, curves);
    const uint16_t n = curves.n_assets();

    DecomposedSolution out;
    out.prices.assign(n, Price::one());

    // restricted core market, reindexed
    const auto& core = partition.pricing;
    uint16_t k = static_cast<uint16_t>(core.size());
    bool core_converged = true;
    if (k > 1) {
        MarketCurves core_curves(k);
        for (uint16_t i = 0; i < k; i++) {
            for (uint16_t j = 0; j < k; j++) {
                if (i == j) continue;
                core_curves.curve_mut(pair_index(k, AssetId{i}, AssetId{j})) =
                    curves.curve(pair_index(n, AssetId{core[i]}, AssetId{core[j]}));
            }
        }
        std::vector<Price> init(k, Price::one());
        for (uint16_t i = 0; i < k; i++)
            if (core[i] < initial_prices.size()) init[i] = initial_prices[core[i]];
        SolveOutcome core_out = run_multi(configs, core_curves, init, mode);
        core_converged = core_out.converged;
        for (uint16_t i = 0; i < k; i++) out.prices[core[i]] = core_out.prices[i];
    }

    // each stock prices independently against its anchor; solving at the
    // anchor's core price makes the composition p' = (r_s / r_a) * p_a exact
    bool stocks_converged = true;
    for (auto& [stock, anchor] : partition.stocks) {
        const SupplyCurve& sell = curves.curve(pair_index(n, AssetId{stock}, AssetId{anchor}));
        const SupplyCurve& buy = curves.curve(pair_index(n, AssetId{anchor}, AssetId{stock}));
        ApproxParams params = configs.empty() ? ApproxParams{} : configs.front().params;
        auto [r_stock, r_anchor] = bisect_two_asset(sell, buy, params, out.prices[anchor]);
        (void)r_anchor;
        out.prices[stock] = r_stock;
    }
    out.converged = core_converged && stocks_converged;
    return out;
}

} // namespace batchdex
