#pragma once

#include <vector>

#include "batchdex/core/asset_registry.hpp"
#include "batchdex/solver/tatonnement.hpp"

namespace batchdex {

// Star partition over the pricing core: each stock trades only against its
// anchor, so the price computation decomposes and the LP's asset cap stops
// binding.
struct MarketPartition {
    std::vector<uint16_t> pricing;                     // core asset ids, ascending
    std::vector<std::pair<uint16_t, uint16_t>> stocks; // (stock, anchor)

    static MarketPartition from_registry(const AssetRegistry& registry);
    bool degenerate() const { return stocks.empty(); }
    bool is_stock(uint16_t asset) const;
};

// PartitionViolation if any nonempty curve crosses the partition.
void validate_partition(const MarketPartition& partition, const MarketCurves& curves);

struct DecomposedSolution {
    std::vector<Price> prices; // full market, stock prices rescaled onto the core
    bool converged = false;
};

// Core solve via the usual multi-instance solver; each stock gets a 2-asset
// bisection against its anchor; stock prices compose by
// p_stock = (r_stock / r_anchor) * p_anchor.
DecomposedSolution solve_decomposed(const MarketPartition& partition, const MarketCurves& curves,
                                    const std::vector<SolverConfig>& configs, MultiMode mode,
                                    const std::vector<Price>& initial_prices);

// Monotone bisection on the pair ratio against a fixed anchor price; the
// sell-offer market's net demand is monotone in the rate, so 2-asset
// instances need no iteration. Solving directly at the anchor's final price
// keeps the composed rates exact.
std::pair<Price, Price> bisect_two_asset(const SupplyCurve& sell_curve,
                                         const SupplyCurve& buy_curve, ApproxParams params,
                                         Price anchor_price = Price::one());

} // namespace batchdex
