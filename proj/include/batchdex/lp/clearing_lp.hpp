#pragma once

#include <cstdint>
#include <vector>

#include "batchdex/core/types.hpp"
#include "batchdex/core/wide.hpp"
#include "batchdex/demand/supply_curve.hpp"

namespace batchdex {

// Per directed pair: mandatory and eligible execution masses at the given
// prices. L counts offers strictly below (1-mu)*rate, U counts offers at or
// below the rate (execution is sharp). Stored price-scaled, matching the
// y_AB = p_A * x_AB substitution.
struct PairBounds {
    uint128_t lower = 0;       // p_sell * L_AB
    uint128_t upper = 0;       // p_sell * U_AB
    uint128_t lower_units = 0; // L_AB
    uint128_t upper_units = 0; // U_AB
};

struct BoundsSet {
    uint16_t n_assets = 0;
    std::vector<Price> prices;     // per asset
    std::vector<Price> rates;      // per pair: fp_div(p_sell, p_buy)
    std::vector<PairBounds> pairs; // per pair index

    uint32_t pair_count() const { return uint32_t(n_assets) * (n_assets - 1u); }
};

BoundsSet build_bounds(const MarketCurves& curves, const std::vector<Price>& prices,
                       ApproxParams params);

struct FlowSolution {
    std::vector<uint128_t> y; // per pair, price-scaled trade value
    bool feasible = false;            // true iff solved with the mandatory L bounds
    bool used_lower_bounds = false;
    uint128_t objective = 0;
};

// Exact-conservation max circulation (the eps = 0 program). Lower bounds are
// honored when feasible; with use_lower_bounds = false every edge's floor is
// zero and a solution always exists.
FlowSolution solve_max_circulation(const BoundsSet& bounds, bool use_lower_bounds);

// Dense bounded-variable simplex over exact rationals for eps > 0 (relaxed
// conservation admits a (1-eps) slack). Throws SolverStall on pivot-cap or
// rational overflow; callers fall back to the eps = 0 path.
FlowSolution solve_general(const BoundsSet& bounds, ApproxParams params, bool use_lower_bounds);

// Production entry: picks the path by eps and degrades L -> 0, then
// eps -> 0, until something feasible comes back.
FlowSolution solve_clearing(const BoundsSet& bounds, ApproxParams params);

// Tatonnement's convergence criterion: the mandatory-bounds circulation is
// feasible at these prices.
bool feasibility_probe(const MarketCurves& curves, const std::vector<Price>& prices,
                       ApproxParams params);
bool feasibility_probe(const BoundsSet& bounds);

// x_AB = floor(y_AB / p_A), followed by a deterministic repair pass that
// guarantees the integer-unit conservation pre-audit: for every asset,
// units collected >= the per-pair payout ceiling. Repair only reduces flows
// above the mandatory floor; ConservationViolation if it gets stuck (the
// caller then re-solves with L -> 0).
std::vector<uint64_t> extract_trade_amounts(const BoundsSet& bounds, const FlowSolution& sol,
                                            ApproxParams params);

// floor((1-eps) * x * rate): upper bound on what executing x units can pay.
inline uint64_t pair_payout_ceiling(uint64_t x, Price rate, ApproxParams params) {
    uint128_t v = params.skim(checked_mul_u64(x, rate.raw()));
    uint128_t b = v >> Price::kRadix;
    if (b > UINT64_MAX) throw OverflowError("payout ceiling overflow");
    return static_cast<uint64_t>(b);
}

} // namespace batchdex
