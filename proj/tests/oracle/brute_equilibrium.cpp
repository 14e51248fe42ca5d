#include "oracle/oracle.hpp"

#include <cmath>
#include <limits>

#include "batchdex/decomp/decomposition.hpp"

namespace batchdex::oracle {

namespace {

int128_t z_of(const MarketCurves& curves, const std::vector<Price>& prices, ApproxParams params,
              size_t asset) {
    return demand_query(curves, prices, params).z[asset];
}

// scan outward from a candidate ratio until the probe certifies it
bool probe_scan(const MarketCurves& curves, std::vector<Price>& prices, ApproxParams params,
                size_t vary_asset) {
    if (feasibility_probe(curves, prices, params)) return true;
    uint64_t base = prices[vary_asset].raw();
    for (int step = 1; step <= 256; step++) {
        for (int sign = -1; sign <= 1; sign += 2) {
            // multiplicative nudges of ~2^-18 per step
            int128_t delta = (static_cast<int128_t>(base) * step * sign) >> 18;
            int128_t cand = static_cast<int128_t>(base) + delta;
            if (cand < static_cast<int128_t>(Price::kMinRaw) ||
                cand >= static_cast<int128_t>(Price::kMaxRaw))
                continue;
            prices[vary_asset] = Price::from_raw(static_cast<uint64_t>(cand));
            if (feasibility_probe(curves, prices, params)) return true;
        }
    }
    prices[vary_asset] = Price::from_raw(base);
    return false;
}

BruteResult brute_two(const MarketCurves& curves, ApproxParams params) {
    BruteResult out;
    out.prices = {Price::one(), Price::one()};
    // WGS makes z0 nonincreasing in p0: bisect the sign flip
    uint64_t lo = Price::kMinRaw, hi = Price::kMaxRaw - 1;
    for (int i = 0; i < 64 && lo < hi; i++) {
        uint64_t mid = lo + (hi - lo) / 2;
        std::vector<Price> p{Price::from_raw(mid), Price::one()};
        if (z_of(curves, p, params, 0) > 0) lo = mid + 1;
        else hi = mid;
    }
    out.prices[0] = Price::from_raw(lo);
    out.found = probe_scan(curves, out.prices, params, 0);
    return out;
}

BruteResult brute_three(const MarketCurves& curves, ApproxParams params) {
    BruteResult out;
    out.prices = {Price::one(), Price::one(), Price::one()};

    // coarse log grid over (p1, p2), refined around the best heuristic cell
    double best_h = std::numeric_limits<double>::infinity();
    double best_l1 = 0, best_l2 = 0;
    double span = 8.0; // log2 half-width
    double c1 = 0, c2 = 0;
    for (int level = 0; level < 6; level++) {
        const int grid = 17;
        for (int i = 0; i < grid; i++) {
            for (int j = 0; j < grid; j++) {
                double l1 = c1 + span * (2.0 * i / (grid - 1) - 1.0);
                double l2 = c2 + span * (2.0 * j / (grid - 1) - 1.0);
                std::vector<Price> p{Price::one(), Price::from_double(std::exp2(l1)),
                                     Price::from_double(std::exp2(l2))};
                DemandVector d = demand_query(curves, p, params);
                double h = 0;
                for (int128_t z : d.z) {
                    double zd = static_cast<double>(z);
                    h += zd * zd;
                }
                if (h < best_h) {
                    best_h = h;
                    best_l1 = l1;
                    best_l2 = l2;
                }
            }
        }
        c1 = best_l1;
        c2 = best_l2;
        span /= 4.0;
    }
    out.prices = {Price::one(), Price::from_double(std::exp2(best_l1)),
                  Price::from_double(std::exp2(best_l2))};
    if (feasibility_probe(curves, out.prices, params)) {
        out.found = true;
        return out;
    }
    // polish each coordinate in turn
    for (int round = 0; round < 3 && !out.found; round++) {
        for (size_t a = 1; a < 3 && !out.found; a++) out.found = probe_scan(curves, out.prices, params, a);
    }
    return out;
}

} // namespace

BruteResult brute_equilibrium(const MarketCurves& curves, ApproxParams params) {
    if (curves.n_assets() == 2) return brute_two(curves, params);
    if (curves.n_assets() == 3) return brute_three(curves, params);
    throw MalformedError("brute_equilibrium handles 2 or 3 assets");
}

bool decomposition_check(const MarketCurves& curves, const std::vector<uint16_t>& pricing,
                         const std::vector<std::pair<uint16_t, uint16_t>>& stocks,
                         ApproxParams params) {
    MarketPartition partition;
    partition.pricing = pricing;
    partition.stocks = stocks;

    SolverConfig config;
    config.params = params;
    config.use_wall_clock = false;
    DecomposedSolution sol =
        solve_decomposed(partition, curves, {config}, MultiMode::Deterministic,
                         std::vector<Price>(curves.n_assets(), Price::one()));
    if (!sol.converged) return false;
    return feasibility_probe(curves, sol.prices, params);
}

} // namespace batchdex::oracle
