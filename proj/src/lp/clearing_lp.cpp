#include "batchdex/lp/clearing_lp.hpp"

#include "batchdex/lp/simplex.hpp"

namespace batchdex {

namespace {

// Largest var count we hand to the rational simplex; larger markets use the
// integral circulation path and skim the commission at payout time instead.
constexpr uint32_t kSimplexPairLimit = 1024;

Rat one_minus_eps(ApproxParams params) {
    if (params.zero_commission()) return Rat(1);
    int128_t den = int128_t(1) << params.eps_exp;
    return Rat::from_i128(den - 1, den);
}

} // namespace

FlowSolution solve_general(const BoundsSet& bounds, ApproxParams params, bool use_lower_bounds) {
    const uint32_t pairs = bounds.pair_count();
    const int n_assets = bounds.n_assets;

    std::vector<int> col_of_pair(pairs, -1);
    std::vector<uint32_t> pair_of_col;
    for (uint32_t idx = 0; idx < pairs; idx++) {
        if (bounds.pairs[idx].upper == 0) continue;
        col_of_pair[idx] = static_cast<int>(pair_of_col.size());
        pair_of_col.push_back(idx);
    }
    int n_y = static_cast<int>(pair_of_col.size());
    int n_cols = n_y + n_assets; // y' vars then per-asset surplus slacks

    BoundedSimplex lp(n_assets, n_cols);
    Rat keep = one_minus_eps(params);

    std::vector<Rat> rhs(n_assets, Rat(0));
    for (int k = 0; k < n_y; k++) {
        uint32_t idx = pair_of_col[k];
        const PairBounds& pb = bounds.pairs[idx];
        PairId pair = pair_from_index(bounds.n_assets, idx);
        uint128_t lo = use_lower_bounds ? pb.lower : 0;

        lp.set_coeff(pair.sell.id, k, Rat(1));
        lp.set_coeff(pair.buy.id, k, -keep);
        lp.set_lower(k, Rat(0));
        lp.set_upper(k, Rat::from_u128(pb.upper - lo));
        lp.set_objective(k, Rat(1));

        // move the y = lo + y' constants to the rhs
        Rat lo_r = Rat::from_u128(lo);
        rhs[pair.sell.id] = rhs[pair.sell.id] - lo_r;
        rhs[pair.buy.id] = rhs[pair.buy.id] + keep * lo_r;
    }
    for (int a = 0; a < n_assets; a++) {
        int s_col = n_y + a;
        lp.set_coeff(a, s_col, Rat(-1));
        lp.set_lower(s_col, Rat(0));
        lp.set_rhs(a, rhs[a]);
    }

    size_t pivot_cap = 400 + 24u * static_cast<size_t>(n_cols);
    auto status = lp.solve(pivot_cap);
    FlowSolution sol;
    sol.y.assign(pairs, 0);
    sol.used_lower_bounds = use_lower_bounds;
    if (status == BoundedSimplex::Status::Stalled) throw SolverStall("simplex stalled");
    if (status == BoundedSimplex::Status::Infeasible) {
        sol.feasible = false;
        return sol;
    }
    sol.feasible = true;
    for (int k = 0; k < n_y; k++) {
        uint32_t idx = pair_of_col[k];
        const Rat& v = lp.value(k);
        // floor to an integer flow; the stored header value must be what the
        // validator extracts from
        uint128_t flo = static_cast<uint128_t>(v.num / v.den);
        uint128_t lo = use_lower_bounds ? bounds.pairs[idx].lower : 0;
        sol.y[idx] = lo + flo;
        sol.objective = checked_add_u128(sol.objective, sol.y[idx]);
    }
    return sol;
}

FlowSolution solve_clearing(const BoundsSet& bounds, ApproxParams params) {
    bool try_simplex = !params.zero_commission() && bounds.pair_count() <= kSimplexPairLimit;
    if (try_simplex) {
        try {
            FlowSolution sol = solve_general(bounds, params, true);
            if (sol.feasible) return sol;
            sol = solve_general(bounds, params, false);
            if (sol.feasible) return sol;
        } catch (const SolverStall&) {
            // degenerate cycling or rational blowup: take the integral path
        }
    }
    FlowSolution sol = solve_max_circulation(bounds, true);
    if (!sol.feasible) sol = solve_max_circulation(bounds, false);
    return sol;
}

std::vector<uint64_t> extract_trade_amounts(const BoundsSet& bounds, const FlowSolution& sol,
                                            ApproxParams params) {
    const uint32_t pairs = bounds.pair_count();
    const uint16_t n = bounds.n_assets;

    std::vector<uint64_t> x(pairs, 0);
    std::vector<uint64_t> floor_units(pairs, 0);
    for (uint32_t idx = 0; idx < pairs; idx++) {
        uint128_t q = sol.y[idx] / bounds.prices[pair_from_index(n, idx).sell.id].raw();
        if (q > UINT64_MAX) throw OverflowError("trade amount overflow");
        x[idx] = static_cast<uint64_t>(q);
        if (sol.used_lower_bounds) {
            uint128_t lu = bounds.pairs[idx].lower_units;
            floor_units[idx] = lu > UINT64_MAX ? UINT64_MAX : static_cast<uint64_t>(lu);
        }
    }

    // Integer-unit pre-audit: per asset, units collected must cover the
    // payout ceilings. Flooring y/p can open a deficit of a few units; the
    // repair pass shrinks incoming flows that sit above their mandatory
    // floor until every asset clears. Deterministic scan order.
    auto payout_ceiling_into = [&](uint16_t asset) {
        uint128_t total = 0;
        for (uint16_t c = 0; c < n; c++) {
            if (c == asset) continue;
            uint32_t idx = pair_index(n, AssetId{c}, AssetId{asset});
            if (x[idx] == 0) continue;
            total += pair_payout_ceiling(x[idx], bounds.rates[idx], params);
        }
        return total;
    };
    auto collected_of = [&](uint16_t asset) {
        uint128_t total = 0;
        for (uint16_t b = 0; b < n; b++) {
            if (b == asset) continue;
            total += x[pair_index(n, AssetId{asset}, AssetId{b})];
        }
        return total;
    };

    for (int pass = 0; pass < 64 * 4; pass++) {
        bool any_deficit = false;
        for (uint16_t a = 0; a < n; a++) {
            uint128_t collected = collected_of(a);
            uint128_t paid = payout_ceiling_into(a);
            if (paid <= collected) continue;
            any_deficit = true;
            uint128_t deficit = paid - collected;
            for (uint16_t c = 0; c < n && deficit > 0; c++) {
                if (c == a) continue;
                uint32_t idx = pair_index(n, AssetId{c}, AssetId{a});
                uint64_t slack = x[idx] > floor_units[idx] ? x[idx] - floor_units[idx] : 0;
                if (slack == 0) continue;
                // smallest cut that drops this pair's ceiling by the deficit
                uint64_t lo_cut = 1, hi_cut = slack;
                uint64_t before = pair_payout_ceiling(x[idx], bounds.rates[idx], params);
                uint64_t want = before > deficit ? static_cast<uint64_t>(before - deficit) : 0;
                if (pair_payout_ceiling(x[idx] - slack, bounds.rates[idx], params) > want) {
                    // even the full slack is not enough; take it all
                    lo_cut = slack;
                } else {
                    while (lo_cut < hi_cut) {
                        uint64_t mid = lo_cut + (hi_cut - lo_cut) / 2;
                        if (pair_payout_ceiling(x[idx] - mid, bounds.rates[idx], params) <= want)
                            hi_cut = mid;
                        else
                            lo_cut = mid + 1;
                    }
                }
                uint64_t after = pair_payout_ceiling(x[idx] - lo_cut, bounds.rates[idx], params);
                x[idx] -= lo_cut;
                uint128_t dropped = before - after;
                deficit = dropped >= deficit ? 0 : deficit - dropped;
            }
            if (deficit > 0)
                throw ConservationViolation("cannot repair integer conservation within bounds");
        }
        if (!any_deficit) return x;
    }
    throw ConservationViolation("conservation repair did not converge");
}

} // namespace batchdex
