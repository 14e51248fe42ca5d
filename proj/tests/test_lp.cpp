#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle/oracle.hpp"
#include "test_util.hpp"

using namespace batchdex;

namespace {

BoundsSet direct_bounds(uint16_t n, const std::vector<std::tuple<uint16_t, uint16_t, uint64_t, uint64_t>>& lu,
                        const std::vector<Price>& prices) {
    MarketCurves empty(n);
    BoundsSet b = build_bounds(empty, prices, ApproxParams{});
    for (auto& [sell, buy, lo, hi] : lu) {
        uint32_t idx = pair_index(n, AssetId{sell}, AssetId{buy});
        b.pairs[idx].lower_units = lo;
        b.pairs[idx].upper_units = hi;
        b.pairs[idx].lower = uint128_t(lo) * prices[sell].raw();
        b.pairs[idx].upper = uint128_t(hi) * prices[sell].raw();
    }
    return b;
}

} // namespace

TEST_CASE("bounds from curves: band cases and the naive oracle") {
    ApproxParams params;
    params.mu_exp = 6;

    SUBCASE("no offers means zero bounds") {
        MarketCurves curves(2);
        BoundsSet b = build_bounds(curves, {Price::one(), Price::one()}, params);
        CHECK(b.pairs[0].lower == 0);
        CHECK(b.pairs[0].upper == 0);
    }
    SUBCASE("every offer below the band floor makes L equal U") {
        std::vector<Offer> offers{test::make_offer(0, 1, 100, 0.5, 1, 1),
                                  test::make_offer(0, 1, 70, 0.6, 1, 2)};
        MarketCurves curves = test::curves_from_offers(offers, 2);
        BoundsSet b = build_bounds(curves, {Price::from_double(2.0), Price::one()}, params);
        uint32_t idx = pair_index(2, AssetId{0}, AssetId{1});
        CHECK(b.pairs[idx].lower_units == 170);
        CHECK(b.pairs[idx].lower == b.pairs[idx].upper);
    }
    SUBCASE("random instances match per-offer scans") {
        Rng rng(3);
        for (int trial = 0; trial < 40; trial++) {
            uint16_t n = 2 + static_cast<uint16_t>(rng.below(3));
            auto offers = test::random_offers(rng, n, 200);
            MarketCurves curves = test::curves_from_offers(offers, n);
            std::vector<Price> prices;
            for (uint16_t a = 0; a < n; a++) prices.push_back(test::random_key_price(rng));
            BoundsSet b = build_bounds(curves, prices, params);
            for (uint32_t idx = 0; idx < b.pair_count(); idx++) {
                PairId pair = pair_from_index(n, idx);
                auto [lo, hi] = oracle::naive_bounds(offers, pair.sell, pair.buy, b.rates[idx], params);
                CHECK(b.pairs[idx].lower_units == lo);
                CHECK(b.pairs[idx].upper_units == hi);
            }
        }
    }
}

TEST_CASE("max circulation saturates symmetric opposing edges") {
    std::vector<Price> prices(2, Price::one());
    BoundsSet b = direct_bounds(2, {{0, 1, 0, 100}, {1, 0, 0, 100}}, prices);
    FlowSolution sol = solve_max_circulation(b, true);
    REQUIRE(sol.feasible);
    CHECK(sol.y[pair_index(2, AssetId{0}, AssetId{1})] == uint128_t(100) << 32);
    CHECK(sol.y[pair_index(2, AssetId{1}, AssetId{0})] == uint128_t(100) << 32);
}

TEST_CASE("one-directional demand cannot circulate") {
    std::vector<Price> prices(2, Price::one());
    BoundsSet b = direct_bounds(2, {{0, 1, 0, 100}}, prices);
    FlowSolution sol = solve_max_circulation(b, true);
    REQUIRE(sol.feasible);
    CHECK(sol.objective == 0);
}

TEST_CASE("infeasible floors trigger the documented fallback") {
    std::vector<Price> prices(2, Price::one());
    // mandatory execution with no counterparty
    BoundsSet b = direct_bounds(2, {{0, 1, 50, 100}}, prices);
    FlowSolution sol = solve_max_circulation(b, true);
    CHECK(!sol.feasible);
    sol = solve_max_circulation(b, false);
    CHECK(sol.feasible);
    CHECK(sol.objective == 0);
    CHECK(!sol.used_lower_bounds);
}

TEST_CASE("circulation objective equals the rational oracle on random instances") {
    Rng rng(11);
    for (int trial = 0; trial < 60; trial++) {
        uint16_t n = 3 + static_cast<uint16_t>(rng.below(2));
        std::vector<std::tuple<uint16_t, uint16_t, uint64_t, uint64_t>> lu;
        for (uint16_t a = 0; a < n; a++)
            for (uint16_t c = 0; c < n; c++) {
                if (a == c || rng.below(3) == 0) continue;
                uint64_t hi = rng.below(1000);
                uint64_t lo = rng.below(2) ? rng.below(hi + 1) : 0;
                lu.emplace_back(a, c, lo, hi);
            }
        std::vector<Price> prices(n, Price::one());
        BoundsSet b = direct_bounds(n, lu, prices);
        ApproxParams zero;
        zero.eps_exp = 0;

        FlowSolution mine = solve_max_circulation(b, true);
        auto ref = oracle::rational_lp(b, zero, true);
        CHECK(mine.feasible == ref.feasible);
        if (!mine.feasible) continue;
        Rat obj = Rat::from_u128(mine.objective);
        CHECK(obj == ref.objective);
        // integrality: every flow is a whole multiple of 2^-32-scaled units
        for (uint128_t y : mine.y) CHECK(y % (uint128_t(1) << 32) == 0);
    }
}

TEST_CASE("general LP with eps coincides with circulation at eps zero") {
    Rng rng(13);
    std::vector<std::tuple<uint16_t, uint16_t, uint64_t, uint64_t>> lu{
        {0, 1, 0, 500}, {1, 0, 0, 300}, {1, 2, 0, 200}, {2, 0, 10, 400}, {0, 2, 0, 100}};
    std::vector<Price> prices{Price::from_double(1.0), Price::from_double(2.0),
                              Price::from_double(0.5)};
    BoundsSet b = direct_bounds(3, lu, prices);
    ApproxParams zero;
    zero.eps_exp = 0;
    FlowSolution circ = solve_max_circulation(b, true);
    FlowSolution lp = solve_general(b, zero, true);
    REQUIRE(circ.feasible);
    REQUIRE(lp.feasible);
    CHECK(circ.objective == lp.objective);
}

TEST_CASE("single pair both directions with commission: hand derivation") {
    // U both ways, L = 0, eps = 2^-15. Constraints:
    //   y01 >= (1-e) y10, y10 >= (1-e) y01, y01 <= 100, y10 <= 100
    // optimum saturates both at their caps.
    std::vector<Price> prices(2, Price::one());
    BoundsSet b = direct_bounds(2, {{0, 1, 0, 100}, {1, 0, 0, 100}}, prices);
    ApproxParams params;
    params.eps_exp = 15;
    FlowSolution sol = solve_general(b, params, true);
    REQUIRE(sol.feasible);
    CHECK(sol.y[0] == uint128_t(100) << 32);
    CHECK(sol.y[1] == uint128_t(100) << 32);

    // asymmetric caps: the smaller side binds the bigger through (1-e)
    BoundsSet b2 = direct_bounds(2, {{0, 1, 0, 100}, {1, 0, 0, 10}}, prices);
    FlowSolution sol2 = solve_general(b2, params, true);
    REQUIRE(sol2.feasible);
    uint128_t y10 = uint128_t(10) << 32;
    // y01 <= y10 / (1-e) = y10 * 2^15 / (2^15 - 1), floored
    uint128_t cap = y10 * (uint128_t(1) << 15) / ((uint128_t(1) << 15) - 1);
    CHECK(sol2.y[pair_index(2, AssetId{1}, AssetId{0})] == y10);
    CHECK(sol2.y[pair_index(2, AssetId{0}, AssetId{1})] <= cap);
    CHECK(sol2.y[pair_index(2, AssetId{0}, AssetId{1})] >= cap - 1);
}

TEST_CASE("general LP objective matches the rational oracle within 2^-40") {
    Rng rng(17);
    ApproxParams params;
    params.eps_exp = 15;
    int solved = 0;
    for (int trial = 0; trial < 40; trial++) {
        uint16_t n = 5;
        std::vector<std::tuple<uint16_t, uint16_t, uint64_t, uint64_t>> lu;
        for (uint16_t a = 0; a < n; a++)
            for (uint16_t c = 0; c < n; c++) {
                if (a == c || rng.below(3) == 0) continue;
                uint64_t hi = 1 + rng.below(1 << 10);
                lu.emplace_back(a, c, rng.below(2) ? rng.below(hi / 2 + 1) : 0, hi);
            }
        std::vector<Price> prices;
        for (uint16_t a = 0; a < n; a++) prices.push_back(test::random_key_price(rng, 0.5, 2.0));
        BoundsSet b = direct_bounds(n, lu, prices);

        FlowSolution mine;
        oracle::RationalLpResult ref;
        try {
            mine = solve_general(b, params, true);
            ref = oracle::rational_lp(b, params, true);
        } catch (const SolverStall&) {
            continue;
        }
        REQUIRE(mine.feasible == ref.feasible);
        if (!mine.feasible) continue;
        solved++;
        // relative error <= 2^-40 (mine floors each y to an integer)
        Rat got = Rat::from_u128(mine.objective);
        Rat err = ref.objective - got;
        if (err.sign() < 0) err = -err;
        Rat tol = ref.objective / Rat::from_i128(int128_t(1) << 40);
        CHECK(err <= tol);
    }
    CHECK(solved >= 20);
}

TEST_CASE("feasibility probe") {
    ApproxParams params;
    params.mu_exp = 10;

    SUBCASE("empty market is feasible") {
        MarketCurves curves(3);
        CHECK(feasibility_probe(curves, {Price::one(), Price::one(), Price::one()}, params));
    }
    SUBCASE("grossly off prices are infeasible on a tight 2-asset market") {
        Rng rng(19);
        auto offers = test::crossing_market(rng, 2, 20, 0.05);
        MarketCurves curves = test::curves_from_offers(offers, 2);
        // push the rate far above every limit price on one side only;
        // mandatory sells then exceed any possible counterparty volume
        std::vector<Price> skewed{Price::from_double(100.0), Price::from_double(0.01)};
        bool feasible = feasibility_probe(curves, skewed, params);
        CHECK(!feasible);
    }
    SUBCASE("oracle equilibrium prices are feasible") {
        Rng rng(23);
        for (int trial = 0; trial < 10; trial++) {
            auto offers = test::crossing_market(rng, 2, 30);
            MarketCurves curves = test::curves_from_offers(offers, 2);
            auto brute = oracle::brute_equilibrium(curves, params);
            REQUIRE(brute.found);
            CHECK(feasibility_probe(curves, brute.prices, params));
        }
    }
}

TEST_CASE("extraction: exact quotients, floors, and the conservation pre-audit") {
    std::vector<Price> prices{Price::from_double(1.0), Price::from_double(3.0)};
    BoundsSet b = direct_bounds(2, {{0, 1, 0, 1000}, {1, 0, 0, 1000}}, prices);
    ApproxParams zero;
    zero.eps_exp = 0;
    FlowSolution sol = solve_max_circulation(b, true);
    auto x = extract_trade_amounts(b, sol, zero);
    for (uint32_t idx = 0; idx < b.pair_count(); idx++) {
        PairId pair = pair_from_index(2, idx);
        CHECK(x[idx] == sol.y[idx] / prices[pair.sell.id].raw());
    }

    SUBCASE("random instances never leave a payout deficit") {
        Rng rng(29);
        ApproxParams params;
        params.eps_exp = 15;
        for (int trial = 0; trial < 60; trial++) {
            uint16_t n = 4;
            std::vector<std::tuple<uint16_t, uint16_t, uint64_t, uint64_t>> lu;
            for (uint16_t a = 0; a < n; a++)
                for (uint16_t c = 0; c < n; c++) {
                    if (a == c || rng.below(2) == 0) continue;
                    lu.emplace_back(a, c, 0, 1 + rng.below(100000));
                }
            std::vector<Price> ps;
            for (uint16_t a = 0; a < n; a++) ps.push_back(test::random_key_price(rng, 0.1, 10.0));
            BoundsSet bounds = direct_bounds(n, lu, ps);
            FlowSolution s = solve_max_circulation(bounds, true);
            REQUIRE(s.feasible);
            auto amounts = extract_trade_amounts(bounds, s, params);
            for (uint16_t a = 0; a < n; a++) {
                uint128_t collected = 0, ceiling = 0;
                for (uint16_t other = 0; other < n; other++) {
                    if (other == a) continue;
                    collected += amounts[pair_index(n, AssetId{a}, AssetId{other})];
                    uint32_t in_idx = pair_index(n, AssetId{other}, AssetId{a});
                    ceiling += pair_payout_ceiling(amounts[in_idx], bounds.rates[in_idx], params);
                }
                CHECK(collected >= ceiling);
            }
        }
    }
}

TEST_CASE("solving twice yields identical flows") {
    Rng rng(31);
    std::vector<std::tuple<uint16_t, uint16_t, uint64_t, uint64_t>> lu{
        {0, 1, 5, 500}, {1, 0, 0, 700}, {1, 2, 0, 300}, {2, 1, 20, 800}, {0, 2, 0, 250}, {2, 0, 0, 90}};
    std::vector<Price> prices{Price::from_double(1.0), Price::from_double(0.8),
                              Price::from_double(1.9)};
    BoundsSet b = direct_bounds(3, lu, prices);
    ApproxParams params;
    params.eps_exp = 15;
    FlowSolution s1 = solve_clearing(b, params);
    FlowSolution s2 = solve_clearing(b, params);
    CHECK(s1.y == s2.y);
    CHECK(s1.used_lower_bounds == s2.used_lower_bounds);
}
