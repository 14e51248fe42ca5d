#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "batchdex/solver/tatonnement.hpp"

#include "oracle/oracle.hpp"
#include "test_util.hpp"

using namespace batchdex;

namespace {

// equal opposing masses with limit prices straddling parity force ratio 1;
// the offers above the rate keep the clearing bounds slack
std::vector<Offer> symmetric_market(uint16_t n_offers_per_side) {
    std::vector<Offer> offers;
    for (uint16_t i = 0; i < n_offers_per_side; i++) {
        offers.push_back(test::make_offer(0, 1, 1000, 0.92 + 0.02 * (i % 9), 1, i + 1));
        offers.push_back(test::make_offer(1, 0, 1000, 0.93 + 0.02 * (i % 9), 2, i + 1));
    }
    return offers;
}

double ratio_of(const std::vector<Price>& p, size_t a, size_t b) {
    return p[a].to_double() / p[b].to_double();
}

SolverConfig test_config(ApproxParams params) {
    SolverConfig c;
    c.params = params;
    c.use_wall_clock = false;
    c.max_iters = 20000;
    c.feasibility_period = 200;
    return c;
}

} // namespace

TEST_CASE("price_step is a fixed point at zero demand") {
    SolverState state;
    state.prices = {Price::one(), Price::from_double(2.0)};
    state.volume_weight = {1, 1};
    state.demand.z = {0, 0};
    auto out = price_step(state, 13);
    CHECK(out == state.prices);
}

TEST_CASE("price_step moves each price with the sign of its demand") {
    SolverState state;
    state.prices = {Price::one(), Price::one(), Price::one()};
    state.volume_weight = {uint128_t(1) << 32, uint128_t(1) << 32, uint128_t(1) << 32};
    state.demand.z = {int128_t(1) << 40, 0, -(int128_t(1) << 40)};
    auto out = price_step(state, 13);
    CHECK(out[0].raw() > state.prices[0].raw());
    CHECK(out[1].raw() == state.prices[1].raw());
    CHECK(out[2].raw() < state.prices[2].raw());
}

TEST_CASE("price_step matches the update formula on a hand-computed case") {
    // p = 1.0, z = 2^36, w = 2^34 (so r = z/w = 4.0), delta = 1.0,
    // scale_exp = 5: term = r * delta >> (32+5) = 0.125, p' = p * 1.125
    SolverState state;
    state.prices = {Price::one()};
    state.volume_weight = {uint128_t(1) << 34};
    state.demand.z = {int128_t(1) << 36};
    state.delta = uint64_t(1) << 32;
    auto out = price_step(state, 5);
    CHECK(out[0].raw() == Price::one().raw() + (Price::one().raw() >> 3));

    // and the per-step clamp: a huge imbalance moves a price by at most 25%
    state.demand.z = {int128_t(1) << 90};
    auto clamped = price_step(state, 5);
    CHECK(clamped[0].raw() == Price::one().raw() + (Price::one().raw() >> 2));
}

TEST_CASE("heuristic: zero on an empty market, exact sum of squares") {
    DemandVector d;
    CHECK(demand_heuristic(d) == uint256_t{});
    d.z = {3, -4};
    uint256_t h = demand_heuristic(d);
    CHECK(h.lo == 25);
    CHECK(h.hi == 0);
}

TEST_CASE("heuristic is locally minimal near a solved instance") {
    Rng rng(3);
    auto offers = test::crossing_market(rng, 2, 40);
    MarketCurves curves = test::curves_from_offers(offers, 2);
    ApproxParams params;
    auto brute = oracle::brute_equilibrium(curves, params);
    REQUIRE(brute.found);

    auto h_at = [&](double scale) {
        std::vector<Price> p = brute.prices;
        p[0] = Price::from_double(p[0].to_double() * scale);
        return demand_heuristic(demand_query(curves, p, params));
    };
    uint256_t center = h_at(1.0);
    CHECK(!(h_at(1.10) < center));
    CHECK(!(h_at(0.90) < center));
}

TEST_CASE("solver_iteration implements the accept/reject step rule") {
    Rng rng(5);
    auto offers = test::crossing_market(rng, 2, 30);
    MarketCurves curves = test::curves_from_offers(offers, 2);
    SolverConfig config = test_config(ApproxParams{});

    SolverState state;
    state.prices = {Price::from_double(4.0), Price::one()};
    state.volume_weight.assign(2, uint128_t(1) << 12);
    state.demand = demand_query(curves, state.prices, config.params);
    state.heuristic = demand_heuristic(state.demand);

    uint64_t delta_before = state.delta;
    uint256_t h_before = state.heuristic;
    solver_iteration(state, curves, config);
    if (state.heuristic < h_before) {
        CHECK(state.delta > delta_before); // accepted: delta grew
    } else {
        CHECK(state.delta < delta_before); // rejected: delta shrank
        CHECK(state.heuristic == h_before);
    }
    // either way the iteration counter advanced
    CHECK(state.iter == 1);
}

TEST_CASE("symmetric two-asset market converges to ratio one") {
    auto offers = symmetric_market(20);
    MarketCurves curves = test::curves_from_offers(offers, 2);
    ApproxParams params; // mu = 2^-10
    SolverConfig config = test_config(params);

    std::vector<Price> initial{Price::from_double(4.0), Price::one()};
    SolveOutcome out = run(config, curves, initial);
    REQUIRE(out.converged);
    CHECK(out.iterations <= 10000);
    double mu = std::pow(2.0, -double(params.mu_exp));
    CHECK(std::abs(ratio_of(out.prices, 0, 1) - 1.0) < 8 * mu);
    // convergence certificate: feasibility holds at the returned prices
    CHECK(feasibility_probe(curves, out.prices, params));
}

TEST_CASE("three-asset cycle converges to equal prices") {
    std::vector<Offer> offers;
    uint64_t seq = 1;
    Rng cycle_rng(99);
    for (auto [s, b] : {std::pair<uint16_t, uint16_t>{0, 1}, {1, 2}, {2, 0}}) {
        for (int i = 0; i < 200; i++)
            offers.push_back(test::make_offer(s, b, 200 + cycle_rng.below(600),
                                              0.94 + 0.12 * cycle_rng.uniform(), 1, seq++));
    }
    MarketCurves curves = test::curves_from_offers(offers, 3);
    ApproxParams params;
    SolverConfig config = test_config(params);
    SolveOutcome out = run(config, curves, {Price::from_double(3.0), Price::one(), Price::one()});
    REQUIRE(out.converged);
    double mu = std::pow(2.0, -double(params.mu_exp));
    CHECK(std::abs(ratio_of(out.prices, 0, 1) - 1.0) < 16 * mu);
    CHECK(std::abs(ratio_of(out.prices, 1, 2) - 1.0) < 16 * mu);
}

TEST_CASE("empty market converges immediately at the initial prices") {
    MarketCurves curves(3);
    SolverConfig config = test_config(ApproxParams{});
    std::vector<Price> initial{Price::one(), Price::from_double(2.0), Price::from_double(0.5)};
    SolveOutcome out = run(config, curves, initial);
    CHECK(out.converged);
    CHECK(out.iterations == 0);
    CHECK(out.prices == initial);
}

TEST_CASE("run_multi with one config is run") {
    Rng rng(7);
    auto offers = symmetric_market(10);
    MarketCurves curves = test::curves_from_offers(offers, 2);
    SolverConfig config = test_config(ApproxParams{});
    std::vector<Price> initial(2, Price::one());
    SolveOutcome solo = run(config, curves, initial);
    SolveOutcome multi = run_multi({config}, curves, initial, MultiMode::Deterministic);
    CHECK(solo.converged == multi.converged);
    CHECK(solo.prices == multi.prices);
}

TEST_CASE("racing: the sane instance wins and equals its solo run") {
    auto offers = symmetric_market(20);
    MarketCurves curves = test::curves_from_offers(offers, 2);
    ApproxParams params;
    SolverConfig sane = test_config(params);
    SolverConfig absurd = test_config(params);
    absurd.step_scale_exp = 0; // wild steps, rejected forever
    absurd.feasibility_period = 1 << 30;
    absurd.max_iters = 1 << 20;
    absurd.use_wall_clock = true;
    absurd.timeout = std::chrono::milliseconds(30000);
    sane.use_wall_clock = true;
    sane.timeout = std::chrono::milliseconds(30000);

    std::vector<Price> initial{Price::from_double(2.0), Price::one()};
    SolveOutcome solo = run(sane, curves, initial);
    REQUIRE(solo.converged);
    SolveOutcome raced = run_multi({absurd, sane}, curves, initial, MultiMode::Race);
    CHECK(raced.converged);
    CHECK(raced.prices == solo.prices);
}

TEST_CASE("deterministic mode is bit-identical across runs") {
    Rng rng(11);
    auto offers = test::crossing_market(rng, 3, 25);
    MarketCurves curves = test::curves_from_offers(offers, 3);
    ApproxParams params;
    auto configs = default_config_spread(params);
    for (auto& c : configs) {
        c.use_wall_clock = false;
        c.max_iters = 4000;
    }
    std::vector<Price> initial(3, Price::one());
    SolveOutcome a = run_multi(configs, curves, initial, MultiMode::Deterministic);
    SolveOutcome b = run_multi(configs, curves, initial, MultiMode::Deterministic);
    CHECK(a.prices == b.prices);
    CHECK(a.converged == b.converged);
}

TEST_CASE("scale invariance: doubled initial prices give the same ratios") {
    Rng rng(13);
    auto offers = test::crossing_market(rng, 3, 150);
    MarketCurves curves = test::curves_from_offers(offers, 3);
    ApproxParams params;
    SolverConfig config = test_config(params);
    std::vector<Price> initial(3, Price::one());
    std::vector<Price> doubled(3, Price::from_double(2.0));
    SolveOutcome a = run(config, curves, initial);
    SolveOutcome b = run(config, curves, doubled);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    double mu = std::pow(2.0, -double(params.mu_exp));
    for (size_t i = 1; i < 3; i++) {
        double ra = ratio_of(a.prices, i, 0), rb = ratio_of(b.prices, i, 0);
        CHECK(std::abs(ra - rb) / ra < 2 * mu);
    }
}

TEST_CASE("tatonnement prices agree with the brute-force oracle") {
    Rng rng(17);
    ApproxParams params;
    SolverConfig config = test_config(params);
    int checked = 0;
    for (int trial = 0; trial < 20; trial++) {
        auto offers = test::crossing_market(rng, 2, 25);
        MarketCurves curves = test::curves_from_offers(offers, 2);
        auto brute = oracle::brute_equilibrium(curves, params);
        if (!brute.found) continue;
        SolveOutcome out = run(config, curves, {Price::one(), Price::one()});
        REQUIRE(out.converged);
        double mine = ratio_of(out.prices, 0, 1);
        double ref = ratio_of(brute.prices, 0, 1);
        double mu = std::pow(2.0, -double(params.mu_exp));
        CHECK(std::abs(mine - ref) / ref < 8 * mu);
        checked++;
    }
    CHECK(checked >= 15);
}

TEST_CASE("utility report: full execution scores zero unrealized") {
    std::vector<Offer> offers{test::make_offer(0, 1, 100, 0.5, 1, 1)};
    MarketCurves curves = test::curves_from_offers(offers, 2);
    std::vector<Price> prices{Price::one(), Price::one()};
    std::vector<uint64_t> x(curves.pair_count(), 0);
    x[pair_index(2, AssetId{0}, AssetId{1})] = 100;
    UtilityReport rep = utility_report(curves, prices, x, ApproxParams{});
    CHECK(rep.unrealized == uint256_t{});
    CHECK(!(rep.realized == uint256_t{}));
    CHECK(rep.ratio() == 0.0);

    // nothing executed: flagged infinite
    std::vector<uint64_t> none(curves.pair_count(), 0);
    UtilityReport empty = utility_report(curves, prices, none, ApproxParams{});
    CHECK(empty.infinite);
    CHECK(std::isinf(empty.ratio()));
    CHECK(!ratio_within_one_twentieth(empty));
}

TEST_CASE("timeout returns the best prices visited") {
    // a market that cannot clear its floors: one-sided with mandatory mass
    std::vector<Offer> offers{test::make_offer(0, 1, 1000, 0.0001, 1, 1)};
    MarketCurves curves = test::curves_from_offers(offers, 2);
    SolverConfig config = test_config(ApproxParams{});
    config.max_iters = 300;
    SolveOutcome out = run(config, curves, {Price::one(), Price::one()});
    // a single one-sided offer can never trade; the solver times out but
    // still reports prices
    CHECK(!out.prices.empty());
}
