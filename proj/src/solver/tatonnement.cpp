#include "batchdex/solver/tatonnement.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace batchdex {

namespace {

constexpr uint64_t kDeltaMax = uint64_t(1) << 62;
constexpr uint128_t kWeightFloor = uint128_t(1) << 12; // nu ceiling of 2^20 over unit scale

// term and prices are radix-32; one step moves a price by at most 25%, so
// a wild demand spike cannot fling the search across the landscape. Large
// moves come from repeated accepted steps instead.
constexpr int128_t kTermMax = int128_t(1) << 30;
constexpr int128_t kTermMin = -(int128_t(1) << 30);

} // namespace

uint256_t demand_heuristic(const DemandVector& d) {
    uint256_t h{};
    for (int128_t z : d.z) h.add(square_i128(z));
    return h;
}

std::vector<Price> price_step(const SolverState& state, uint32_t step_scale_exp) {
    size_t n = state.prices.size();
    std::vector<Price> out(n);
    for (size_t i = 0; i < n; i++) {
        int128_t z = state.demand.z[i];
        uint64_t p = state.prices[i].raw();
        if (z == 0) {
            out[i] = state.prices[i];
            continue;
        }
        uint128_t w = std::max(state.volume_weight[i], kWeightFloor);
        int128_t r = div_shifted(z, w, 32); // relative imbalance, radix 32
        if (r == 0) r = z > 0 ? 1 : -1;

        // clamp so r * delta cannot overflow
        constexpr int128_t kRCap = int128_t(1) << 48;
        r = std::clamp(r, -kRCap, kRCap);
        int128_t term = (r * static_cast<int128_t>(state.delta)) >> (32 + step_scale_exp);
        term = std::clamp(term, kTermMin, kTermMax);

        int128_t dp = (static_cast<int128_t>(p) * term) >> 32;
        if (dp == 0) dp = z > 0 ? 1 : -1; // accepted steps always move with the sign of z
        int128_t np = static_cast<int128_t>(p) + dp;
        np = std::clamp(np, static_cast<int128_t>(Price::kMinRaw),
                        static_cast<int128_t>(Price::kMaxRaw - 1));
        out[i] = Price::from_raw(static_cast<uint64_t>(np));
    }
    return out;
}

namespace {

void update_volume_weights(SolverState& state, const SolverConfig& config) {
    if (config.volume_strategy != SolverConfig::VolumeStrategy::InRunEwma) return;
    size_t n = state.prices.size();
    for (size_t i = 0; i < n; i++) {
        uint128_t traded = std::min(state.demand.sold_value[i], state.demand.bought_value[i]);
        uint128_t target = std::max(traded, kWeightFloor);
        uint128_t w = state.volume_weight[i];
        // w += (target - w) / 8, exact in integers
        if (target >= w) w += (target - w) >> 3;
        else w -= (w - target) >> 3;
        state.volume_weight[i] = std::max(w, kWeightFloor);
    }
}

} // namespace

namespace {

// relative move below 2^-8 on every price
bool small_step(const std::vector<Price>& from, const std::vector<Price>& to) {
    for (size_t i = 0; i < from.size(); i++) {
        uint64_t a = from[i].raw(), b = to[i].raw();
        uint64_t diff = a > b ? a - b : b - a;
        if ((static_cast<uint128_t>(diff) << 8) > a) return false;
    }
    return true;
}

} // namespace

void solver_iteration(SolverState& state, const MarketCurves& curves, const SolverConfig& config) {
    std::vector<Price> candidate = price_step(state, config.step_scale_exp);
    DemandVector cand_demand = demand_query(curves, candidate, config.params);
    uint256_t cand_h = demand_heuristic(cand_demand);

    // Line search with plateau walking: a strictly lower heuristic always
    // accepts; an equal one accepts only small steps. Sparse books make the
    // smoothed demand piecewise constant, and bounded moves in the sign of z
    // are the way across those flats, while equal-heuristic jumps between
    // far-apart price vectors stay rejected.
    bool fine = small_step(state.prices, candidate);
    bool accept = cand_h < state.heuristic || (cand_h == state.heuristic && fine);

    if (accept) {
        state.prices = std::move(candidate);
        state.demand = std::move(cand_demand);
        state.heuristic = cand_h;
        state.fine_regime = fine;
        uint128_t grown = (static_cast<uint128_t>(state.delta) * config.step_up_num) >> 8;
        state.delta = grown > kDeltaMax ? kDeltaMax : static_cast<uint64_t>(grown);
        update_volume_weights(state, config);
    } else {
        state.delta = std::max<uint64_t>(1, state.delta >> config.step_down_shift);
    }
    state.iter++;
}

static SolveOutcome run_impl(const SolverConfig& config, const MarketCurves& curves,
                             const std::vector<Price>& initial_prices,
                             const std::vector<uint128_t>* prior_volumes,
                             const std::atomic<int>* stop) {
    SolverState state;
    state.prices = initial_prices;
    // every strategy starts from the open market mass so the first steps are
    // scale-free; the EWMA refines per-asset weights as volumes materialize
    uint128_t mass = std::max<uint128_t>(curves.total_open_mass(), kWeightFloor);
    state.volume_weight.assign(initial_prices.size(), mass);
    if (config.volume_strategy == SolverConfig::VolumeStrategy::PriorBlock && prior_volumes &&
        prior_volumes->size() == initial_prices.size()) {
        for (size_t i = 0; i < prior_volumes->size(); i++)
            state.volume_weight[i] = std::max((*prior_volumes)[i], kWeightFloor);
    }
    state.demand = demand_query(curves, state.prices, config.params);
    state.heuristic = demand_heuristic(state.demand);

    SolveOutcome best;
    best.prices = state.prices;

    auto deadline = std::chrono::steady_clock::now() + config.timeout;

    auto probe = [&]() -> bool {
        BoundsSet bounds = build_bounds(curves, state.prices, config.params);
        if (feasibility_probe(bounds)) return true;
        // infeasible: score these prices for the timeout fallback
        FlowSolution sol = solve_max_circulation(bounds, false);
        std::vector<uint64_t> x;
        try {
            x = extract_trade_amounts(bounds, sol, config.params);
        } catch (const ConservationViolation&) {
            return false;
        }
        UtilityReport rep = utility_report(curves, state.prices, x, config.params);
        double ratio = rep.ratio();
        if (ratio < best.best_unrealized_ratio) {
            best.best_unrealized_ratio = ratio;
            best.prices = state.prices;
        }
        return false;
    };

    while (true) {
        // near the equilibrium the feasible price pockets are only a
        // mu-fraction wide, so the fine-step regime probes every iteration
        bool at_probe = (state.iter % config.feasibility_period) == 0 ||
                        state.fine_regime || state.heuristic == uint256_t{};
        if (at_probe && probe()) {
            SolveOutcome out;
            out.converged = true;
            out.prices = state.prices;
            out.iterations = state.iter;
            out.best_unrealized_ratio = 0.0;
            return out;
        }
        if (state.iter >= config.max_iters) break;
        if (stop && (state.iter % 64) == 0 && stop->load(std::memory_order_acquire) >= 0) break;
        if (config.use_wall_clock && (state.iter % 256) == 0 &&
            std::chrono::steady_clock::now() > deadline)
            break;
        solver_iteration(state, curves, config);
    }

    // timeout: return the visited vector minimizing unrealized utility
    probe();
    SolveOutcome out;
    out.converged = false;
    out.prices = best.best_unrealized_ratio == std::numeric_limits<double>::infinity()
                     ? state.prices
                     : best.prices;
    out.iterations = state.iter;
    out.best_unrealized_ratio = best.best_unrealized_ratio;
    return out;
}

SolveOutcome run(const SolverConfig& config, const MarketCurves& curves,
                 const std::vector<Price>& initial_prices,
                 const std::vector<uint128_t>* prior_volumes) {
    return run_impl(config, curves, initial_prices, prior_volumes, nullptr);
}

SolveOutcome run_multi(const std::vector<SolverConfig>& configs, const MarketCurves& curves,
                       const std::vector<Price>& initial_prices, MultiMode mode,
                       const std::vector<uint128_t>* prior_volumes) {
    if (configs.empty()) throw MalformedError("run_multi needs at least one config");
    if (configs.size() == 1) return run(configs[0], curves, initial_prices, prior_volumes);

    if (mode == MultiMode::Deterministic) {
        std::vector<SolveOutcome> outcomes(configs.size());
        for (size_t i = 0; i < configs.size(); i++) {
            SolverConfig c = configs[i];
            c.use_wall_clock = false;
            outcomes[i] = run(c, curves, initial_prices, prior_volumes);
        }
        size_t pick = 0;
        for (size_t i = 1; i < configs.size(); i++) {
            const auto& a = outcomes[i];
            const auto& b = outcomes[pick];
            if (a.converged != b.converged) {
                if (a.converged) pick = i;
                continue;
            }
            if (!a.converged && a.best_unrealized_ratio < b.best_unrealized_ratio) pick = i;
        }
        return outcomes[pick];
    }

    // racing mode: cooperative abort through the shared winner flag
    std::atomic<int> winner{-1};
    std::vector<SolveOutcome> outcomes(configs.size());
    std::vector<std::thread> threads;
    for (size_t i = 0; i < configs.size(); i++) {
        threads.emplace_back([&, i]() {
            outcomes[i] = run_impl(configs[i], curves, initial_prices, prior_volumes, &winner);
            if (outcomes[i].converged) {
                int expected = -1;
                winner.compare_exchange_strong(expected, static_cast<int>(i));
            }
        });
    }
    for (auto& t : threads) t.join();
    int w = winner.load();
    if (w >= 0) return outcomes[w];
    // none converged: lowest unrealized utility wins
    size_t pick = 0;
    for (size_t i = 1; i < configs.size(); i++)
        if (outcomes[i].best_unrealized_ratio < outcomes[pick].best_unrealized_ratio) pick = i;
    return outcomes[pick];
}

std::vector<SolverConfig> default_config_spread(ApproxParams params) {
    std::vector<SolverConfig> configs;
    for (uint32_t exp : {10u, 13u, 16u, 19u}) {
        SolverConfig c;
        c.step_scale_exp = exp;
        c.params = params;
        c.volume_strategy = exp % 2 == 0 ? SolverConfig::VolumeStrategy::Uniform
                                         : SolverConfig::VolumeStrategy::InRunEwma;
        configs.push_back(c);
    }
    return configs;
}

} // namespace batchdex
