#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

#include "batchdex/core/types.hpp"
#include "batchdex/demand/supply_curve.hpp"
#include "batchdex/lp/clearing_lp.hpp"
#include "batchdex/solver/utility.hpp"

namespace batchdex {

// One solver instance's control parameters. The step size is an integer
// delta scaled by 2^-(32 + step_scale_exp); racing instances differ in
// step_scale_exp and volume strategy.
struct SolverConfig {
    enum class VolumeStrategy : uint8_t { Uniform, PriorBlock, InRunEwma };

    uint32_t step_scale_exp = 13;
    uint32_t step_up_num = 358; // delta <- delta * 358 / 256 on accepted steps
    uint32_t step_down_shift = 1;
    VolumeStrategy volume_strategy = VolumeStrategy::InRunEwma;
    uint64_t max_iters = 50000;
    std::chrono::milliseconds timeout{2000};
    bool use_wall_clock = true; // deterministic runs cut on max_iters only
    uint32_t feasibility_period = 1000;
    ApproxParams params;
};

struct SolverState {
    std::vector<Price> prices;
    uint64_t delta = uint64_t(1) << 32; // radix-32 multiplier
    std::vector<uint128_t> volume_weight; // per asset, value scale
    uint64_t iter = 0;
    DemandVector demand;      // at current prices
    uint256_t heuristic{};    // sum of squared normalized demand
    bool fine_regime = false; // last accepted step was a small one
};

// p_i <- p_i * (1 + z_i * delta * nu_i), clamped to the key price range;
// pure function of (prices, demand, delta, weights).
std::vector<Price> price_step(const SolverState& state, uint32_t step_scale_exp);

uint256_t demand_heuristic(const DemandVector& d);

// One line-search step: accept the candidate and grow delta if the heuristic
// falls, otherwise keep prices and shrink delta.
void solver_iteration(SolverState& state, const MarketCurves& curves, const SolverConfig& config);

struct SolveOutcome {
    bool converged = false;
    std::vector<Price> prices;
    uint64_t iterations = 0;
    double best_unrealized_ratio = std::numeric_limits<double>::infinity();
};

SolveOutcome run(const SolverConfig& config, const MarketCurves& curves,
                 const std::vector<Price>& initial_prices,
                 const std::vector<uint128_t>* prior_volumes = nullptr);

enum class MultiMode : uint8_t { Race, Deterministic };

// Race: one thread per config, first convergence claims the result.
// Deterministic: every config runs to completion on its iteration budget and
// the lowest-unrealized-utility outcome wins (ties by config index).
SolveOutcome run_multi(const std::vector<SolverConfig>& configs, const MarketCurves& curves,
                       const std::vector<Price>& initial_prices, MultiMode mode,
                       const std::vector<uint128_t>* prior_volumes = nullptr);

std::vector<SolverConfig> default_config_spread(ApproxParams params);

} // namespace batchdex
