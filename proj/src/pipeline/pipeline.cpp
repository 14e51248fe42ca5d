#include "batchdex/pipeline/pipeline.hpp"

#include <filesystem>

namespace batchdex {

const char* validate_result_name(ValidateResult r) {
    switch (r) {
    case ValidateResult::Accept: return "accept";
    case ValidateResult::RejectMalformedHeader: return "malformed-header";
    case ValidateResult::RejectBadClearing: return "bad-clearing";
    case ValidateResult::RejectOverdraft: return "overdraft";
    case ValidateResult::RejectRootMismatch: return "root-mismatch";
    }
    return "unknown";
}

Pipeline::Pipeline(std::unique_ptr<BlockState> state, PipelineConfig config)
    : state_(std::move(state)), config_(std::move(config)) {
    if (config_.solver_configs.empty())
        config_.solver_configs = default_config_spread(config_.params);
    last_header_.height = state_->height();
    last_header_.state_root = state_->state_root();
}

Pipeline::~Pipeline() { wait_for_snapshot(); }

void Pipeline::wait_for_snapshot() {
    if (snapshot_job_.valid()) snapshot_job_.get();
}

Pipeline::ClearingData Pipeline::clear_at_prices(const std::vector<Price>& prices,
                                                 const MarketCurves& curves, bool converged) {
    ClearingData out;
    out.bounds = build_bounds(curves, prices, config_.params);
    FlowSolution sol = solve_clearing(out.bounds, config_.params);
    std::vector<uint64_t> x;
    try {
        x = extract_trade_amounts(out.bounds, sol, config_.params);
    } catch (const ConservationViolation&) {
        // retry with zero floors; repair can then always finish
        sol = solve_max_circulation(out.bounds, false);
        x = extract_trade_amounts(out.bounds, sol, config_.params);
    }
    out.plan.prices = prices;
    out.plan.y = sol.y;
    out.plan.x = std::move(x);
    out.plan.params = config_.params;
    out.plan.used_lower_bounds = sol.used_lower_bounds;
    out.plan.converged = converged;
    return out;
}

Block Pipeline::propose(const std::vector<Transaction>& mempool) {
    FilterResult filtered = filter_block(mempool, *state_, config_.threads);

    BlockExecutor executor(*state_, config_.threads);
    executor.phase1(filtered.kept);

    MarketCurves curves = MarketCurves::build(state_->books(), config_.threads);
    SolveOutcome outcome = run_multi(config_.solver_configs, curves, state_->last_prices(),
                                     config_.solver_mode, &state_->last_volumes());

    ClearingData clearing = clear_at_prices(outcome.prices, curves, outcome.converged);
    ExecutionReport report = executor.phase3_propose(clearing.plan);
    report.verify_conservation();
    Digest root = executor.commit(clearing.plan, report);

    Block block;
    block.txs = mempool;
    block.header.height = state_->height();
    block.header.prev_hash = last_header_.hash();
    block.header.state_root = root;
    block.header.tx_set_hash = tx_set_hash(mempool);
    block.header.orderbook_roots = state_->books().root_hashes();
    block.header.prices = clearing.plan.prices;
    block.header.y = clearing.plan.y;
    block.header.eps_exp = config_.params.eps_exp;
    block.header.mu_exp = config_.params.mu_exp;
    block.header.used_lower_bounds = clearing.plan.used_lower_bounds;
    block.header.converged = clearing.plan.converged;
    block.header.marginal_keys = clearing.plan.marginal_keys;
    block.header.marginal_sold = clearing.plan.marginal_sold;
    block.header.any_executed = clearing.plan.any_executed;

    last_header_ = block.header;
    return block;
}

ValidateResult Pipeline::validate(const Block& block) {
    const BlockHeader& h = block.header;
    const uint16_t n = state_->n_assets();
    if (h.prices.size() != n || h.y.size() != state_->books().pair_count() ||
        h.marginal_keys.size() != h.y.size() || h.eps_exp != config_.params.eps_exp ||
        h.mu_exp != config_.params.mu_exp || h.height != state_->height() + 1 ||
        h.orderbook_roots.size() != state_->books().pair_count())
        return ValidateResult::RejectMalformedHeader;
    if (h.tx_set_hash != tx_set_hash(block.txs)) return ValidateResult::RejectMalformedHeader;
    for (Price p : h.prices)
        if (p.raw() < Price::kMinRaw || p.raw() >= Price::kMaxRaw)
            return ValidateResult::RejectMalformedHeader;

    wait_for_snapshot();
    std::unique_ptr<BlockState> work = Snapshot::clone(*state_);

    std::vector<Transaction> kept;
    if (config_.deterministic_filter) {
        kept = filter_block(block.txs, *work, config_.threads).kept;
    } else {
        // proposer-assisted: the batch itself must be conflict-free
        FilterResult audit = filter_block(block.txs, *work, config_.threads);
        if (!audit.removed.empty()) return ValidateResult::RejectOverdraft;
        kept = block.txs;
    }

    try {
        BlockExecutor executor(*work, config_.threads);
        executor.phase1(kept);

        MarketCurves curves = MarketCurves::build(work->books(), config_.threads);
        BoundsSet bounds = build_bounds(curves, h.prices, config_.params);

        // Appendix-style clearing checks on the header's flows
        uint128_t eps_den = uint128_t(1) << config_.params.eps_exp;
        uint128_t eps_num = config_.params.zero_commission() ? 1 : eps_den - 1;
        if (config_.params.zero_commission()) eps_den = 1;
        const bool dbg = std::getenv("BATCHDEX_DEBUG_VALIDATE") != nullptr;
        for (uint32_t idx = 0; idx < bounds.pair_count(); idx++) {
            if (h.y[idx] > bounds.pairs[idx].upper) {
                if (dbg) std::fprintf(stderr, "dbg gate: y[%u] above upper\n", idx);
                return ValidateResult::RejectBadClearing;
            }
            if (h.used_lower_bounds && h.y[idx] < bounds.pairs[idx].lower) {
                if (dbg) std::fprintf(stderr, "dbg gate: y[%u] below lower\n", idx);
                return ValidateResult::RejectBadClearing;
            }
        }
        if (!h.used_lower_bounds && feasibility_probe(bounds)) {
            if (dbg) std::fprintf(stderr, "dbg gate: floors feasible but unclaimed\n");
            return ValidateResult::RejectBadClearing; // proposer skipped feasible floors
        }
        for (uint16_t a = 0; a < n; a++) {
            uint128_t out_flow = 0, in_flow = 0;
            for (uint16_t b = 0; b < n; b++) {
                if (a == b) continue;
                out_flow += h.y[pair_index(n, AssetId{a}, AssetId{b})];
                in_flow += h.y[pair_index(n, AssetId{b}, AssetId{a})];
            }
            // out >= (1-eps) * in up to per-pair flooring of the rational
            // solve (< 1 unit per incident pair); executed integer amounts
            // are audited exactly in phase 3
            uint128_t slack = uint128_t(n) * eps_den;
            if (out_flow * eps_den + slack < in_flow * eps_num) {
                if (dbg) std::fprintf(stderr, "dbg gate: conservation at asset %u\n", a);
                return ValidateResult::RejectBadClearing;
            }
        }

        FlowSolution sol;
        sol.y = h.y;
        sol.feasible = true;
        sol.used_lower_bounds = h.used_lower_bounds;
        ClearingPlan plan;
        plan.prices = h.prices;
        plan.y = h.y;
        plan.x = extract_trade_amounts(bounds, sol, config_.params);
        plan.params = config_.params;
        plan.used_lower_bounds = h.used_lower_bounds;
        plan.converged = h.converged;
        plan.marginal_keys = h.marginal_keys;
        plan.marginal_sold = h.marginal_sold;
        plan.any_executed = h.any_executed;

        ExecutionReport report = executor.phase3_validate(plan);
        report.verify_conservation();

        ClearingPlan commit_plan = plan;
        Digest root = executor.commit(commit_plan, report);

        if (std::getenv("BATCHDEX_DEBUG_VALIDATE")) {
            std::fprintf(stderr, "dbg validate: kept=%zu root=%02x%02x hdr=%02x%02x\n", kept.size(),
                         root[0], root[1], h.state_root[0], h.state_root[1]);
            auto vb = work->books().root_hashes();
            for (size_t i = 0; i < vb.size(); i++)
                if (vb[i] != h.orderbook_roots[i])
                    std::fprintf(stderr, "dbg book %zu differs live=%llu x=%llu any=%d\n", i,
                                 (unsigned long long)work->books().book(i).live_size(),
                                 (unsigned long long)plan.x[i], (int)h.any_executed[i]);
        }
        if (root != h.state_root) return ValidateResult::RejectRootMismatch;
        if (work->books().root_hashes() != h.orderbook_roots)
            return ValidateResult::RejectRootMismatch;

        state_ = std::move(work);
        last_header_ = h;
        return ValidateResult::Accept;
    } catch (const MarginalKeyMismatch& e) {
        if (std::getenv("BATCHDEX_DEBUG_VALIDATE"))
            std::fprintf(stderr, "dbg gate: marginal-key: %s\n", e.what());
        return ValidateResult::RejectBadClearing;
    } catch (const ConservationViolation& e) {
        if (std::getenv("BATCHDEX_DEBUG_VALIDATE"))
            std::fprintf(stderr, "dbg gate: conservation: %s\n", e.what());
        return ValidateResult::RejectBadClearing;
    } catch (const InsufficientSupplyError& e) {
        if (std::getenv("BATCHDEX_DEBUG_VALIDATE"))
            std::fprintf(stderr, "dbg gate: supply: %s\n", e.what());
        return ValidateResult::RejectBadClearing;
    }
}

std::string Pipeline::snapshot_path() const {
    return config_.snapshot_dir + "/state.snap";
}

void Pipeline::maybe_snapshot(const Snapshot::WriteFault& fault) {
    if (config_.snapshot_dir.empty() || config_.snapshot_period == 0) return;
    if (state_->height() % config_.snapshot_period != 0) return;
    wait_for_snapshot();
    auto bytes = std::make_shared<std::vector<uint8_t>>(Snapshot::serialize(*state_));
    std::string path = snapshot_path();
    if (config_.async_snapshot && !fault) {
        snapshot_job_ = std::async(std::launch::async, [bytes, path]() {
            Snapshot::write_file(path, *bytes);
        });
    } else {
        Snapshot::write_file(path, *bytes, fault);
    }
}

std::unique_ptr<BlockState> Pipeline::recover(const std::string& snapshot_dir,
                                              const AssetRegistry& registry) {
    std::string path = snapshot_dir + "/state.snap";
    if (!std::filesystem::exists(path)) {
        return std::make_unique<BlockState>(registry);
    }
    auto bytes = Snapshot::read_file(path);
    return Snapshot::restore(bytes);
}

} // namespace batchdex
