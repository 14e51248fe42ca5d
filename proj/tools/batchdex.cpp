#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>

#include "batchdex/decomp/decomposition.hpp"
#include "batchdex/gen/workload.hpp"
#include "batchdex/pipeline/pipeline.hpp"

using namespace batchdex;

namespace {

size_t env_threads() {
    if (const char* env = std::getenv("BATCHDEX_THREADS")) {
        long v = std::atol(env);
        if (v >= 1) return static_cast<size_t>(v);
    }
    return 1;
}

struct ChainFile {
    static constexpr char kMagic[8] = {'B', 'D', 'X', 'C', 'H', 'N', '1', '\0'};

    static void write(const std::string& path, const std::vector<Block>& blocks) {
        FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw StorageFailure("cannot open " + path);
        std::fwrite(kMagic, 1, 8, f);
        uint8_t b[8];
        put_be64(b, blocks.size());
        std::fwrite(b, 1, 8, f);
        for (const auto& blk : blocks) {
            auto bytes = blk.serialize();
            put_be64(b, bytes.size());
            std::fwrite(b, 1, 8, f);
            std::fwrite(bytes.data(), 1, bytes.size(), f);
        }
        std::fclose(f);
    }

    static std::vector<Block> read(const std::string& path) {
        FILE* f = std::fopen(path.c_str(), "rb");
        if (!f) throw StorageFailure("cannot open " + path);
        char magic[8];
        uint8_t b[8];
        if (std::fread(magic, 1, 8, f) != 8 || memcmp(magic, kMagic, 8) != 0) {
            std::fclose(f);
            throw MalformedError("bad chain magic");
        }
        if (std::fread(b, 1, 8, f) != 8) { std::fclose(f); throw MalformedError("truncated chain"); }
        uint64_t count = get_be64(b);
        std::vector<Block> blocks;
        for (uint64_t i = 0; i < count; i++) {
            if (std::fread(b, 1, 8, f) != 8) { std::fclose(f); throw MalformedError("truncated chain"); }
            uint64_t len = get_be64(b);
            std::vector<uint8_t> bytes(len);
            if (std::fread(bytes.data(), 1, len, f) != len) {
                std::fclose(f);
                throw MalformedError("truncated chain block");
            }
            blocks.push_back(Block::deserialize(bytes));
        }
        std::fclose(f);
        return blocks;
    }
};

std::string hex(const Digest& d, size_t n = 8) {
    std::string s;
    char buf[4];
    for (size_t i = 0; i < n; i++) {
        std::snprintf(buf, sizeof buf, "%02x", d[i]);
        s += buf;
    }
    return s;
}

PipelineConfig make_pipeline_config(size_t threads, int eps_exp, int mu_exp, bool deterministic,
                                    bool assisted, const std::string& snapshot_dir,
                                    uint64_t snapshot_period) {
    PipelineConfig cfg;
    cfg.threads = threads;
    cfg.params.eps_exp = static_cast<uint8_t>(eps_exp);
    cfg.params.mu_exp = static_cast<uint8_t>(mu_exp);
    cfg.solver_mode = deterministic ? MultiMode::Deterministic : MultiMode::Race;
    cfg.deterministic_filter = !assisted;
    cfg.snapshot_dir = snapshot_dir;
    cfg.snapshot_period = snapshot_period;
    cfg.solver_configs = default_config_spread(cfg.params);
    if (deterministic) {
        for (auto& c : cfg.solver_configs) c.use_wall_clock = false;
    }
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"batch-clearing exchange engine"};
    app.require_subcommand(1);

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "generate a workload file");
    std::string gen_out = "workload.bdx";
    int gen_assets = 8;
    uint64_t gen_accounts = 1000;
    uint64_t gen_blocks = 10;
    uint64_t gen_block_size = 2000;
    uint64_t gen_seed = 1;
    std::string gen_mode = "standard";
    double gen_vol_sigma = 0.35;
    gen->add_option("--out", gen_out, "output file");
    gen->add_option("--assets", gen_assets, "asset count");
    gen->add_option("--accounts", gen_accounts, "account count");
    gen->add_option("--blocks", gen_blocks, "block count");
    gen->add_option("--block-size", gen_block_size, "transactions per block");
    gen->add_option("--seed", gen_seed, "deterministic seed");
    gen->add_option("--mode", gen_mode, "standard | robustness | payments");
    gen->add_option("--vol-sigma", gen_vol_sigma, "robustness price volatility");

    // ---- solve ----
    auto* solve = app.add_subcommand("solve", "clear one batch and report prices");
    std::string solve_in;
    size_t solve_block = 0;
    int solve_eps = 15, solve_mu = 10;
    size_t solve_threads = env_threads();
    solve->add_option("--workload", solve_in, "workload file")->required();
    solve->add_option("--block", solve_block, "block index to clear");
    solve->add_option("--eps-exp", solve_eps, "commission = 2^-eps-exp (0 = none)");
    solve->add_option("--mu-exp", solve_mu, "execution slack = 2^-mu-exp");
    solve->add_option("--threads", solve_threads, "worker threads");

    // ---- run ----
    auto* run_cmd = app.add_subcommand("run", "drive the block pipeline over a workload");
    std::string run_in, run_chain_out, run_snapshot_dir;
    size_t run_threads = env_threads();
    int run_eps = 15, run_mu = 10;
    bool run_assisted = false, run_race = false;
    uint64_t run_snapshot_period = 5;
    run_cmd->add_option("--workload", run_in, "workload file")->required();
    run_cmd->add_option("--threads", run_threads, "worker threads");
    run_cmd->add_option("--eps-exp", run_eps, "commission exponent");
    run_cmd->add_option("--mu-exp", run_mu, "execution slack exponent");
    run_cmd->add_flag("--proposer-assisted", run_assisted,
                      "proposer-assisted overdraft prevention instead of deterministic filtering");
    run_cmd->add_flag("--race", run_race, "race solver instances (nondeterministic)");
    run_cmd->add_option("--chain-out", run_chain_out, "write proposed blocks to a chain file");
    run_cmd->add_option("--snapshot-dir", run_snapshot_dir, "persist snapshots here");
    run_cmd->add_option("--snapshot-period", run_snapshot_period, "blocks between snapshots");

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "throughput CSV over thread counts");
    std::string bench_in, bench_threads = "1,2,4";
    int bench_eps = 15, bench_mu = 10;
    bench->add_option("--workload", bench_in, "workload file")->required();
    bench->add_option("--threads", bench_threads, "comma-separated thread counts");
    bench->add_option("--eps-exp", bench_eps, "commission exponent");
    bench->add_option("--mu-exp", bench_mu, "execution slack exponent");

    // ---- verify ----
    auto* verify = app.add_subcommand("verify", "replay a chain file against its headers");
    std::string verify_workload, verify_chain;
    size_t verify_threads = env_threads();
    int verify_eps = 15, verify_mu = 10;
    bool verify_assisted = false;
    verify->add_option("--workload", verify_workload, "workload file (for genesis)")->required();
    verify->add_option("--chain", verify_chain, "chain file")->required();
    verify->add_option("--threads", verify_threads, "worker threads");
    verify->add_option("--eps-exp", verify_eps, "commission exponent");
    verify->add_option("--mu-exp", verify_mu, "execution slack exponent");
    verify->add_flag("--proposer-assisted", verify_assisted, "validation mode");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            MarketModel model;
            model.n_assets = static_cast<uint16_t>(gen_assets);
            model.account_count = gen_accounts;
            WorkloadGen generator(model, gen_seed);
            std::vector<std::vector<Transaction>> blocks;
            if (gen_mode == "robustness") {
                VolatilityModel vol;
                vol.base = model;
                vol.price_sigma = gen_vol_sigma;
                blocks = generator.gen_robustness_series(vol, gen_blocks, gen_block_size);
            } else if (gen_mode == "payments") {
                for (uint64_t b = 0; b < gen_blocks; b++)
                    blocks.push_back(generator.gen_payment_block(gen_block_size));
            } else if (gen_mode == "standard") {
                for (uint64_t b = 0; b < gen_blocks; b++)
                    blocks.push_back(generator.gen_block(gen_block_size));
            } else {
                std::fprintf(stderr, "unknown mode %s\n", gen_mode.c_str());
                return 2;
            }
            write_workload_file(gen_out, AssetRegistry::uniform(model.n_assets),
                                generator.genesis_spec(), blocks);
            std::printf("wrote %s: %llu blocks x %llu txs, %d assets\n", gen_out.c_str(),
                        (unsigned long long)gen_blocks, (unsigned long long)gen_block_size,
                        gen_assets);
            return 0;
        }

        if (*solve) {
            WorkloadFile wf = read_workload_file(solve_in);
            if (solve_block >= wf.blocks.size()) {
                std::fprintf(stderr, "block index out of range\n");
                return 2;
            }
            auto state = std::make_unique<BlockState>(wf.registry);
            apply_genesis(*state, wf.genesis);
            PipelineConfig cfg = make_pipeline_config(solve_threads, solve_eps, solve_mu, true,
                                                      false, "", 0);
            Pipeline pipeline(std::move(state), cfg);

            // run preceding blocks to reach the requested batch
            for (size_t b = 0; b < solve_block; b++) pipeline.propose(wf.blocks[b]);

            FilterResult filtered = filter_block(wf.blocks[solve_block], pipeline.state(), cfg.threads);
            BlockExecutor executor(pipeline.state(), cfg.threads);
            executor.phase1(filtered.kept);
            MarketCurves curves = MarketCurves::build(pipeline.state().books(), cfg.threads);
            SolveOutcome outcome = run_multi(cfg.solver_configs, curves,
                                             pipeline.state().last_prices(), cfg.solver_mode);
            BoundsSet bounds = build_bounds(curves, outcome.prices, cfg.params);
            FlowSolution sol = solve_clearing(bounds, cfg.params);
            std::vector<uint64_t> x = extract_trade_amounts(bounds, sol, cfg.params);
            UtilityReport rep = utility_report(curves, outcome.prices, x, cfg.params);

            std::printf("converged: %s\n", outcome.converged ? "yes" : "no (best-effort prices)");
            std::printf("asset price price/p0\n");
            for (uint16_t a = 0; a < pipeline.state().n_assets(); a++) {
                double p = outcome.prices[a].to_double();
                std::printf("%-5s %.8f %.8f\n",
                            pipeline.state().registry().entry(AssetId{a}).symbol.c_str(), p,
                            p / outcome.prices[0].to_double());
            }
            uint64_t traded_pairs = 0;
            uint128_t total_x = 0;
            for (uint64_t v : x) {
                if (v > 0) traded_pairs++;
                total_x += v;
            }
            std::printf("pairs traded: %llu, units sold: %llu\n", (unsigned long long)traded_pairs,
                        (unsigned long long)total_x);
            std::printf("unrealized/realized utility: %.6f%%\n", rep.ratio() * 100.0);
            return 0;
        }

        if (*run_cmd) {
            WorkloadFile wf = read_workload_file(run_in);
            auto state = std::make_unique<BlockState>(wf.registry);
            apply_genesis(*state, wf.genesis);
            PipelineConfig cfg = make_pipeline_config(run_threads, run_eps, run_mu, !run_race,
                                                      run_assisted, run_snapshot_dir,
                                                      run_snapshot_period);
            Pipeline pipeline(std::move(state), cfg);
            std::vector<Block> chain;
            auto start = std::chrono::steady_clock::now();
            uint64_t total_txs = 0;
            for (size_t b = 0; b < wf.blocks.size(); b++) {
                Block block = pipeline.propose(wf.blocks[b]);
                pipeline.maybe_snapshot();
                total_txs += wf.blocks[b].size();
                std::printf("block %llu: txs=%zu offers=%llu root=%s %s\n",
                            (unsigned long long)block.header.height, wf.blocks[b].size(),
                            (unsigned long long)pipeline.state().open_offer_count(),
                            hex(block.header.state_root).c_str(),
                            block.header.converged ? "converged" : "timeout");
                if (!run_chain_out.empty()) chain.push_back(std::move(block));
            }
            double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::printf("applied %llu txs in %.3fs (%.0f tps)\n", (unsigned long long)total_txs,
                        secs, total_txs / secs);
            if (!run_chain_out.empty()) ChainFile::write(run_chain_out, chain);
            return 0;
        }

        if (*bench) {
            WorkloadFile wf = read_workload_file(bench_in);
            std::printf("threads,txs,seconds,tps\n");
            std::string spec = bench_threads;
            for (auto& c : spec) if (c == ',') c = ' ';
            std::istringstream ss(spec);
            size_t t;
            while (ss >> t) {
                auto state = std::make_unique<BlockState>(wf.registry);
                apply_genesis(*state, wf.genesis);
                PipelineConfig cfg = make_pipeline_config(t, bench_eps, bench_mu, true, false, "", 0);
                Pipeline pipeline(std::move(state), cfg);
                uint64_t total = 0;
                auto start = std::chrono::steady_clock::now();
                for (const auto& block : wf.blocks) {
                    pipeline.propose(block);
                    total += block.size();
                }
                double secs =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                std::printf("%zu,%llu,%.3f,%.0f\n", t, (unsigned long long)total, secs,
                            total / secs);
            }
            return 0;
        }

        if (*verify) {
            WorkloadFile wf = read_workload_file(verify_workload);
            auto chain = ChainFile::read(verify_chain);
            auto state = std::make_unique<BlockState>(wf.registry);
            apply_genesis(*state, wf.genesis);
            PipelineConfig cfg = make_pipeline_config(verify_threads, verify_eps, verify_mu, true,
                                                      verify_assisted, "", 0);
            Pipeline pipeline(std::move(state), cfg);
            for (size_t i = 0; i < chain.size(); i++) {
                ValidateResult r = pipeline.validate(chain[i]);
                if (r != ValidateResult::Accept) {
                    std::fprintf(stderr, "block %zu rejected: %s\n", i, validate_result_name(r));
                    return 1;
                }
                std::printf("block %zu: accept root=%s\n", i,
                            hex(chain[i].header.state_root).c_str());
            }
            std::printf("chain verified: %zu blocks\n", chain.size());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
