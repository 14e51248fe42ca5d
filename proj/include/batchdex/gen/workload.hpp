#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "batchdex/core/tx.hpp"
#include "batchdex/engine/state.hpp"

namespace batchdex {

// splitmix64: tiny, documented, identical across platforms. All generated
// workloads are pure functions of (model, seed).
class Rng {
  public:
    explicit Rng(uint64_t seed) : s_(seed) {}
    uint64_t next() {
        s_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = s_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double normal();

  private:
    uint64_t s_;
};

// Latent per-asset values evolve by geometric Brownian motion; traders quote
// limit prices near the current valuation ratio.
struct MarketModel {
    uint16_t n_assets = 8;
    uint64_t account_count = 1000;
    double valuation_sigma = 0.05;
    double popularity_exponent = 1.2; // power-law account selection
    double mix_offer = 0.72;
    double mix_cancel = 0.14;
    double mix_payment = 0.12;
    double mix_create = 0.02;
    double limit_jitter = 0.02; // +-2% around the valuation ratio
    uint64_t genesis_balance = 1'000'000'000;
    double poor_account_fraction = 0.02; // funded too thinly; filtering fodder
    uint64_t min_endowment = 100;
    uint64_t max_endowment = 10'000;
    uint64_t fee = 1;
};

// Re-drawn per block for the volatile robustness series: trading activity
// concentrates on assets by volume weight while price paths swing.
struct VolatilityModel {
    MarketModel base;
    double volume_sigma = 1.5; // lognormal volume weight spread
    double price_sigma = 0.35; // per-block valuation step
};

// Genesis funding is part of the workload so every consumer reconstructs the
// same initial state: accounts 1..count, each funded `balance` of every
// asset, except a deterministic poor subset (splitmix64 seed 0xF00D).
struct GenesisSpec {
    uint64_t account_count = 0;
    uint64_t balance = 0;
    uint32_t poor_ppm = 0; // parts per million
    uint64_t poor_balance = 10;
};

void apply_genesis(BlockState& state, const GenesisSpec& genesis);

class WorkloadGen {
  public:
    WorkloadGen(MarketModel model, uint64_t seed);

    const MarketModel& model() const { return model_; }

    // Accounts 1..account_count funded with every asset (a few thinly).
    void fund_genesis(BlockState& state);
    GenesisSpec genesis_spec() const;

    std::vector<Transaction> gen_block(size_t size);

    // Payment-only stream for the scalability benchmark.
    std::vector<Transaction> gen_payment_block(size_t size);

    std::vector<std::vector<Transaction>> gen_robustness_series(const VolatilityModel& vol,
                                                                size_t blocks,
                                                                size_t txs_per_block);

  private:
    Transaction make_offer(AccountId account);
    AccountId pick_account();
    uint64_t next_seq(AccountId account);

    MarketModel model_;
    Rng rng_;
    std::vector<double> valuations_;
    std::vector<double> volume_weights_;
    std::vector<uint64_t> next_seq_;
    std::vector<uint32_t> used_this_block_;
    std::vector<std::vector<uint64_t>> open_offers_; // per account: seq numbers
    uint64_t next_new_account_;
};

struct WorkloadFile {
    AssetRegistry registry;
    GenesisSpec genesis;
    std::vector<std::vector<Transaction>> blocks;
};

// Workload container: magic, registry, genesis, length-prefixed tx batches.
void write_workload_file(const std::string& path, const AssetRegistry& registry,
                         const GenesisSpec& genesis,
                         const std::vector<std::vector<Transaction>>& blocks);
WorkloadFile read_workload_file(const std::string& path);

// Duplicate-injection helper for filter benchmarks: appends exact copies of
// randomly chosen transactions until the batch grows by `fraction`.
std::vector<Transaction> inject_duplicates(std::vector<Transaction> txs, double fraction,
                                           uint64_t seed);

} // namespace batchdex
