#pragma once

#include <future>
#include <memory>
#include <string>

#include "batchdex/pipeline/header.hpp"
#include "batchdex/pipeline/snapshot.hpp"
#include "batchdex/solver/tatonnement.hpp"

namespace batchdex {

struct PipelineConfig {
    size_t threads = 1;
    MultiMode solver_mode = MultiMode::Deterministic;
    std::vector<SolverConfig> solver_configs; // empty = default spread
    ApproxParams params;
    bool deterministic_filter = true; // false = proposer-assisted mode
    uint64_t snapshot_period = 5;
    std::string snapshot_dir; // empty disables persistence
    bool async_snapshot = false;
};

enum class ValidateResult : uint8_t {
    Accept,
    RejectMalformedHeader,
    RejectBadClearing,
    RejectOverdraft,
    RejectRootMismatch,
};

const char* validate_result_name(ValidateResult r);

// The propose -> solve -> execute -> commit loop for a single node. The
// consensus layer is out of scope; validate() plays the follower role.
class Pipeline {
  public:
    Pipeline(std::unique_ptr<BlockState> state, PipelineConfig config);
    ~Pipeline();

    BlockState& state() { return *state_; }
    const PipelineConfig& config() const { return config_; }
    const BlockHeader& last_header() const { return last_header_; }

    // filter -> phase1 -> curves -> solver -> LP -> phase3 -> header
    Block propose(const std::vector<Transaction>& mempool);

    // Re-runs filtering and execution from the header's solver payload (no
    // price computation); applies on a clone and swaps it in when accepted.
    ValidateResult validate(const Block& block);

    // Every snapshot_period blocks: canonical container, temp+fsync+rename.
    void maybe_snapshot(const Snapshot::WriteFault& fault = nullptr);
    std::string snapshot_path() const;
    void wait_for_snapshot();

    static std::unique_ptr<BlockState> recover(const std::string& snapshot_dir,
                                               const AssetRegistry& registry);

  private:
    struct ClearingData {
        ClearingPlan plan;
        BoundsSet bounds;
    };
    ClearingData clear_at_prices(const std::vector<Price>& prices, const MarketCurves& curves,
                                 bool converged);

    std::unique_ptr<BlockState> state_;
    PipelineConfig config_;
    BlockHeader last_header_;
    std::future<void> snapshot_job_;
};

} // namespace batchdex
