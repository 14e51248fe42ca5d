#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <filesystem>

#include "oracle/oracle.hpp"
#include "test_util.hpp"

#include "batchdex/pipeline/pipeline.hpp"

using namespace batchdex;

namespace {

PipelineConfig det_config(size_t threads = 1) {
    PipelineConfig cfg;
    cfg.threads = threads;
    cfg.params.eps_exp = 15;
    cfg.params.mu_exp = 10;
    cfg.solver_mode = MultiMode::Deterministic;
    cfg.solver_configs = default_config_spread(cfg.params);
    for (auto& c : cfg.solver_configs) {
        c.use_wall_clock = false;
        c.max_iters = 6000;
    }
    return cfg;
}

std::unique_ptr<BlockState> genesis_state(const MarketModel& model, uint64_t seed) {
    auto state = std::make_unique<BlockState>(AssetRegistry::uniform(model.n_assets));
    WorkloadGen gen(model, seed);
    gen.fund_genesis(*state);
    return state;
}

MarketModel small_model() {
    MarketModel model;
    model.n_assets = 4;
    model.account_count = 150;
    return model;
}

} // namespace

TEST_CASE("propose then validate round trips bit-exactly") {
    MarketModel model = small_model();
    WorkloadGen gen(model, 3);
    Pipeline proposer(genesis_state(model, 3), det_config(2));
    Pipeline validator(genesis_state(model, 3), det_config(1));

    for (int b = 0; b < 5; b++) {
        Block block = proposer.propose(gen.gen_block(600));
        CHECK(validator.validate(block) == ValidateResult::Accept);
        CHECK(validator.state().state_root() == block.header.state_root);
    }
}

TEST_CASE("empty mempool proposes a valid empty block") {
    MarketModel model = small_model();
    Pipeline proposer(genesis_state(model, 3), det_config(1));
    Pipeline validator(genesis_state(model, 3), det_config(1));
    Digest before = proposer.state().state_root();
    Block block = proposer.propose({});
    CHECK(block.header.height == 1);
    // only the height advanced
    CHECK(block.header.state_root != before);
    CHECK(validator.validate(block) == ValidateResult::Accept);
    CHECK(proposer.state().open_offer_count() == 0);
}

TEST_CASE("header serialization round trips") {
    MarketModel model = small_model();
    WorkloadGen gen(model, 5);
    Pipeline proposer(genesis_state(model, 5), det_config(1));
    Block block = proposer.propose(gen.gen_block(300));
    auto bytes = block.header.serialize();
    BlockHeader round = BlockHeader::deserialize(bytes);
    CHECK(round == block.header);
    auto block_bytes = block.serialize();
    Block round_block = Block::deserialize(block_bytes);
    CHECK(round_block.header == block.header);
    CHECK(round_block.txs == block.txs);
    CHECK_THROWS_AS(BlockHeader::deserialize(std::span(bytes.data(), bytes.size() - 1)),
                    MalformedError);
}

TEST_CASE("tampered headers are rejected with the right reason") {
    MarketModel model = small_model();
    WorkloadGen gen(model, 7);
    Pipeline proposer(genesis_state(model, 7), det_config(1));
    Block good = proposer.propose(gen.gen_block(500));

    auto fresh_validator = [&]() { return Pipeline(genesis_state(model, 7), det_config(1)); };

    SUBCASE("bit flip in the state root") {
        Block bad = good;
        bad.header.state_root[0] ^= 1;
        auto v = fresh_validator();
        CHECK(v.validate(bad) == ValidateResult::RejectRootMismatch);
    }
    SUBCASE("inflated flow beyond the eligible bound") {
        Block bad = good;
        uint32_t target = 0;
        for (uint32_t i = 0; i < bad.header.y.size(); i++)
            if (bad.header.y[i] > 0) target = i;
        bad.header.y[target] += uint128_t(1) << 48;
        auto v = fresh_validator();
        auto r = v.validate(bad);
        CHECK((r == ValidateResult::RejectBadClearing || r == ValidateResult::RejectRootMismatch));
    }
    SUBCASE("prices moved against a resting offer's limit") {
        Block bad = good;
        bad.header.prices[0] = Price::from_raw(bad.header.prices[0].raw() * 2);
        auto v = fresh_validator();
        CHECK(v.validate(bad) != ValidateResult::Accept);
    }
    SUBCASE("marginal key tampering") {
        Block bad = good;
        bool mutated = false;
        for (uint32_t i = 0; i < bad.header.any_executed.size(); i++) {
            if (bad.header.any_executed[i]) {
                bad.header.marginal_sold[i] += 1;
                mutated = true;
                break;
            }
        }
        if (mutated) {
            auto v = fresh_validator();
            CHECK(v.validate(bad) != ValidateResult::Accept);
        }
    }
    SUBCASE("wrong height") {
        Block bad = good;
        bad.header.height = 99;
        auto v = fresh_validator();
        CHECK(v.validate(bad) == ValidateResult::RejectMalformedHeader);
    }
    SUBCASE("tx set hash mismatch") {
        Block bad = good;
        bad.txs.pop_back();
        auto v = fresh_validator();
        CHECK(v.validate(bad) == ValidateResult::RejectMalformedHeader);
    }
}

TEST_CASE("snapshot persistence: periodic commit is observationally neutral") {
    MarketModel model = small_model();
    WorkloadGen gen1(model, 11), gen2(model, 11);

    std::string dir1 = "/tmp/bdx_snap_k1", dir2 = "/tmp/bdx_snap_k5";
    std::filesystem::create_directories(dir1);
    std::filesystem::create_directories(dir2);

    PipelineConfig c1 = det_config(1);
    c1.snapshot_dir = dir1;
    c1.snapshot_period = 1;
    PipelineConfig c5 = det_config(1);
    c5.snapshot_dir = dir2;
    c5.snapshot_period = 5;

    Pipeline p1(genesis_state(model, 11), c1);
    Pipeline p5(genesis_state(model, 11), c5);
    for (int b = 0; b < 10; b++) {
        auto batch = gen1.gen_block(200);
        auto batch2 = gen2.gen_block(200);
        REQUIRE(batch == batch2);
        Block b1 = p1.propose(batch);
        p1.maybe_snapshot();
        Block b5 = p5.propose(batch2);
        p5.maybe_snapshot();
        CHECK(b1.header.state_root == b5.header.state_root);
    }
    p1.wait_for_snapshot();
    p5.wait_for_snapshot();

    // recover from the K=5 snapshot and replay the tail
    auto recovered = Pipeline::recover(dir2, AssetRegistry::uniform(model.n_assets));
    CHECK(recovered->height() == 10);
    CHECK(recovered->state_root() == p5.state().state_root());
}

TEST_CASE("crash mid-write leaves the previous snapshot intact") {
    MarketModel model = small_model();
    WorkloadGen gen(model, 13);
    std::string dir = "/tmp/bdx_snap_crash";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);

    PipelineConfig cfg = det_config(1);
    cfg.snapshot_dir = dir;
    cfg.snapshot_period = 1;
    Pipeline p(genesis_state(model, 13), cfg);

    p.propose(gen.gen_block(200));
    p.maybe_snapshot();
    auto good_bytes = Snapshot::read_file(dir + "/state.snap");

    p.propose(gen.gen_block(200));
    // fault injection: die after some bytes of the temp file
    bool threw = false;
    try {
        p.maybe_snapshot([](size_t written) {
            if (written >= 4096) throw StorageFailure("injected crash");
        });
    } catch (const StorageFailure&) {
        threw = true;
    }
    CHECK(threw);
    // the published snapshot is still the old one and still valid
    auto bytes = Snapshot::read_file(dir + "/state.snap");
    CHECK(bytes == good_bytes);
    auto restored = Snapshot::restore(bytes);
    CHECK(restored->height() == 1);
}

TEST_CASE("corrupted snapshot bytes fail the checksum") {
    MarketModel model = small_model();
    auto state = genesis_state(model, 17);
    auto bytes = Snapshot::serialize(*state);
    bytes[bytes.size() / 2] ^= 0xFF;
    CHECK_THROWS_AS(Snapshot::restore(bytes), MalformedError);
}

TEST_CASE("chain determinism: two pipelines, identical header sequences") {
    MarketModel model = small_model();
    WorkloadGen gen_a(model, 19), gen_b(model, 19);
    Pipeline a(genesis_state(model, 19), det_config(2));
    Pipeline b(genesis_state(model, 19), det_config(1)); // different thread count

    for (int i = 0; i < 4; i++) {
        Block ba = a.propose(gen_a.gen_block(400));
        Block bb = b.propose(gen_b.gen_block(400));
        CHECK(ba.header == bb.header);
    }
}

TEST_CASE("validation is cheaper than proposal") {
    MarketModel model = small_model();
    model.n_assets = 6;
    model.account_count = 400;
    WorkloadGen gen(model, 23);
    Pipeline proposer(genesis_state(model, 23), det_config(2));
    Pipeline validator(genesis_state(model, 23), det_config(2));

    double propose_time = 0, validate_time = 0;
    for (int b = 0; b < 3; b++) {
        auto batch = gen.gen_block(4000);
        auto t0 = std::chrono::steady_clock::now();
        Block block = proposer.propose(batch);
        auto t1 = std::chrono::steady_clock::now();
        REQUIRE(validator.validate(block) == ValidateResult::Accept);
        auto t2 = std::chrono::steady_clock::now();
        propose_time += std::chrono::duration<double>(t1 - t0).count();
        validate_time += std::chrono::duration<double>(t2 - t1).count();
    }
    CHECK(validate_time < propose_time);
}

TEST_CASE("proposer-assisted mode rejects conflicting batches outright") {
    MarketModel model = small_model();
    WorkloadGen gen(model, 29);
    PipelineConfig assisted = det_config(1);
    assisted.deterministic_filter = false;

    Pipeline proposer(genesis_state(model, 29), det_config(1));
    Block good = proposer.propose(gen.gen_block(300));

    // the same block validates in assisted mode only if conflict-free; the
    // proposer pre-filtered, so the raw batch may contain rejects
    Pipeline validator(genesis_state(model, 29), assisted);
    auto r = validator.validate(good);
    bool raw_batch_clean =
        filter_block(good.txs, validator.state(), 1).removed.empty();
    if (raw_batch_clean) CHECK(r == ValidateResult::Accept);
    else CHECK(r == ValidateResult::RejectOverdraft);
}
