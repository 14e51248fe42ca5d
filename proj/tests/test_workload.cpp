#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "batchdex/engine/filter.hpp"
#include "test_util.hpp"

using namespace batchdex;

TEST_CASE("same seed, same batches; different seed differs") {
    MarketModel model;
    model.n_assets = 5;
    model.account_count = 200;
    WorkloadGen a(model, 42), b(model, 42), c(model, 43);
    for (int i = 0; i < 3; i++) {
        auto ba = a.gen_block(500), bb = b.gen_block(500), bc = c.gen_block(500);
        CHECK(ba == bb);
        CHECK(ba != bc);
    }
}

TEST_CASE("pure payment mix generates zero offers") {
    MarketModel model;
    model.n_assets = 3;
    model.account_count = 100;
    model.mix_offer = 0;
    model.mix_cancel = 0;
    model.mix_payment = 1.0;
    model.mix_create = 0;
    WorkloadGen gen(model, 1);
    auto batch = gen.gen_block(1000);
    for (const auto& tx : batch) CHECK(std::holds_alternative<PaymentOp>(tx.op));
}

TEST_CASE("every generated transaction deserializes and passes structure checks") {
    MarketModel model;
    model.n_assets = 6;
    model.account_count = 300;
    WorkloadGen gen(model, 7);
    auto state = std::make_unique<BlockState>(AssetRegistry::uniform(6));
    gen.fund_genesis(*state);

    auto batch = gen.gen_block(3000);
    for (const auto& tx : batch) {
        auto bytes = serialize_tx(tx);
        CHECK(deserialize_tx(bytes) == tx);
    }
    // structural validity: only cancel-target-missing (executed/cancelled in
    // a prior generated block is impossible here) and overspends (the poor)
    // may drop
    FilterResult f = filter_block(batch, *state, 1);
    size_t structural_bad = 0;
    for (auto& [i, reason] : f.removed) {
        if (reason != RejectReason::Overspend && reason != RejectReason::CancelTargetMissing)
            structural_bad++;
    }
    CHECK(structural_bad == 0);
}

TEST_CASE("pair frequencies track the volume weights loosely") {
    MarketModel model;
    model.n_assets = 4;
    model.account_count = 500;
    model.mix_offer = 1.0;
    model.mix_cancel = model.mix_payment = model.mix_create = 0;
    WorkloadGen gen(model, 11);
    auto batch = gen.gen_block(100000);
    std::map<uint16_t, uint64_t> sell_counts;
    for (const auto& tx : batch) sell_counts[std::get<CreateOfferOp>(tx.op).sell.id]++;
    // uniform weights: each asset within 3 sigma of 1/4
    double p = 1.0 / 4, n = static_cast<double>(batch.size());
    double sigma = std::sqrt(n * p * (1 - p));
    for (auto& [asset, count] : sell_counts)
        CHECK(std::abs(static_cast<double>(count) - n * p) < 3.5 * sigma);
}

TEST_CASE("genesis solvency: at least 95 percent of accounts stay solvent") {
    MarketModel model;
    model.n_assets = 4;
    model.account_count = 500;
    WorkloadGen gen(model, 13);
    auto state = std::make_unique<BlockState>(AssetRegistry::uniform(4));
    gen.fund_genesis(*state);
    auto batch = gen.gen_block(5000);
    FilterResult f = filter_block(batch, *state, 1);
    std::set<AccountId> overspenders;
    std::set<AccountId> senders;
    for (auto& tx : batch) senders.insert(tx.account);
    for (auto& [i, reason] : f.removed)
        if (reason == RejectReason::Overspend) overspenders.insert(batch[i].account);
    CHECK(static_cast<double>(overspenders.size()) <
          0.05 * static_cast<double>(senders.size()));
    CHECK(!overspenders.empty()); // the poor subset exists by design
}

TEST_CASE("robustness series swings implied ratios and stays deterministic") {
    MarketModel model;
    model.n_assets = 5;
    model.account_count = 300;
    VolatilityModel vol;
    vol.base = model;
    vol.price_sigma = 0.5;

    WorkloadGen a(model, 17), b(model, 17);
    auto sa = a.gen_robustness_series(vol, 20, 800);
    auto sb = b.gen_robustness_series(vol, 20, 800);
    CHECK(sa == sb);

    // per-block median implied ratio for pair (0,1) varies by 10x or more
    double lo = 1e300, hi = 0;
    for (auto& block : sa) {
        std::vector<double> ratios;
        for (auto& tx : block) {
            if (const auto* op = std::get_if<CreateOfferOp>(&tx.op)) {
                if (op->sell.id == 0 && op->buy.id == 1)
                    ratios.push_back(op->limit_price.to_double());
            }
        }
        if (ratios.size() < 3) continue;
        std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2, ratios.end());
        double med = ratios[ratios.size() / 2];
        lo = std::min(lo, med);
        hi = std::max(hi, med);
    }
    CHECK(hi / lo >= 10.0);
}

TEST_CASE("constant-volatility series reduces to the plain generator") {
    MarketModel model;
    model.n_assets = 3;
    model.account_count = 100;
    VolatilityModel vol;
    vol.base = model;
    vol.price_sigma = model.valuation_sigma; // same dynamics
    vol.volume_sigma = 0.0;                  // uniform volume weights

    WorkloadGen a(model, 19), b(model, 19);
    auto series = a.gen_robustness_series(vol, 3, 400);
    std::vector<std::vector<Transaction>> plain;
    for (int i = 0; i < 3; i++) plain.push_back(b.gen_block(400));
    CHECK(series == plain);
}

TEST_CASE("workload files round trip") {
    MarketModel model;
    model.n_assets = 3;
    model.account_count = 50;
    WorkloadGen gen(model, 23);
    std::vector<std::vector<Transaction>> blocks{gen.gen_block(100), gen.gen_block(100)};
    std::string path = "/tmp/bdx_workload_test.bdx";
    write_workload_file(path, AssetRegistry::uniform(3), gen.genesis_spec(), blocks);
    WorkloadFile wf = read_workload_file(path);
    CHECK(wf.registry.count() == 3);
    CHECK(wf.genesis.account_count == 50);
    CHECK(wf.blocks == blocks);
    std::filesystem::remove(path);
}

TEST_CASE("duplicate injection grows the batch with exact copies") {
    MarketModel model;
    model.n_assets = 3;
    model.account_count = 50;
    WorkloadGen gen(model, 29);
    auto batch = gen.gen_block(1000);
    auto bigger = inject_duplicates(batch, 0.2, 1);
    CHECK(bigger.size() == batch.size() + batch.size() / 5);
    for (size_t i = batch.size(); i < bigger.size(); i++) {
        bool found = false;
        for (size_t j = 0; j < batch.size() && !found; j++) found = bigger[i] == batch[j];
        CHECK(found);
    }
}
