#include "batchdex/gen/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace batchdex {

double Rng::normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

WorkloadGen::WorkloadGen(MarketModel model, uint64_t seed)
    : model_(model), rng_(seed), valuations_(model.n_assets, 1.0),
      volume_weights_(model.n_assets, 1.0), next_seq_(model.account_count + 1, 1),
      used_this_block_(model.account_count + 1, 0), open_offers_(model.account_count + 1),
      next_new_account_(model.account_count + 1000000) {
    for (auto& v : valuations_) v = std::exp(rng_.normal() * 0.5);
}

void apply_genesis(BlockState& state, const GenesisSpec& genesis) {
    Rng fund_rng(0xF00D);
    for (uint64_t id = 1; id <= genesis.account_count; id++) {
        std::array<uint8_t, 32> key{};
        put_be64(key.data(), id);
        state.create_account(id, key);
        bool poor = fund_rng.uniform() * 1e6 < static_cast<double>(genesis.poor_ppm);
        uint64_t balance = poor ? genesis.poor_balance : genesis.balance;
        for (uint16_t a = 0; a < state.n_assets(); a++)
            state.fund_account(id, AssetId{a}, Amount{balance});
    }
}

void WorkloadGen::fund_genesis(BlockState& state) {
    GenesisSpec g;
    g.account_count = model_.account_count;
    g.balance = model_.genesis_balance;
    g.poor_ppm = static_cast<uint32_t>(model_.poor_account_fraction * 1e6);
    apply_genesis(state, g);
}

GenesisSpec WorkloadGen::genesis_spec() const {
    GenesisSpec g;
    g.account_count = model_.account_count;
    g.balance = model_.genesis_balance;
    g.poor_ppm = static_cast<uint32_t>(model_.poor_account_fraction * 1e6);
    return g;
}

AccountId WorkloadGen::pick_account() {
    // power-law over [1, account_count]
    double u = rng_.uniform();
    double x = std::pow(u, model_.popularity_exponent);
    uint64_t id = 1 + static_cast<uint64_t>(x * static_cast<double>(model_.account_count));
    if (id > model_.account_count) id = model_.account_count;
    return id;
}

uint64_t WorkloadGen::next_seq(AccountId account) {
    used_this_block_[account]++;
    return next_seq_[account]++;
}

Transaction WorkloadGen::make_offer(AccountId account) {
    uint16_t sell, buy;
    // volume-weighted pair selection
    auto pick_asset = [&]() -> uint16_t {
        double total = 0;
        for (double w : volume_weights_) total += w;
        double t = rng_.uniform() * total;
        for (uint16_t i = 0; i < model_.n_assets; i++) {
            t -= volume_weights_[i];
            if (t <= 0) return i;
        }
        return static_cast<uint16_t>(model_.n_assets - 1);
    };
    sell = pick_asset();
    do { buy = pick_asset(); } while (buy == sell);

    double ratio = valuations_[sell] / valuations_[buy];
    double jitter = 1.0 + model_.limit_jitter * (2.0 * rng_.uniform() - 1.0);
    double limit = ratio * jitter;
    limit = std::clamp(limit, 1.0 / double(1 << 20), double(1 << 20));

    Transaction tx;
    tx.account = account;
    tx.seq = next_seq(account);
    tx.fee = Amount{model_.fee};
    CreateOfferOp op;
    op.sell = AssetId{sell};
    op.buy = AssetId{buy};
    op.endowment =
        Amount{model_.min_endowment + rng_.below(model_.max_endowment - model_.min_endowment + 1)};
    op.limit_price = Price::from_double(limit);
    tx.op = op;
    open_offers_[account].push_back(tx.seq);
    return tx;
}

std::vector<Transaction> WorkloadGen::gen_block(size_t size) {
    std::fill(used_this_block_.begin(), used_this_block_.end(), 0);
    // evolve valuations: drift-free GBM step
    for (auto& v : valuations_) {
        double z = rng_.normal();
        v *= std::exp(model_.valuation_sigma * z - 0.5 * model_.valuation_sigma * model_.valuation_sigma);
    }

    std::vector<Transaction> txs;
    txs.reserve(size);
    size_t guard = 0;
    while (txs.size() < size && guard < size * 20) {
        guard++;
        AccountId account = pick_account();
        if (used_this_block_[account] >= SequenceBitmap::kWindow) continue;

        double roll = rng_.uniform();
        if (roll < model_.mix_offer) {
            txs.push_back(make_offer(account));
        } else if (roll < model_.mix_offer + model_.mix_cancel) {
            auto& open = open_offers_[account];
            if (open.empty()) continue;
            size_t pick = rng_.below(open.size());
            uint64_t target_seq = open[pick];
            open.erase(open.begin() + static_cast<ssize_t>(pick));
            Transaction tx;
            tx.account = account;
            tx.seq = next_seq(account);
            tx.fee = Amount{model_.fee};
            tx.op = CancelOfferOp{OfferId{account, target_seq}};
            txs.push_back(tx);
        } else if (roll < model_.mix_offer + model_.mix_cancel + model_.mix_payment) {
            AccountId dest = pick_account();
            if (dest == account) continue;
            Transaction tx;
            tx.account = account;
            tx.seq = next_seq(account);
            tx.fee = Amount{model_.fee};
            tx.op = PaymentOp{dest, AssetId{static_cast<uint16_t>(rng_.below(model_.n_assets))},
                              Amount{1 + rng_.below(1000)}};
            txs.push_back(tx);
        } else {
            Transaction tx;
            tx.account = account;
            tx.seq = next_seq(account);
            tx.fee = Amount{model_.fee};
            CreateAccountOp op;
            op.new_id = next_new_account_++;
            put_be64(op.key.data(), op.new_id);
            tx.op = op;
            txs.push_back(tx);
        }
    }
    return txs;
}

std::vector<Transaction> WorkloadGen::gen_payment_block(size_t size) {
    std::fill(used_this_block_.begin(), used_this_block_.end(), 0);
    std::vector<Transaction> txs;
    txs.reserve(size);
    size_t guard = 0;
    while (txs.size() < size && guard < size * 20) {
        guard++;
        AccountId account = 1 + rng_.below(model_.account_count);
        if (used_this_block_[account] >= SequenceBitmap::kWindow) continue;
        AccountId dest = 1 + rng_.below(model_.account_count);
        if (dest == account) continue;
        Transaction tx;
        tx.account = account;
        tx.seq = next_seq(account);
        tx.fee = Amount{model_.fee};
        tx.op = PaymentOp{dest, AssetId{0}, Amount{1 + rng_.below(100)}};
        txs.push_back(tx);
    }
    return txs;
}

std::vector<std::vector<Transaction>> WorkloadGen::gen_robustness_series(
    const VolatilityModel& vol, size_t blocks, size_t txs_per_block) {
    std::vector<std::vector<Transaction>> series;
    series.reserve(blocks);
    double saved_sigma = model_.valuation_sigma;
    model_.valuation_sigma = vol.price_sigma;
    for (size_t b = 0; b < blocks; b++) {
        // volume concentration re-drawn per block; the degenerate model
        // leaves the stream untouched so it reduces to gen_block exactly
        if (vol.volume_sigma != 0.0)
            for (auto& w : volume_weights_) w = std::exp(vol.volume_sigma * rng_.normal());
        series.push_back(gen_block(txs_per_block));
    }
    model_.valuation_sigma = saved_sigma;
    std::fill(volume_weights_.begin(), volume_weights_.end(), 1.0);
    return series;
}

namespace {
constexpr char kWorkMagic[8] = {'B', 'D', 'X', 'W', 'O', 'R', 'K', '1'};
}

void write_workload_file(const std::string& path, const AssetRegistry& registry,
                         const GenesisSpec& genesis,
                         const std::vector<std::vector<Transaction>>& blocks) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw StorageFailure("cannot open " + path);
    auto w64 = [&](uint64_t v) {
        uint8_t b[8];
        put_be64(b, v);
        std::fwrite(b, 1, 8, f);
    };
    std::fwrite(kWorkMagic, 1, 8, f);
    std::string reg = registry.to_text();
    w64(reg.size());
    std::fwrite(reg.data(), 1, reg.size(), f);
    w64(genesis.account_count);
    w64(genesis.balance);
    w64(genesis.poor_ppm);
    w64(genesis.poor_balance);
    w64(blocks.size());
    for (const auto& block : blocks) {
        auto bytes = serialize_tx_batch(block);
        w64(bytes.size());
        std::fwrite(bytes.data(), 1, bytes.size(), f);
    }
    std::fclose(f);
}

WorkloadFile read_workload_file(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw StorageFailure("cannot open " + path);
    auto r64 = [&]() -> uint64_t {
        uint8_t b[8];
        if (std::fread(b, 1, 8, f) != 8) {
            std::fclose(f);
            throw MalformedError("truncated workload file");
        }
        return get_be64(b);
    };
    char magic[8];
    if (std::fread(magic, 1, 8, f) != 8 || std::memcmp(magic, kWorkMagic, 8) != 0) {
        std::fclose(f);
        throw MalformedError("bad workload magic");
    }
    uint64_t reg_len = r64();
    std::string reg_text(reg_len, '\0');
    if (std::fread(reg_text.data(), 1, reg_len, f) != reg_len) {
        std::fclose(f);
        throw MalformedError("truncated workload registry");
    }
    WorkloadFile out{AssetRegistry::parse(reg_text), {}, {}};
    out.genesis.account_count = r64();
    out.genesis.balance = r64();
    out.genesis.poor_ppm = static_cast<uint32_t>(r64());
    out.genesis.poor_balance = r64();
    uint64_t n_blocks = r64();
    out.blocks.reserve(n_blocks);
    for (uint64_t i = 0; i < n_blocks; i++) {
        uint64_t len = r64();
        std::vector<uint8_t> bytes(len);
        if (std::fread(bytes.data(), 1, len, f) != len) {
            std::fclose(f);
            throw MalformedError("truncated workload block");
        }
        out.blocks.push_back(deserialize_tx_batch(bytes));
    }
    std::fclose(f);
    return out;
}

std::vector<Transaction> inject_duplicates(std::vector<Transaction> txs, double fraction,
                                           uint64_t seed) {
    Rng rng(seed);
    size_t extra = static_cast<size_t>(static_cast<double>(txs.size()) * fraction);
    size_t original = txs.size();
    for (size_t i = 0; i < extra && original > 0; i++)
        txs.push_back(txs[rng.below(original)]);
    return txs;
}

} // namespace batchdex
