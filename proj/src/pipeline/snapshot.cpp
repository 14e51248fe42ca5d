#include "batchdex/pipeline/snapshot.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

#include <fcntl.h>
#include <unistd.h>

namespace batchdex {

namespace {

constexpr char kMagic[8] = {'B', 'D', 'X', 'S', 'N', 'A', 'P', '1'};

struct W {
    std::vector<uint8_t> buf;
    void u8(uint8_t v) { buf.push_back(v); }
    void u16(uint16_t v) { buf.push_back(uint8_t(v >> 8)); buf.push_back(uint8_t(v)); }
    void u32(uint32_t v) { for (int i = 3; i >= 0; i--) buf.push_back(uint8_t(v >> (8 * i))); }
    void u64(uint64_t v) { for (int i = 7; i >= 0; i--) buf.push_back(uint8_t(v >> (8 * i))); }
    void u128(uint128_t v) { u64(uint64_t(v >> 64)); u64(uint64_t(v)); }
    void bytes(const uint8_t* p, size_t n) { buf.insert(buf.end(), p, p + n); }
};

struct R {
    std::span<const uint8_t> buf;
    size_t pos = 0;
    void need(size_t n) const {
        if (pos + n > buf.size()) throw MalformedError("truncated snapshot");
    }
    uint8_t u8() { need(1); return buf[pos++]; }
    uint16_t u16() { need(2); uint16_t v = uint16_t(buf[pos]) << 8 | buf[pos + 1]; pos += 2; return v; }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; i++) v = (v << 8) | buf[pos + i];
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; i++) v = (v << 8) | buf[pos + i];
        pos += 8;
        return v;
    }
    uint128_t u128() { uint128_t hi = u64(); return (hi << 64) | u64(); }
    void bytes(uint8_t* p, size_t n) { need(n); std::memcpy(p, buf.data() + pos, n); pos += n; }
};

} // namespace

std::vector<uint8_t> Snapshot::serialize(const BlockState& state) {
    W w;
    w.bytes(reinterpret_cast<const uint8_t*>(kMagic), 8);
    const uint16_t n = state.n_assets();
    std::string reg_text = state.registry().to_text();
    w.u32(static_cast<uint32_t>(reg_text.size()));
    w.bytes(reinterpret_cast<const uint8_t*>(reg_text.data()), reg_text.size());
    w.u64(state.height());
    for (uint16_t a = 0; a < n; a++) w.u64(state.last_prices()[a].raw());
    for (uint16_t a = 0; a < n; a++) w.u128(state.last_volumes()[a]);
    for (uint16_t a = 0; a < n; a++) w.u64(state.burned(AssetId{a}));
    for (uint16_t a = 0; a < n; a++) w.u128(state.issued(AssetId{a}));

    // account section first (restore ordering requirement)
    std::vector<AccountId> ids;
    state.account_ids(ids);
    w.u64(ids.size());
    for (AccountId id : ids) {
        const AccountRecord* rec = state.find_account(id);
        w.u64(id);
        w.bytes(rec->pubkey.data(), rec->pubkey.size());
        w.u64(rec->seqs.last_committed);
        for (uint16_t a = 0; a < n; a++) {
            w.u64(rec->available[a].load(std::memory_order_relaxed));
            w.u64(rec->locked[a].load(std::memory_order_relaxed));
        }
    }

    // orderbook section: per pair, live (key, endowment) in key order
    const auto& books = state.books();
    w.u32(books.pair_count());
    for (uint32_t idx = 0; idx < books.pair_count(); idx++) {
        const MerkleTrie& book = books.book(idx);
        w.u64(book.live_size());
        book.visit_in_order([&](std::span<const uint8_t> key, std::span<const uint8_t> value) {
            w.bytes(key.data(), key.size());
            w.bytes(value.data(), value.size());
            return true;
        });
    }

    Digest checksum = hash_bytes(w.buf);
    w.bytes(checksum.data(), checksum.size());
    return std::move(w.buf);
}

std::unique_ptr<BlockState> Snapshot::restore(std::span<const uint8_t> bytes) {
    if (bytes.size() < 40) throw MalformedError("snapshot too short");
    Digest expect;
    std::memcpy(expect.data(), bytes.data() + bytes.size() - 32, 32);
    Digest got = hash_bytes(bytes.subspan(0, bytes.size() - 32));
    if (expect != got) throw MalformedError("snapshot checksum mismatch");

    R r{bytes.subspan(0, bytes.size() - 32)};
    char magic[8];
    r.bytes(reinterpret_cast<uint8_t*>(magic), 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw MalformedError("bad snapshot magic");

    uint32_t reg_len = r.u32();
    r.need(reg_len);
    std::string reg_text(reinterpret_cast<const char*>(r.buf.data() + r.pos), reg_len);
    r.pos += reg_len;
    auto state = std::make_unique<BlockState>(AssetRegistry::parse(reg_text));
    const uint16_t n = state->n_assets();

    state->set_height(r.u64());
    for (uint16_t a = 0; a < n; a++) state->last_prices()[a] = Price::from_raw(r.u64());
    for (uint16_t a = 0; a < n; a++) state->last_volumes()[a] = r.u128();
    std::vector<uint64_t> burned(n);
    for (uint16_t a = 0; a < n; a++) burned[a] = r.u64();
    std::vector<uint128_t> issued(n);
    for (uint16_t a = 0; a < n; a++) issued[a] = r.u128();

    uint64_t n_accounts = r.u64();
    for (uint64_t i = 0; i < n_accounts; i++) {
        AccountId id = r.u64();
        std::array<uint8_t, 32> key;
        r.bytes(key.data(), key.size());
        AccountRecord& rec = state->create_account(id, key);
        rec.seqs.last_committed = r.u64();
        for (uint16_t a = 0; a < n; a++) {
            rec.available[a].store(r.u64(), std::memory_order_relaxed);
            rec.locked[a].store(r.u64(), std::memory_order_relaxed);
        }
        state->mark_dirty(id);
    }

    uint32_t pairs = r.u32();
    if (pairs != state->books().pair_count()) throw MalformedError("snapshot pair count mismatch");
    for (uint32_t idx = 0; idx < pairs; idx++) {
        uint64_t count = r.u64();
        MerkleTrie& book = state->books().book(idx);
        for (uint64_t i = 0; i < count; i++) {
            OfferKey key;
            r.bytes(key.data(), key.size());
            uint8_t val[8];
            r.bytes(val, 8);
            book.insert(key, {val, 8});
            state->index_offer(offer_id_from_key(key), OfferLocation{idx, key});
        }
    }
    if (r.pos != r.buf.size()) throw MalformedError("trailing snapshot bytes");

    // counters restored through friend access
    for (uint16_t a = 0; a < n; a++) {
        state->burned_[a].store(burned[a], std::memory_order_relaxed);
        state->issued_[a] = issued[a];
    }
    return state;
}

std::unique_ptr<BlockState> Snapshot::clone(const BlockState& state) {
    auto bytes = serialize(state);
    return restore(bytes);
}

void Snapshot::write_file(const std::string& path, std::span<const uint8_t> bytes,
                          const WriteFault& fault) {
    std::string tmp = path + ".tmp";
    FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw StorageFailure("cannot open " + tmp);
    size_t written = 0;
    const size_t chunk = 4096;
    try {
        while (written < bytes.size()) {
            size_t take = std::min(chunk, bytes.size() - written);
            if (fault) fault(written);
            if (std::fwrite(bytes.data() + written, 1, take, f) != take) {
                std::fclose(f);
                throw StorageFailure("short write to " + tmp);
            }
            written += take;
        }
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fflush(f);
    fsync(fileno(f));
    std::fclose(f);
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw StorageFailure("rename failed for " + path);
}

std::vector<uint8_t> Snapshot::read_file(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw StorageFailure("cannot open " + path);
    std::fseek(f, 0, SEEK_END);
    long len = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<uint8_t> buf(static_cast<size_t>(len));
    if (std::fread(buf.data(), 1, buf.size(), f) != buf.size()) {
        std::fclose(f);
        throw StorageFailure("short read from " + path);
    }
    std::fclose(f);
    return buf;
}

} // namespace batchdex
