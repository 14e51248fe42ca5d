#include "batchdex/pipeline/header.hpp"

#include <cstring>

namespace batchdex {

namespace {

struct W {
    std::vector<uint8_t> buf;
    void u8(uint8_t v) { buf.push_back(v); }
    void u64(uint64_t v) { for (int i = 7; i >= 0; i--) buf.push_back(uint8_t(v >> (8 * i))); }
    void u32(uint32_t v) { for (int i = 3; i >= 0; i--) buf.push_back(uint8_t(v >> (8 * i))); }
    void u128(uint128_t v) { u64(uint64_t(v >> 64)); u64(uint64_t(v)); }
    void bytes(const uint8_t* p, size_t n) { buf.insert(buf.end(), p, p + n); }
};

struct R {
    std::span<const uint8_t> buf;
    size_t pos = 0;
    void need(size_t n) const {
        if (pos + n > buf.size()) throw MalformedError("truncated header");
    }
    uint8_t u8() { need(1); return buf[pos++]; }
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
    uint128_t u128() {
        uint128_t hi = u64();
        return (hi << 64) | u64();
    }
    void bytes(uint8_t* p, size_t n) { need(n); std::memcpy(p, buf.data() + pos, n); pos += n; }
};

} // namespace

std::vector<uint8_t> BlockHeader::serialize() const {
    W w;
    w.u64(height);
    w.bytes(prev_hash.data(), prev_hash.size());
    w.bytes(state_root.data(), state_root.size());
    w.bytes(tx_set_hash.data(), tx_set_hash.size());
    w.u32(static_cast<uint32_t>(orderbook_roots.size()));
    for (const auto& d : orderbook_roots) w.bytes(d.data(), d.size());
    w.u32(static_cast<uint32_t>(prices.size()));
    for (Price p : prices) w.u64(p.raw());
    w.u32(static_cast<uint32_t>(y.size()));
    for (uint128_t v : y) w.u128(v);
    w.u8(eps_exp);
    w.u8(mu_exp);
    w.u8(used_lower_bounds ? 1 : 0);
    w.u8(converged ? 1 : 0);
    w.u32(static_cast<uint32_t>(marginal_keys.size()));
    for (const auto& k : marginal_keys) w.bytes(k.data(), k.size());
    for (uint64_t v : marginal_sold) w.u64(v);
    for (uint8_t v : any_executed) w.u8(v);
    return std::move(w.buf);
}

BlockHeader BlockHeader::deserialize(std::span<const uint8_t> bytes) {
    R r{bytes};
    BlockHeader h;
    h.height = r.u64();
    r.bytes(h.prev_hash.data(), 32);
    r.bytes(h.state_root.data(), 32);
    r.bytes(h.tx_set_hash.data(), 32);
    uint32_t nroots = r.u32();
    if (nroots > (1u << 20)) throw MalformedError("header root count");
    h.orderbook_roots.resize(nroots);
    for (auto& d : h.orderbook_roots) r.bytes(d.data(), 32);
    uint32_t nprices = r.u32();
    if (nprices > (1u << 16)) throw MalformedError("header price count");
    h.prices.resize(nprices);
    for (auto& p : h.prices) p = Price::from_raw(r.u64());
    uint32_t ny = r.u32();
    if (ny > (1u << 20)) throw MalformedError("header flow count");
    h.y.resize(ny);
    for (auto& v : h.y) v = r.u128();
    h.eps_exp = r.u8();
    h.mu_exp = r.u8();
    h.used_lower_bounds = r.u8() != 0;
    h.converged = r.u8() != 0;
    uint32_t nkeys = r.u32();
    if (nkeys != ny) throw MalformedError("marginal key count mismatch");
    h.marginal_keys.resize(nkeys);
    for (auto& k : h.marginal_keys) r.bytes(k.data(), k.size());
    h.marginal_sold.resize(nkeys);
    for (auto& v : h.marginal_sold) v = r.u64();
    h.any_executed.resize(nkeys);
    for (auto& v : h.any_executed) v = r.u8();
    if (r.pos != bytes.size()) throw MalformedError("trailing header bytes");
    return h;
}

Digest BlockHeader::hash() const {
    auto bytes = serialize();
    return hash_bytes(bytes);
}

Digest tx_set_hash(const std::vector<Transaction>& txs) {
    auto bytes = serialize_tx_batch(txs);
    return hash_bytes(bytes);
}

std::vector<uint8_t> Block::serialize() const {
    W w;
    auto h = header.serialize();
    w.u32(static_cast<uint32_t>(h.size()));
    w.bytes(h.data(), h.size());
    auto t = serialize_tx_batch(txs);
    w.u32(static_cast<uint32_t>(t.size()));
    w.bytes(t.data(), t.size());
    return std::move(w.buf);
}

Block Block::deserialize(std::span<const uint8_t> bytes) {
    R r{bytes};
    Block b;
    uint32_t hlen = r.u32();
    r.need(hlen);
    b.header = BlockHeader::deserialize(bytes.subspan(r.pos, hlen));
    r.pos += hlen;
    uint32_t tlen = r.u32();
    r.need(tlen);
    b.txs = deserialize_tx_batch(bytes.subspan(r.pos, tlen));
    r.pos += tlen;
    if (r.pos != bytes.size()) throw MalformedError("trailing block bytes");
    return b;
}

} // namespace batchdex
